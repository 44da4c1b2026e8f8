import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from byzsvrg import streams
from byzsvrg.adversary import AttackSpec, EpochContext, drift_direction, forge_report, honest_report
from byzsvrg.config import build_config
from byzsvrg.engine import Simulation
from byzsvrg.errors import ConfigError
from byzsvrg.filtering import RULE1, FilterParams, filter_and_aggregate
from byzsvrg.problems import BoundedNoiseQuadratic


def test_noiseless_honest_report_is_gradient():
    p = BoundedNoiseQuadratic(4, noise_radius=0.0, center=1.0)
    x0 = np.arange(4.0)
    r = honest_report(p, x0, 37, 2, np.random.default_rng(0))
    np.testing.assert_array_equal(r.vector, p.full_gradient(x0))
    assert r.honest and r.worker_id == 2


def test_batch_of_one_is_single_draw():
    p = BoundedNoiseQuadratic(4)
    x0 = np.ones(4)
    r = honest_report(p, x0, 1, 0, np.random.default_rng(5))
    np.testing.assert_array_equal(r.vector, p.sample_gradient(x0, np.random.default_rng(5)))


def test_honest_report_variance():
    p = BoundedNoiseQuadratic(6)
    x0 = np.ones(6)
    rng = np.random.default_rng(1)
    sq = np.array([np.sum((honest_report(p, x0, 64, 0, rng).vector - x0) ** 2) for _ in range(10_000)])
    # sphere noise of radius 1 averaged over 64 draws: exact second moment 1/64
    assert abs(sq.mean() - 1 / 64) <= 3 * sq.std() / math.sqrt(sq.size)


def test_honest_reports_stay_in_deviation_ball():
    p = BoundedNoiseQuadratic(3, noise_radius=2.0)
    rng = np.random.default_rng(2)
    for _ in range(10_000):
        x0 = rng.normal(size=3)
        r = honest_report(p, x0, 4, 0, rng)
        assert np.linalg.norm(r.vector - p.full_gradient(x0)) <= 2.0 * (1 + 1e-12)


def test_honest_report_needs_positive_batch():
    with pytest.raises(ConfigError):
        honest_report(BoundedNoiseQuadratic(2), np.zeros(2), 0, 0, np.random.default_rng())


def test_simple_forgeries():
    p = BoundedNoiseQuadratic(2)
    ctx = EpochContext(p, np.array([1.0, 0.0]))
    rng = np.random.default_rng(0)
    z = forge_report(AttackSpec("zero_vector"), ctx, 3, rng)
    np.testing.assert_array_equal(z.vector, [0.0, 0.0])
    assert not z.honest
    s = forge_report(AttackSpec("sign_flip", 10.0), ctx, 3, rng)
    np.testing.assert_array_equal(s.vector, [-10.0, 0.0])
    b = forge_report(AttackSpec("gaussian_blast", 1000.0), ctx, 3, rng)
    assert np.linalg.norm(b.vector - [1.0, 0.0]) == pytest.approx(1000.0)


def test_blind_knowledge_rejected_for_omniscient_strategies():
    for s in ("inside_threshold_drift", "median_copycat"):
        with pytest.raises(ConfigError):
            AttackSpec(s, 1.0, "blind")
    with pytest.raises(ConfigError):
        AttackSpec("gaussian_blast", -1.0)
    with pytest.raises(ConfigError):
        AttackSpec("krum_evasion")


def test_drift_lands_inside_rule1_ball():
    # V = 1, B = 32, C = 2 gives median_radius = 0.5
    p = FilterParams(K=5, alpha=0.4, V=1.0, B=32, delta=2 * 5 / math.e)
    assert p.median_radius == pytest.approx(0.5)
    prob = BoundedNoiseQuadratic(3, noise_radius=0.0)
    x0 = np.array([1.0, 2.0, 3.0])
    honest = np.tile(prob.full_gradient(x0), (3, 1))
    u = drift_direction(3, np.random.default_rng(4))
    ctx = EpochContext(prob, x0, honest, p, u)
    forged = [forge_report(AttackSpec("inside_threshold_drift", 1.0, "omniscient"), ctx, k, None) for k in (3, 4)]
    for f in forged:
        assert np.linalg.norm(f.vector - honest.mean(axis=0)) == pytest.approx(0.99)
    vectors = np.vstack([honest] + [f.vector for f in forged])
    out = filter_and_aggregate(vectors, p)
    assert out.rule_used == RULE1
    assert out.accepted == frozenset(range(5))


def test_copycat_returns_honest_median_vector():
    p = FilterParams(K=5, alpha=0.4, V=1.0, B=64, delta=1e-3)
    honest = np.array([[0.0, 0.0], [0.05, 0.0], [3.0, 3.0]])
    ctx = EpochContext(BoundedNoiseQuadratic(2), np.zeros(2), honest, p)
    r = forge_report(AttackSpec("median_copycat", 0.0, "omniscient"), ctx, 4, None)
    np.testing.assert_array_equal(r.vector, honest[0])


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 40), st.sampled_from([0.0, 0.1, 0.2, 0.25, 0.3, 0.49]), st.integers(0, 2**63))
def test_byzantine_count_bounded(K, alpha, seed):
    ids = streams.byzantine_ids(K, alpha, seed)
    assert len(ids) == math.floor(alpha * K + 1e-12) == streams.max_byzantine(K, alpha)
    assert all(0 <= k < K for k in ids)
    assert ids == streams.byzantine_ids(K, alpha, seed)


def test_epoch_reports_deterministic_and_flagged():
    cfg = build_config(K=10, alpha=0.3, attack="gaussian_blast", magnitude=100.0, B=16, T=3, seed=11)
    a, b = Simulation(cfg), Simulation(cfg)
    for t in (1, 2):
        ra = a.collect_reports(np.ones(10), t)
        rb = b.collect_reports(np.ones(10), t)
        assert sum(not r.honest for r in ra) <= 3
        assert {r.worker_id for r in ra if not r.honest} == set(a.byzantine)
        for x, y in zip(ra, rb):
            np.testing.assert_array_equal(x.vector, y.vector)
