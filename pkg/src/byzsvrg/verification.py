"""Monte Carlo checks of the concentration, error-moment and telescoping lemmas.

Slack factors are fixed: probability checks pass at <= 2*delta, moment
identities at |lhs - rhs| <= 4 standard errors, and the error-moment bound
gets no slack at all.
"""
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import streams
from .adversary import AttackSpec, EpochContext, drift_direction, forge_report, honest_report
from .errors import ConfigError
from .filtering import compute_constants, filter_and_aggregate, naive_mean
from .problems import sphere
from .tuning import validate

PROBABILITY_SLACK = 2.0
STDERR_MULTIPLE = 4.0
CHUNK = 2000


@dataclass
class LemmaCheckReport:
    lemma_id: str
    trials: int
    empirical_value: float
    bound_value: float
    passed: bool
    confidence_note: str
    details: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)


def _chunks(total, size=CHUNK):
    done = 0
    while done < total:
        n = min(size, total - done)
        yield n
        done += n


def batch_mean_deviations(problem, x, K, B, trials, rng):
    """||mu^(k) - grad f(x)|| for ``trials`` x K honest batch means, shape (trials, K)."""
    grad = problem.full_gradient(x)
    out = np.empty((trials, K))
    row = 0
    per_chunk = max(1, CHUNK * 16 // (K * B))
    for n in _chunks(trials, per_chunk):
        g = problem.sample_gradients(x, n * K * B, rng).reshape(n, K, B, -1)
        dev = g.mean(axis=2) - grad
        out[row:row + n] = np.linalg.norm(dev, axis=2)
        row += n
    return out


def check_concentration(problem, x, K, B, delta, trials, rng):
    """Fraction of trials where some honest batch mean leaves the V*sqrt(C/B) ball."""
    if trials < 1000:
        raise ConfigError("check_concentration needs at least 1000 trials")
    params = compute_constants(K, delta, problem.deviation_bound, B)
    radius = problem.deviation_bound * math.sqrt(params.confidence / B)
    dev = batch_mean_deviations(problem, x, K, B, trials, rng)
    failures = int(np.count_nonzero(np.any(dev > radius, axis=1)))
    frac = failures / trials
    return LemmaCheckReport(
        lemma_id="concentration_T_mu",
        trials=trials,
        empirical_value=frac,
        bound_value=delta,
        passed=frac <= PROBABILITY_SLACK * delta,
        confidence_note=f"pass if failure fraction <= {PROBABILITY_SLACK:g} * delta",
        details={
            "failures": failures,
            "radius": radius,
            "confidence": params.confidence,
            "max_deviation": float(dev.max()),
            "mean_deviation": float(dev.mean()),
        },
    )


@dataclass
class ErrorMomentScenario:
    problem: object
    x: np.ndarray
    K: int
    alpha: float
    attack: AttackSpec
    B: int
    delta: float
    mode: str = "filtered"
    seed: int = 0


def error_moment_bound(V, alpha, K, B, confidence):
    scale = (1.0 - alpha) ** -2
    return 4.0 * V**2 * scale / (K * B) + 272.0 * alpha**2 * V**2 * confidence * scale / B


def check_error_moment(scenario, trials, rng=None):
    """Mean of ||anchor_mean - grad f(x)||^2 over independent report/filter rounds at fixed x."""
    s = scenario
    feas = validate(s.K, s.B, s.delta)
    failed = [c for c in ("delta_range", "lower_window", "upper_window", "delta_cap") if not getattr(feas, c)]
    if failed:
        raise ConfigError([f"(delta, B) = ({s.delta:g}, {s.B}) violates {name}" for name in failed])

    params = compute_constants(s.K, s.delta, s.problem.deviation_bound, s.B, alpha=s.alpha)
    byz = streams.byzantine_ids(s.K, s.alpha, s.seed)
    x = np.asarray(s.x, dtype=float)
    grad = s.problem.full_gradient(x)
    base = s.seed if rng is None else int(rng.integers(0, 2**63))
    u = drift_direction(s.problem.dimension, streams.stream(base, streams.ATTACK_DIRECTION))

    errs = np.empty(trials)
    rule2 = 0
    for i in range(trials):
        reports = {}
        for k in range(s.K):
            if k not in byz:
                reports[k] = honest_report(s.problem, x, s.B, k, streams.stream(base, streams.TRIAL, i, k))
        if byz:
            honest = np.array([reports[k].vector for k in sorted(reports)])
            ctx = EpochContext(s.problem, x, honest, params, u)
            for k in sorted(byz):
                reports[k] = forge_report(s.attack, ctx, k, streams.stream(base, streams.TRIAL, i, k))
        vectors = np.array([reports[k].vector for k in range(s.K)])
        outcome = filter_and_aggregate(vectors, params) if s.mode == "filtered" else naive_mean(vectors)
        rule2 += outcome.rule_used == "Rule2"
        e = outcome.aggregate - grad
        errs[i] = e @ e

    empirical = math.fsum(errs) / trials
    bound = error_moment_bound(s.problem.deviation_bound, s.alpha, s.K, s.B, params.confidence)
    return LemmaCheckReport(
        lemma_id="error_moment_bound",
        trials=trials,
        empirical_value=empirical,
        bound_value=bound,
        passed=empirical <= bound,
        confidence_note="pass if empirical mean <= bound (no Monte Carlo slack)",
        details={
            "confidence": params.confidence,
            "median_radius": params.median_radius,
            "stderr": float(errs.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0,
            "rule2_count": rule2,
            "byzantine_ids": sorted(byz),
            "mode": s.mode,
        },
    )


def sequence_values(spec, n):
    """Evaluate a built-in bounded sequence D_0..D_{n_max} at integer array ``n``.

    Specs: ``"const:c"``, ``"geometric:rho"`` (rho in [0, 1)), ``"harmonic"``.
    """
    name, _, arg = spec.partition(":")
    n = np.asarray(n, dtype=float)
    if name == "const":
        return np.full_like(n, float(arg or 1.0))
    if name == "geometric":
        rho = float(arg)
        if not 0 <= rho < 1:
            raise ConfigError(f"geometric sequence needs 0 <= rho < 1 to stay bounded, got {rho}")
        return rho**n
    if name == "harmonic":
        return 1.0 / (n + 1.0)
    raise ConfigError(f"unknown sequence spec {spec!r}")


def check_geom_telescope(B, sequence_spec, trials, rng):
    """E[D_N - D_{N+1}] vs (1/G - 1)(D_0 - E D_N) with N ~ Geom(G), G = B/(B+1)."""
    gamma = B / (B + 1.0)
    N = rng.geometric(1.0 / (B + 1.0), size=trials) - 1
    d_n = sequence_values(sequence_spec, N)
    d_next = sequence_values(sequence_spec, N + 1)
    d0 = float(sequence_values(sequence_spec, np.array([0]))[0])
    factor = 1.0 / gamma - 1.0
    lhs_terms = d_n - d_next
    diff_terms = lhs_terms - factor * (d0 - d_n)
    lhs = float(lhs_terms.mean())
    rhs = factor * (d0 - float(d_n.mean()))
    gap = abs(float(diff_terms.mean()))
    stderr = float(diff_terms.std(ddof=1) / math.sqrt(trials))
    return LemmaCheckReport(
        lemma_id="geom_telescope",
        trials=trials,
        empirical_value=gap,
        bound_value=STDERR_MULTIPLE * stderr,
        passed=gap <= STDERR_MULTIPLE * stderr,
        confidence_note=f"pass if |lhs - rhs| <= {STDERR_MULTIPLE:g} * stderr of the per-draw difference",
        details={"lhs": lhs, "rhs": rhs, "stderr": stderr, "gamma": gamma, "sequence": sequence_spec},
    )


def pinelis_threshold(M, N, delta):
    return 2.0 * math.log(2.0 / delta) * M**2 * N


def check_pinelis(M, N, d, delta, trials, rng):
    """P[||X_1 + ... + X_N||^2 > 2 log(2/delta) M^2 N] for X_n uniform on the radius-M sphere."""
    threshold = pinelis_threshold(M, N, delta)
    failures = 0
    max_sq = 0.0
    per_chunk = max(1, CHUNK * 64 // (N * d))
    for n in _chunks(trials, per_chunk):
        X = sphere(rng, n * N, d, M).reshape(n, N, d)
        sq = np.einsum("ij,ij->i", X.sum(axis=1), X.sum(axis=1))
        failures += int(np.count_nonzero(sq > threshold))
        max_sq = max(max_sq, float(sq.max()))
    frac = failures / trials
    return LemmaCheckReport(
        lemma_id="pinelis",
        trials=trials,
        empirical_value=frac,
        bound_value=delta,
        passed=frac <= PROBABILITY_SLACK * delta,
        confidence_note=f"pass if failure fraction <= {PROBABILITY_SLACK:g} * delta",
        details={"threshold": threshold, "failures": failures, "max_norm_sq": max_sq},
    )
