"""Epoch loop: broadcast, collect reports, filter, geometric-length SVRG inner loop."""
import time
from dataclasses import dataclass, field

import numpy as np

from . import streams
from .adversary import EpochContext, drift_direction, forge_report, honest_report
from .errors import HonestMajorityViolated, NonFiniteIterate
from .filtering import compute_constants, filter_and_aggregate, naive_mean


def sample_inner_length(B, rng):
    """N with P[N = n] = (1/(B+1)) (B/(B+1))^n, n >= 0, so E[N] = B."""
    # numpy counts trials up to and including the first success
    return int(rng.geometric(1.0 / (B + 1.0))) - 1


def sample_inner_lengths(B, size, rng):
    return rng.geometric(1.0 / (B + 1.0), size=size) - 1


def inner_update(x_n, x_0, anchor_mean, problem, eta, rng):
    """One control-variate step; both gradients share a single fresh sample."""
    g_n, g_0 = problem.paired_sample_gradients(x_n, x_0, rng)
    v = g_n - g_0 + anchor_mean
    x_next = x_n - eta * v
    if not np.all(np.isfinite(x_next)):
        raise NonFiniteIterate(
            f"inner update produced a non-finite iterate (|anchor_mean| = {np.linalg.norm(anchor_mean):.3g}, eta = {eta:g})"
        )
    return x_next, 1


@dataclass
class EpochRecord:
    t: int
    grad_norm_sq: float
    f_value: float
    N_t: int
    rule: str
    accepted_count: int
    accept_bitmap: str
    median_id: int
    server_samples: int
    worker_samples: int
    server_samples_cum: int
    worker_samples_cum: int
    gradient_evals: int
    capped: bool
    iterate_norm: float
    wall_ms: float = None


def accept_bitmap(accepted, K):
    mask = sum(1 << k for k in accepted)
    return format(mask, f"0{(K + 3) // 4}x")


@dataclass
class RunResult:
    output: np.ndarray
    selected_epoch: int
    trace: list
    total_samples_server: int
    total_samples_per_worker: int
    server_gradient_evals: int
    byzantine_ids: frozenset
    iterates: list = field(repr=False)
    status: str = "completed"

    @property
    def min_grad_norm_sq(self):
        return min(r.grad_norm_sq for r in self.trace)

    @property
    def final_grad_norm_sq(self):
        return self.trace[-1].grad_norm_sq

    @property
    def rule2_count(self):
        return sum(r.rule == "Rule2" for r in self.trace)


class Simulation:
    """Holds everything fixed for one run; epochs are driven by :meth:`run_epoch`."""

    def __init__(self, config, problem=None):
        self.config = config
        self.problem = problem if problem is not None else config.problem()
        self.K = config.K
        self.B = config.B
        self.eta = config.eta
        self.seed = config.seed
        self.attack = config.attack_spec()
        self.byzantine = streams.byzantine_ids(config.K, config.alpha, config.seed)
        self.params = compute_constants(
            config.K, config.delta, self.problem.deviation_bound, config.B, alpha=config.alpha
        )
        self.filtered = config.mode == "filtered"
        self.direction = drift_direction(
            self.problem.dimension, streams.stream(self.seed, streams.ATTACK_DIRECTION)
        )

    def initial_point(self):
        return np.broadcast_to(np.asarray(self.config.x0, dtype=float), (self.problem.dimension,)).copy()

    def collect_reports(self, x0, t):
        """All K reports for epoch t, in worker-id order."""
        reports = {}
        for k in range(self.K):
            if k not in self.byzantine:
                rng = streams.stream(self.seed, streams.WORKER, t, k)
                reports[k] = honest_report(self.problem, x0, self.B, k, rng)
        if self.byzantine:
            honest_vectors = np.array([reports[k].vector for k in sorted(reports)])
            if self.attack.knowledge == "omniscient":
                ctx = EpochContext(self.problem, x0, honest_vectors, self.params, self.direction)
            else:
                ctx = EpochContext(self.problem, x0)
            for k in sorted(self.byzantine):
                rng = streams.stream(self.seed, streams.WORKER, t, k)
                reports[k] = forge_report(self.attack, ctx, k, rng)
        return [reports[k] for k in range(self.K)]

    def aggregate(self, reports):
        vectors = np.array([r.vector for r in reports])
        if self.filtered:
            return filter_and_aggregate(vectors, self.params)
        return naive_mean(vectors)

    def run_epoch(self, t, x0, inner_length=None, cumulative=(0, 0)):
        """Run epoch ``t`` from anchor ``x0``; returns (x_tilde, EpochRecord).

        ``inner_length`` forces N_t (test hook); otherwise it is drawn from
        its own stream, independent of the inner-loop samples.
        """
        start = time.perf_counter() if self.config.wall_time else None
        reports = self.collect_reports(x0, t)
        outcome = self.aggregate(reports)
        anchor_mean = outcome.aggregate

        if inner_length is None:
            inner_length = sample_inner_length(self.B, streams.stream(self.seed, streams.LENGTH, t))
        cap = self.config.inner_cap
        capped = inner_length > cap
        n_steps = min(inner_length, cap)

        rng = streams.stream(self.seed, streams.INNER, t)
        x = x0
        used = 0
        for _ in range(n_steps):
            x, s = inner_update(x, x0, anchor_mean, self.problem, self.eta, rng)
            used += s

        grad = self.problem.full_gradient(x)
        server_cum = cumulative[0] + used
        worker_cum = cumulative[1] + self.B
        record = EpochRecord(
            t=t,
            grad_norm_sq=float(grad @ grad),
            f_value=self.problem.objective_value(x),
            N_t=n_steps,
            rule=outcome.rule_used,
            accepted_count=len(outcome.accepted),
            accept_bitmap=accept_bitmap(outcome.accepted, self.K),
            median_id=outcome.median_id,
            server_samples=used,
            worker_samples=self.B,
            server_samples_cum=server_cum,
            worker_samples_cum=worker_cum,
            gradient_evals=2 * used,
            capped=capped,
            iterate_norm=float(np.linalg.norm(x)),
            wall_ms=None if start is None else (time.perf_counter() - start) * 1e3,
        )
        return x, record

    def diverged(self, x_start, trace):
        """Iterate left the divergence radius, or the squared gradient norm
        over the second half of the run sits (in the median) above
        ``divergence_factor`` times its starting scale, the max of the
        initial value and V^2.  The median keeps one short last epoch from
        deciding the verdict."""
        if any(r.iterate_norm > self.config.divergence_radius for r in trace):
            return True
        g0 = self.problem.full_gradient(x_start)
        scale = max(float(g0 @ g0), self.problem.deviation_bound**2)
        tail = np.array([r.grad_norm_sq for r in trace[len(trace) // 2:]])
        if not np.all(np.isfinite(tail)):
            return True
        return float(np.median(tail)) > self.config.divergence_factor * scale

    def run(self, on_epoch=None):
        x = self.initial_point()
        iterates = [x]
        trace = []
        cumulative = (0, 0)
        status = "completed"
        for t in range(1, self.config.T + 1):
            try:
                x, record = self.run_epoch(t, x, cumulative=cumulative)
            except (HonestMajorityViolated, NonFiniteIterate) as exc:
                exc.partial_trace = trace
                exc.epoch = t
                raise
            cumulative = (record.server_samples_cum, record.worker_samples_cum)
            trace.append(record)
            iterates.append(x)
            if on_epoch is not None:
                on_epoch(record)
        if self.diverged(iterates[0], trace):
            status = "diverged"

        a = int(streams.stream(self.seed, streams.OUTPUT).integers(1, self.config.T + 1))
        return RunResult(
            output=iterates[a],
            selected_epoch=a,
            trace=trace,
            total_samples_server=cumulative[0],
            total_samples_per_worker=cumulative[1],
            server_gradient_evals=sum(r.gradient_evals for r in trace),
            byzantine_ids=self.byzantine,
            iterates=iterates,
            status=status,
        )


def run(config, problem=None):
    return Simulation(config, problem).run()
