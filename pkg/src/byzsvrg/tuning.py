"""Step size, feasibility window and schedule sizing for the convergence bound.

The bound on E||grad f(x_a)||^2 has three terms:

    12 L gap / (T B^(1/3))  +  32 V^2 / ((1-a)^2 K B)  +  2176 a^2 V^2 C / ((1-a)^2 B)

and needs B >= 16 and a confidence delta with

    exp(delta B / (2 (1 - 2 delta))) <= 2K/delta <= exp(B/2),   delta <= 1/(25 K B).
"""
import math
from dataclasses import dataclass, field

from scipy.optimize import brentq

from .errors import ConfigError

MIN_BATCH = 16


@dataclass(frozen=True)
class Feasibility:
    batch_floor: bool
    delta_range: bool
    lower_window: bool
    upper_window: bool
    delta_cap: bool

    @property
    def violations(self):
        return [name for name, ok in self.verdicts().items() if not ok]

    @property
    def valid(self):
        return not self.violations

    def verdicts(self):
        return {
            "batch_floor": self.batch_floor,
            "delta_range": self.delta_range,
            "lower_window": self.lower_window,
            "upper_window": self.upper_window,
            "delta_cap": self.delta_cap,
        }


def validate(K, B, delta):
    """Evaluate every constraint (in log space) and report all verdicts."""
    if K < 1 or B < 1:
        raise ConfigError("validate needs K >= 1 and B >= 1")
    in_range = 0 < delta < 1
    if in_range:
        log_ratio = math.log(2.0 * K / delta)
        denom = 2.0 * (1.0 - 2.0 * delta)
        lower = denom > 0 and delta * B / denom <= log_ratio
        upper = log_ratio <= B / 2.0
        cap = delta <= 1.0 / (25.0 * K * B)
    else:
        lower = upper = cap = False
    return Feasibility(
        batch_floor=B >= MIN_BATCH,
        delta_range=in_range,
        lower_window=lower,
        upper_window=upper,
        delta_cap=cap,
    )


def default_step_size(L, B):
    if L <= 0 or B < 1:
        raise ConfigError("step size needs L > 0 and B >= 1")
    return 1.0 / (3.0 * L * B ** (2.0 / 3.0))


def confidence_constant(K, delta):
    return 2.0 * math.log(2.0 * K / delta)


def bound_terms(L, f_gap, T, B, V, alpha, K, confidence):
    """The three terms of the constant-batch convergence bound: optimization,
    honest sampling noise, Byzantine leakage."""
    scale = (1.0 - alpha) ** -2
    return (
        12.0 * L * f_gap / (T * B ** (1.0 / 3.0)),
        32.0 * V**2 * scale / (K * B),
        2176.0 * alpha**2 * V**2 * confidence * scale / B,
    )


def rate_bound(L, f_gap, T, B, V, alpha, K, confidence):
    return sum(bound_terms(L, f_gap, T, B, V, alpha, K, confidence))


def delta_window(K, B):
    """(smallest, largest) delta satisfying the exponential window for (K, B).

    The upper inequality gives delta >= 2K e^{-B/2}; the lower one gives an
    upper limit found by root-finding (its left side increases in delta,
    its right side decreases).  The cap 1/(25KB) is applied too.
    """
    lo = 2.0 * K * math.exp(-B / 2.0)

    def g(d):
        return d * B / (2.0 * (1.0 - 2.0 * d)) - math.log(2.0 * K / d)

    tiny, near_half = 1e-300, 0.5 - 1e-12
    hi = near_half if g(near_half) <= 0 else brentq(g, tiny, near_half, xtol=1e-300, rtol=1e-15)
    while g(hi) > 0:
        hi = math.nextafter(hi, 0.0)
    hi = min(hi, 1.0 / (25.0 * K * B))
    return lo, hi


@dataclass
class HyperParams:
    K: int
    alpha: float
    B: int
    T: int
    eta: float
    delta: float
    confidence: float
    median_radius: float
    epsilon_target: float
    feasibility: Feasibility
    eta_overridden: bool = False
    notes: list = field(default_factory=list)

    def as_dict(self):
        return {
            "K": self.K,
            "alpha": self.alpha,
            "B": self.B,
            "T": self.T,
            "eta": self.eta,
            "eta_overridden": self.eta_overridden,
            "delta": self.delta,
            "confidence": self.confidence,
            "median_radius": self.median_radius,
            "epsilon_target": self.epsilon_target,
            "feasible": self.feasibility.valid,
            "constraints": self.feasibility.verdicts(),
            "notes": list(self.notes),
        }


def _batch_for(epsilon, K, alpha, V, C):
    scale = (1.0 - alpha) ** -2
    b_workers = math.ceil(96.0 * V**2 * scale / (K * epsilon))
    b_byz = math.ceil(6528.0 * alpha**2 * V**2 * C * scale / epsilon) if alpha > 0 else 0
    return max(MIN_BATCH, b_workers, b_byz)


def suggest_schedule(epsilon, K, alpha, L, V, f_gap_estimate, max_passes=64):
    """Size B, T and delta so each bound term is at most epsilon/3."""
    if not epsilon > 0:
        raise ConfigError("epsilon must be > 0")
    if not 0 <= alpha < 0.5 or K < 1 or L <= 0 or V < 0 or f_gap_estimate < 0:
        raise ConfigError("suggest_schedule needs K >= 1, 0 <= alpha < 1/2, L > 0, V >= 0, f_gap >= 0")
    notes = []

    C = confidence_constant(K, 1.0 / (25.0 * K * MIN_BATCH))
    for _ in range(max_passes):
        B = _batch_for(epsilon, K, alpha, V, C)
        lo, hi = delta_window(K, B)
        delta = hi
        C_next = confidence_constant(K, delta)
        if _batch_for(epsilon, K, alpha, V, C_next) <= B:
            C = C_next
            break
        C = C_next
    else:
        notes.append("batch/confidence fixed point did not settle")

    if lo > hi:
        notes.append(f"empty delta window for K={K}, B={B}: need delta >= {lo:.3g} but <= {hi:.3g}")
    T = max(1, math.ceil(36.0 * L * f_gap_estimate / (epsilon * B ** (1.0 / 3.0))))
    return HyperParams(
        K=K,
        alpha=alpha,
        B=B,
        T=T,
        eta=default_step_size(L, B),
        delta=delta,
        confidence=C,
        median_radius=2.0 * V * math.sqrt(C / B),
        epsilon_target=epsilon,
        feasibility=validate(K, B, delta),
        notes=notes,
    )
