"""Worker reports: honest batch gradients and forged Byzantine vectors."""
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .filtering import select_median

STRATEGIES = ("gaussian_blast", "sign_flip", "inside_threshold_drift", "zero_vector", "median_copycat")
OMNISCIENT_ONLY = {"inside_threshold_drift", "median_copycat"}


@dataclass(frozen=True)
class WorkerReport:
    worker_id: int
    vector: np.ndarray
    honest: bool


@dataclass(frozen=True)
class AttackSpec:
    strategy: str = "gaussian_blast"
    magnitude: float = 1.0
    knowledge: str = "blind"

    def __post_init__(self):
        errors = []
        if self.strategy not in STRATEGIES:
            errors.append(f"unknown attack strategy {self.strategy!r}; expected one of {list(STRATEGIES)}")
        if not self.magnitude >= 0:
            errors.append("attack magnitude must be >= 0")
        if self.knowledge not in ("blind", "omniscient"):
            errors.append("attack knowledge must be 'blind' or 'omniscient'")
        elif self.strategy in OMNISCIENT_ONLY and self.knowledge != "omniscient":
            errors.append(f"attack {self.strategy!r} needs knowledge = omniscient")
        if errors:
            raise ConfigError(errors)


@dataclass(frozen=True)
class EpochContext:
    """What an attacker may look at when forging its report.

    Blind attackers only get ``x0`` (and the problem, which every node has);
    ``honest_vectors`` and ``filter_params`` are for omniscient ones.
    """

    problem: object
    x0: np.ndarray
    honest_vectors: np.ndarray = None
    filter_params: object = None
    drift_direction: np.ndarray = None


def honest_report(problem, x0, B, worker_id, rng):
    """Average of B fresh stochastic gradients at x0."""
    if B < 1:
        raise ConfigError("batch size B must be >= 1")
    grads = problem.sample_gradients(x0, int(B), rng)
    return WorkerReport(int(worker_id), grads.mean(axis=0), True)


def drift_direction(d, rng=None):
    """Unit direction shared by colluding drift attackers.

    Drawn once per run from ``rng``; without one, the normalized all-ones
    vector.
    """
    if rng is None:
        return np.full(d, 1.0 / np.sqrt(d))
    u = rng.standard_normal(d)
    return u / np.linalg.norm(u)


def forge_report(attack, context, worker_id, rng):
    x0 = np.asarray(context.x0, dtype=float)
    s = attack.strategy
    m = attack.magnitude
    if s in OMNISCIENT_ONLY and attack.knowledge != "omniscient":
        raise ConfigError(f"attack {s!r} needs knowledge = omniscient")

    if s == "zero_vector":
        vec = np.zeros_like(x0)
    elif s == "sign_flip":
        vec = -m * context.problem.full_gradient(x0)
    elif s == "gaussian_blast":
        g = rng.standard_normal(x0.shape[0])
        g /= np.linalg.norm(g)
        vec = context.problem.full_gradient(x0) + m * g
    elif s == "inside_threshold_drift":
        honest_mean = np.mean(context.honest_vectors, axis=0)
        radius = 2.0 * context.filter_params.median_radius
        # 1% inside the Rule-1 membership radius
        u = context.drift_direction
        if u is None:
            u = drift_direction(x0.shape[0])
        vec = honest_mean + 0.99 * radius * u
    else:  # median_copycat
        vec = copycat_vector(context)
    return WorkerReport(int(worker_id), vec, False)


def copycat_vector(context):
    """The honest report the filter would pick as its median."""
    honest = np.asarray(context.honest_vectors)
    params = context.filter_params
    for radius in (params.median_radius, 2.0 * params.V):
        k = select_median(honest, radius)
        if k is not None:
            return honest[k].copy()
    return honest[0].copy()
