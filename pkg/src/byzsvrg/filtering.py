"""Two-stage majority-ball vector median filter.

Rule 1 picks a report whose median_radius-ball holds a strict majority and keeps
everything within 2*median_radius of it.  If that fails (no such report, or too few
survivors) Rule 2 repeats with radii 2V / 4V, which always keeps every
honest report when honest workers are a strict majority.

No coordinate-wise operation is performed; the cost is O(K^2 d).
"""
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import ConfigError, HonestMajorityViolated

RULE1 = "Rule1"
RULE2 = "Rule2"


@dataclass(frozen=True)
class FilterParams:
    K: int
    alpha: float
    V: float
    B: int
    delta: float

    @property
    def confidence(self):
        return 2.0 * math.log(2.0 * self.K / self.delta)

    @property
    def median_radius(self):
        return 2.0 * self.V * math.sqrt(self.confidence / self.B)

    @property
    def min_accepted(self):
        """ceil((1 - alpha) K), computed exactly from the decimal alpha."""
        return math.ceil((1 - Fraction(str(self.alpha))) * self.K)


@dataclass(frozen=True)
class FilterOutcome:
    accepted: frozenset
    median_id: int
    rule_used: str
    aggregate: np.ndarray

    def accept_mask(self, K):
        return [k in self.accepted for k in range(K)]


def compute_constants(K, delta, V, B, alpha=0.0):
    """Validated :class:`FilterParams`; confidence and median_radius are derived on access."""
    errors = []
    if int(K) != K or K < 1:
        errors.append("K must be an integer >= 1")
    if not 0 < delta < 1:
        errors.append("delta must lie in (0, 1)")
    if not V >= 0:
        errors.append("V must be >= 0")
    if int(B) != B or B < 1:
        errors.append("B must be an integer >= 1")
    if not 0 <= alpha < 0.5:
        errors.append("alpha must satisfy 0 <= alpha < 1/2")
    if errors:
        raise ConfigError(errors)
    return FilterParams(K=int(K), alpha=float(alpha), V=float(V), B=int(B), delta=float(delta))


def pairwise_distances(vectors):
    """Euclidean distance matrix; rows containing NaN/Inf give NaN or Inf."""
    R = np.asarray(vectors, dtype=float)
    with np.errstate(invalid="ignore", over="ignore"):
        diff = R[:, None, :] - R[None, :, :]
        return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def _ball_counts(dist, radius):
    # NaN compares False, so a non-finite report is in nobody's ball (not even its own)
    return np.count_nonzero(dist <= radius, axis=1)


def select_median(vectors, radius, dist=None):
    """Smallest id whose radius-ball holds strictly more than K/2 reports, else None."""
    if dist is None:
        dist = pairwise_distances(vectors)
    K = dist.shape[0]
    counts = _ball_counts(dist, radius)
    qualified = np.flatnonzero(2 * counts > K)
    if qualified.size == 0:
        return None
    return int(qualified[0])


def exact_mean(vectors, ids):
    """Mean of the selected rows using correctly rounded per-coordinate sums.

    ``math.fsum`` makes the result independent of summation order, so the
    aggregate is bit-identical under any permutation of the workers.
    """
    ids = sorted(ids)
    rows = np.asarray(vectors, dtype=float)[ids]
    if not np.all(np.isfinite(rows)):
        # fsum rejects inf - inf; only the unfiltered baseline gets here
        with np.errstate(invalid="ignore"):
            return rows.sum(axis=0) / len(ids)
    total = np.array([math.fsum(col) for col in rows.T])
    return total / len(ids)


def _members(dist, median, radius):
    return frozenset(int(k) for k in np.flatnonzero(dist[median] <= radius))


def filter_and_aggregate(vectors, params):
    """Run the Byzantine filtering step on K reported vectors.

    ``vectors`` is a (K, d) array in worker-id order.
    """
    vectors = np.asarray(vectors, dtype=float)
    K = vectors.shape[0]
    if K != params.K:
        raise ConfigError(f"expected {params.K} reports, got {K}")
    dist = pairwise_distances(vectors)

    median = select_median(vectors, params.median_radius, dist)
    if median is not None:
        accepted = _members(dist, median, 2.0 * params.median_radius)
        if len(accepted) >= params.min_accepted:
            return FilterOutcome(accepted, median, RULE1, exact_mean(vectors, accepted))

    median = select_median(vectors, 2.0 * params.V, dist)
    if median is None:
        raise HonestMajorityViolated(
            f"no report has more than {K}/2 reports within 2V = {2.0 * params.V:g}"
        )
    accepted = _members(dist, median, 4.0 * params.V)
    return FilterOutcome(accepted, median, RULE2, exact_mean(vectors, accepted))


def naive_mean(vectors):
    """Unfiltered baseline: average every report."""
    vectors = np.asarray(vectors, dtype=float)
    K = vectors.shape[0]
    everyone = frozenset(range(K))
    return FilterOutcome(everyone, 0, "none", exact_mean(vectors, everyone))
