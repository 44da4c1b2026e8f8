"""Named, independent random streams derived from one root seed.

Every source of randomness in a run gets its own stream keyed by
(purpose, epoch, worker), so e.g. the inner-loop length never shares
state with the inner-loop samples.
"""
from fractions import Fraction

import numpy as np

WORKER = 1
INNER = 2
LENGTH = 3
OUTPUT = 4
BYZANTINE_IDS = 5
TRIAL = 6
ATTACK_DIRECTION = 7


def stream(seed, purpose, *key):
    """Return a fresh Generator for ``(seed, purpose, *key)``."""
    seq = np.random.SeedSequence(int(seed), spawn_key=(int(purpose),) + tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(seq))


def byzantine_ids(K, alpha, seed):
    """Pick floor(alpha*K) Byzantine worker ids, fixed for the whole run."""
    n_byz = max_byzantine(K, alpha)
    if n_byz == 0:
        return frozenset()
    rng = stream(seed, BYZANTINE_IDS)
    return frozenset(int(k) for k in rng.choice(K, size=n_byz, replace=False))


def max_byzantine(K, alpha):
    return int(Fraction(str(alpha)) * K)
