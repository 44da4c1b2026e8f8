"""Stochastic test objectives with exactly known gradients and constants.

Both problems advertise their smoothness constant ``L`` and a hard bound
``V`` on ``||grad f(x; xi) - grad f(x)||``, so the algorithm's assumptions
can be checked rather than hoped for.
"""
import numpy as np

from .errors import ConfigError, ContractViolation


def _as_vector(x, dim):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != dim:
        raise ContractViolation(f"expected a vector of length {dim}, got shape {x.shape}")
    return x


class StochasticProblem:
    """Base class: f(x) = E_xi f(x; xi) on R^d.

    Subclasses implement ``_full_gradient``, ``_objective`` and
    ``_sample_deviations`` (per-sample gradient minus the full gradient).
    """

    kind = None
    dimension: int
    smoothness: float
    deviation_bound: float
    optimum_value_lower_bound: float

    def full_gradient(self, x):
        x = _as_vector(x, self.dimension)
        return self._full_gradient(x)

    def objective_value(self, x):
        x = _as_vector(x, self.dimension)
        return float(self._objective(x))

    def sample_gradient(self, x, rng):
        """Gradient of f(.; xi) at x for one fresh xi."""
        return self.sample_gradients(x, 1, rng)[0]

    def sample_gradients(self, x, n, rng):
        """``n`` iid stochastic gradients at x, shape (n, d)."""
        x = _as_vector(x, self.dimension)
        return self._full_gradient(x) + self._sample_noise(x, n, rng)

    def paired_sample_gradients(self, x, y, rng):
        """Stochastic gradients at x and y sharing the same single xi."""
        x = _as_vector(x, self.dimension)
        y = _as_vector(y, self.dimension)
        return self._paired(x, y, rng)

    def gradient_gap(self, x):
        """f(x) - (lower bound on f*), the optimality gap that enters the rate bound."""
        return self.objective_value(x) - self.optimum_value_lower_bound


class BoundedNoiseQuadratic(StochasticProblem):
    """f(x; xi) = 1/2 ||x - a||^2 + <xi, x>, xi uniform on the radius-V sphere.

    The stochastic gradient deviates from the true one by exactly ``xi``,
    so ``||grad f(x; xi) - grad f(x)|| = V`` for every draw and ``L = 1``.
    """

    kind = "bounded-noise-quadratic"

    def __init__(self, dimension, noise_radius=1.0, center=0.0):
        if int(dimension) < 1:
            raise ConfigError("dimension must be >= 1")
        if noise_radius < 0 or not np.isfinite(noise_radius):
            raise ConfigError("noise radius must be a finite value >= 0")
        self.dimension = int(dimension)
        self.center = np.broadcast_to(np.asarray(center, dtype=float), (self.dimension,)).copy()
        self.center.setflags(write=False)
        self.smoothness = 1.0
        self.deviation_bound = float(noise_radius)
        self.optimum_value_lower_bound = 0.0

    def _full_gradient(self, x):
        return x - self.center

    def _objective(self, x):
        r = x - self.center
        return 0.5 * r @ r

    def _sample_noise(self, x, n, rng):
        return sphere(rng, n, self.dimension, self.deviation_bound)

    def _paired(self, x, y, rng):
        xi = self._sample_noise(x, 1, rng)[0]
        return x - self.center + xi, y - self.center + xi


def sphere(rng, n, d, radius):
    """``n`` points uniform on the radius-``radius`` sphere in R^d."""
    g = rng.standard_normal((n, d))
    if radius == 0:
        return np.zeros((n, d))
    norms = np.linalg.norm(g, axis=1, keepdims=True)
    # a zero normal draw has probability 0; guard anyway
    norms[norms == 0] = 1.0
    return g * (radius / norms)


class RegularizedLogistic(StochasticProblem):
    """Finite-sum logistic loss with a non-convex coordinate regularizer.

    f(x; i) = log(1 + exp(-y_i <a_i, x>)) + lam * sum_j x_j^2 / (1 + x_j^2),
    with i uniform over the m samples.
    """

    kind = "nonconvex-regularized-logistic"

    def __init__(self, features, labels, reg=0.1):
        A = np.array(features, dtype=float)
        y = np.array(labels, dtype=float)
        if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
            raise ConfigError("features must be a non-empty (m, d) array")
        if y.shape != (A.shape[0],) or not np.all(np.abs(y) == 1):
            raise ConfigError("labels must be +/-1 with one label per sample")
        if reg < 0:
            raise ConfigError("regularization weight must be >= 0")
        A.setflags(write=False)
        y.setflags(write=False)
        self.features = A
        self.labels = y
        self.reg = float(reg)
        self.dimension = A.shape[1]
        max_norm = float(np.max(np.linalg.norm(A, axis=1)))
        self.deviation_bound = 2.0 * max_norm
        self.smoothness = 0.25 * max_norm**2 + 2.0 * self.reg
        self.optimum_value_lower_bound = 0.0

    @property
    def n_samples(self):
        return self.features.shape[0]

    def _reg_grad(self, x):
        return self.reg * 2.0 * x / (1.0 + x**2) ** 2

    def _loss_grads(self, x, idx):
        A = self.features[idx]
        y = self.labels[idx]
        margin = y * (A @ x)
        # d/dz log(1 + e^{-z}) = -sigmoid(-z)
        weight = -y * _sigmoid(-margin)
        return weight[:, None] * A

    def per_sample_gradients(self, x):
        """All m per-sample gradients at x, shape (m, d)."""
        x = _as_vector(x, self.dimension)
        return self._loss_grads(x, slice(None)) + self._reg_grad(x)

    def _full_gradient(self, x):
        return self._loss_grads(x, slice(None)).mean(axis=0) + self._reg_grad(x)

    def _objective(self, x):
        margin = self.labels * (self.features @ x)
        return np.mean(np.logaddexp(0.0, -margin)) + self.reg * np.sum(x**2 / (1.0 + x**2))

    def sample_gradients(self, x, n, rng):
        x = _as_vector(x, self.dimension)
        idx = rng.integers(0, self.n_samples, size=n)
        return self._loss_grads(x, idx) + self._reg_grad(x)

    def _sample_noise(self, x, n, rng):
        return self.sample_gradients(x, n, rng) - self._full_gradient(x)

    def _paired(self, x, y, rng):
        i = rng.integers(0, self.n_samples, size=1)
        return (
            self._loss_grads(x, i)[0] + self._reg_grad(x),
            self._loss_grads(y, i)[0] + self._reg_grad(y),
        )


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def make_logistic(n_samples, dimension, reg=0.1, label_noise=0.1, seed=0):
    """Seeded synthetic dataset: Gaussian features, linear labels, flips."""
    if n_samples < 1 or dimension < 1:
        raise ConfigError("logistic problem needs n_samples >= 1 and dimension >= 1")
    if not 0 <= label_noise <= 1:
        raise ConfigError("label_noise must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n_samples, dimension)) / np.sqrt(dimension)
    w = rng.standard_normal(dimension)
    y = np.where(A @ w >= 0, 1.0, -1.0)
    flip = rng.random(n_samples) < label_noise
    y[flip] = -y[flip]
    return RegularizedLogistic(A, y, reg=reg)


PROBLEM_ALIASES = {
    "quadratic": "bounded-noise-quadratic",
    "bounded-noise-quadratic": "bounded-noise-quadratic",
    "logistic": "nonconvex-regularized-logistic",
    "nonconvex-regularized-logistic": "nonconvex-regularized-logistic",
}


def make_problem(kind, dimension, noise=1.0, center=0.0, samples=64, reg=0.1,
                 label_noise=0.1, data_seed=0):
    """Build a built-in problem from flat config values."""
    canonical = PROBLEM_ALIASES.get(kind)
    if canonical == "bounded-noise-quadratic":
        return BoundedNoiseQuadratic(dimension, noise_radius=noise, center=center)
    if canonical == "nonconvex-regularized-logistic":
        return make_logistic(samples, dimension, reg=reg, label_noise=label_noise, seed=data_seed)
    raise ConfigError(f"unknown problem kind {kind!r}; expected one of {sorted(PROBLEM_ALIASES)}")
