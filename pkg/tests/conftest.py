import math

import numpy as np
import pytest

from byzsvrg.problems import BoundedNoiseQuadratic, RegularizedLogistic, make_logistic

# four labelled points in the plane
TINY_FEATURES = [[1.0, 0.5], [-0.3, 2.0], [0.7, -1.2], [-1.5, -0.4]]
TINY_LABELS = [1.0, -1.0, 1.0, -1.0]


def logistic_objective_oracle(features, labels, reg, x):
    """Plain-float reimplementation of the logistic objective."""
    total = 0.0
    for a, y in zip(features, labels):
        z = y * sum(ai * xi for ai, xi in zip(a, x))
        total += math.log1p(math.exp(-z)) if z > -30 else -z + math.log1p(math.exp(z))
    penalty = sum(xi * xi / (1.0 + xi * xi) for xi in x)
    return total / len(labels) + reg * penalty


def central_difference(f, x, h=1e-6):
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        g[j] = (f(x + e) - f(x - e)) / (2 * h)
    return g


@pytest.fixture
def tiny_logistic():
    return RegularizedLogistic(TINY_FEATURES, TINY_LABELS, reg=0.1)


@pytest.fixture
def quad10():
    return BoundedNoiseQuadratic(10, noise_radius=1.0)


@pytest.fixture
def logistic_problem():
    return make_logistic(64, 6, reg=0.1, label_noise=0.1, seed=3)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
