"""Byzantine-resilient distributed SVRG/SCSG simulator."""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    ContractViolation,
    HonestMajorityViolated,
    NonFiniteIterate,
)
from .problems import BoundedNoiseQuadratic, RegularizedLogistic, make_problem
from .filtering import FilterParams, FilterOutcome, compute_constants, filter_and_aggregate, select_median
from .tuning import default_step_size, suggest_schedule, rate_bound, validate

__all__ = [
    "__version__",
    "BoundedNoiseQuadratic",
    "ConfigError",
    "ContractViolation",
    "FilterOutcome",
    "FilterParams",
    "HonestMajorityViolated",
    "NonFiniteIterate",
    "RegularizedLogistic",
    "compute_constants",
    "default_step_size",
    "filter_and_aggregate",
    "make_problem",
    "select_median",
    "suggest_schedule",
    "rate_bound",
    "validate",
]
