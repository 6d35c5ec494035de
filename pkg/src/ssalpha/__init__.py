"""Split-sample estimation of the stability index of stable distributions."""

from .al_estimator import AlFit, TGrid, al_fit, al_objective, alpha_asymptotic_variance
from .competitors import cached_mqe_table, mqe_estimate
from .exceptions import (
    DegenerateSampleError,
    EstimationError,
    FitError,
    ParameterDomainError,
    TableBuildError,
)
from .split_sample import SplitConfig, SplitEstimate, permutation_count, sse_estimate
from .stable_core import StableParams, alpha_from_sigma, char_function, sample_stable, sigma_from_alpha

__version__ = "0.1.0"
