"""Mean-field variational Bayes with natural-parameter fixed-point updates."""

from .engine import (
    CAVI,
    PARALLEL_BLR,
    SVI,
    FitTrace,
    ModelSpec,
    NodeState,
    Schedule,
    elbo,
    fit,
    fixed_point_residual,
)
from .expfam import (
    BERNOULLI,
    BETA,
    GAUSSIAN,
    GAUSSIAN_WISHART,
    DomainError,
    ExpectationParam,
    FamilyDescriptor,
    NaturalParam,
    NumericalError,
    entropy,
    kl_divergence,
    log_partition,
    mean_to_nat,
    nat_to_mean,
)

__all__ = [
    "BERNOULLI",
    "BETA",
    "GAUSSIAN",
    "GAUSSIAN_WISHART",
    "CAVI",
    "SVI",
    "PARALLEL_BLR",
    "DomainError",
    "NumericalError",
    "FamilyDescriptor",
    "NaturalParam",
    "ExpectationParam",
    "NodeState",
    "ModelSpec",
    "Schedule",
    "FitTrace",
    "fit",
    "elbo",
    "fixed_point_residual",
    "nat_to_mean",
    "mean_to_nat",
    "log_partition",
    "entropy",
    "kl_divergence",
]
