from .base import (
    BracketError,
    CommandError,
    DomainError,
    HyperMismatchError,
    InsufficientSampleError,
    InvalidInputError,
    MOBWError,
    ParseError,
    SchemeError,
    StudyFailureError,
)
from .data import (
    CompetingRisksDataset,
    Complete,
    HybridI,
    HybridII,
    Observation,
    ProgressiveI,
    ProgressiveII,
    TypeI,
    TypeII,
    apply_censoring,
    exposure,
    load_dataset,
    parse_scheme,
    save_dataset,
)
from .distributions import GDParams, MOBWParams, ScaleTriple, WeibullParams, sample_mobw
from .inference import (
    BFHyper,
    CredibleInterval,
    EstimateReport,
    hpd_cri,
    ks_test,
    log_bayes_factor,
    pooled_weibull_fit,
    summarize,
    symmetric_cri,
)
from .samplers import (
    AlphaMethod,
    PriorSpec,
    WeightedSample,
    sample_posterior_restricted,
    sample_posterior_unrestricted,
)
from .simulation import PARAMETER_SETS, StudyConfig, run_study

__all__ = [
    "AlphaMethod",
    "BFHyper",
    "BracketError",
    "CommandError",
    "CompetingRisksDataset",
    "Complete",
    "CredibleInterval",
    "DomainError",
    "EstimateReport",
    "GDParams",
    "HybridI",
    "HybridII",
    "HyperMismatchError",
    "InsufficientSampleError",
    "InvalidInputError",
    "MOBWError",
    "MOBWParams",
    "Observation",
    "PARAMETER_SETS",
    "ParseError",
    "PriorSpec",
    "ProgressiveI",
    "ProgressiveII",
    "ScaleTriple",
    "SchemeError",
    "StudyConfig",
    "StudyFailureError",
    "TypeI",
    "TypeII",
    "WeibullParams",
    "WeightedSample",
    "apply_censoring",
    "exposure",
    "hpd_cri",
    "ks_test",
    "load_dataset",
    "log_bayes_factor",
    "parse_scheme",
    "pooled_weibull_fit",
    "run_study",
    "sample_mobw",
    "sample_posterior_restricted",
    "sample_posterior_unrestricted",
    "save_dataset",
    "summarize",
    "symmetric_cri",
]
