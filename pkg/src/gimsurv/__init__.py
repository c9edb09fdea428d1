"""Plausibility inference for censored lifetime data."""

from .engine import (
    EmpiricalRLDistribution,
    MonteCarloConfig,
    PlausibilityCurve,
    PlausibilityRegion,
    evaluate_cdf,
    marginal_plausibility,
    plausibility_contour,
    plausibility_region,
    relative_likelihood,
    simulate_rl_distribution,
)
from .exceptions import (
    DataFormatError,
    DegenerateConfigurationError,
    DegenerateDataError,
    DomainError,
    GimSurvError,
)
from .km import Atom, StepDistribution, kaplan_meier, reversed_kaplan_meier
from .models import (
    CensoredObservation,
    Family,
    MleResult,
    Side,
    SurvivalDataset,
    fit_mle,
    log_density,
    log_likelihood,
    log_survival,
    sample_event_times,
)

__version__ = "0.1.0"

__all__ = [
    "Atom",
    "CensoredObservation",
    "DataFormatError",
    "DegenerateConfigurationError",
    "DegenerateDataError",
    "DomainError",
    "EmpiricalRLDistribution",
    "Family",
    "GimSurvError",
    "MleResult",
    "MonteCarloConfig",
    "PlausibilityCurve",
    "PlausibilityRegion",
    "Side",
    "StepDistribution",
    "SurvivalDataset",
    "evaluate_cdf",
    "fit_mle",
    "kaplan_meier",
    "log_density",
    "log_likelihood",
    "log_survival",
    "marginal_plausibility",
    "plausibility_contour",
    "plausibility_region",
    "relative_likelihood",
    "reversed_kaplan_meier",
    "sample_event_times",
    "simulate_rl_distribution",
]
