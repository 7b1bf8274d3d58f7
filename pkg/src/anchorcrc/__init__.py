"""Case-count estimation from an anchor stream plus a random-sample stream,
with correction for imperfect diagnostic tests."""

from .bayes import (
    CredibleInterval,
    IntervalSource,
    crc_credible_interval,
    crc_posterior_draws,
    narrower_of,
    rs_comparator_interval,
)
from .core import (
    CRCError,
    CellCounts,
    DegenerateDraws,
    DesignParams,
    EmptySubgroup,
    EstimateReport,
    EstimatorTag,
    ImputationFailed,
    NonPositiveYouden,
    OptimizerFailed,
    RandomSampleData,
    SampleTooSmall,
    TestAccuracy,
    TotalMismatch,
    UnsupportedFormat,
    ValidationCounts,
)
from .estimators import (
    crc_closed_form,
    crc_variances,
    prevalence_components,
    rs_estimate,
    threshold_prevalence,
)
from .likelihood import ModelParams, cell_probabilities, fit_mle, log_likelihood
from .mi import MiConfig, MiResult, mi_estimate, rubin_pool
from .simulation import SimulationConfig, emit_table, run_scenario
from .stochastic import DEFAULT_SEED, SeedStream

__all__ = [
    "CRCError", "CellCounts", "CredibleInterval", "DEFAULT_SEED", "DegenerateDraws",
    "DesignParams", "EmptySubgroup", "EstimateReport", "EstimatorTag", "ImputationFailed",
    "IntervalSource", "MiConfig", "MiResult", "ModelParams", "NonPositiveYouden",
    "OptimizerFailed", "RandomSampleData", "SampleTooSmall", "SeedStream", "SimulationConfig",
    "TestAccuracy", "TotalMismatch", "UnsupportedFormat", "ValidationCounts",
    "cell_probabilities", "crc_closed_form", "crc_credible_interval", "crc_posterior_draws",
    "crc_variances", "emit_table", "fit_mle", "log_likelihood", "mi_estimate", "narrower_of",
    "prevalence_components", "rs_comparator_interval", "rs_estimate", "rubin_pool",
    "run_scenario", "threshold_prevalence",
]
