"""Survival analysis for longitudinal establishment panels.

Reconstructs establishment life courses (birth, death, censoring) from
quarterly employment records, estimates nonparametric survival curves with
variance, and compares groups with the logrank test - plus a synthetic
panel generator that serves as the validation oracle.
"""

from .cohorts import (
    BirthEpoch,
    CohortSpec,
    DEFAULT_EPOCHS,
    DEFAULT_SIZE_CLASSES,
    SizeClass,
    birth_death_rate_series,
    industry_report,
    median_diff_table,
    select_cohort,
)
from .errors import EmptyCohortError, EstimationError, IngestError, PanelsurvError
from .ingest import QuarterlyRecord, UniverseFilter, filter_universe, parse_records
from .km import (
    KaplanMeierEstimator,
    MedianLifetime,
    SurvivalCurve,
    conditional_quarterly_rates,
    greenwood_variance,
    km_curve,
    km_estimate,
    median_lifetime,
    survival_at,
)
from .lifecourse import (
    DEFAULT_WINDOW,
    EndReason,
    EstablishmentSpell,
    ObservationWindow,
    TypeCounts,
    apply_ownership_censoring,
    build_spells,
    make_spell,
    read_spells,
    write_spells,
)
from .logrank import (
    LogrankResult,
    PermutationReport,
    logrank,
    logrank_from_arrays,
    permutation_null_check,
)
from .quarters import format_quarter, parse_quarter
from .synth import HazardSpec, PanelSpec, generate_panel, true_survival

__version__ = "0.1.0"

__all__ = [
    "BirthEpoch",
    "CohortSpec",
    "DEFAULT_EPOCHS",
    "DEFAULT_SIZE_CLASSES",
    "DEFAULT_WINDOW",
    "EmptyCohortError",
    "EndReason",
    "EstablishmentSpell",
    "EstimationError",
    "HazardSpec",
    "IngestError",
    "KaplanMeierEstimator",
    "LogrankResult",
    "MedianLifetime",
    "ObservationWindow",
    "PanelSpec",
    "PanelsurvError",
    "PermutationReport",
    "QuarterlyRecord",
    "SizeClass",
    "SurvivalCurve",
    "TypeCounts",
    "UniverseFilter",
    "apply_ownership_censoring",
    "birth_death_rate_series",
    "build_spells",
    "conditional_quarterly_rates",
    "filter_universe",
    "format_quarter",
    "generate_panel",
    "greenwood_variance",
    "industry_report",
    "km_curve",
    "km_estimate",
    "logrank",
    "logrank_from_arrays",
    "make_spell",
    "median_diff_table",
    "median_lifetime",
    "parse_quarter",
    "parse_records",
    "permutation_null_check",
    "read_spells",
    "select_cohort",
    "survival_at",
    "true_survival",
    "write_spells",
]
