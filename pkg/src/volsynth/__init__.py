"""volsynth: stochastic-volatility estimation for daily return series and
generalized synthetic control for policy effects on monthly volatility panels."""

__version__ = "0.1.0"

from .dataio import (
    PanelData,
    TreatmentReport,
    assemble_panel,
    compound_to_monthly,
    compute_inflation_differential,
    compute_ird,
    load_panel,
    replace_treatment,
    subset_units,
    truncate_periods,
    validate_treatment,
)
from .diagnostics import (
    EquivalenceResult,
    FactorExport,
    PlaceboEntry,
    PlaceboReport,
    compile_placebo_report,
    equivalence_test,
    export_factors,
    in_space_placebo,
    in_time_placebo,
)
from .errors import ConfigError, ConvergenceError, DataError, NumericalError, VolsynthError
from .factor import (
    CvRow,
    CvTable,
    FactorModel,
    TreatedProjection,
    cross_validate,
    fit_ife,
    fit_twoway,
    project_loadings,
    project_treated,
    select_r,
)
from .gsc import (
    AttResult,
    GscConfig,
    bootstrap_inference,
    estimate_att,
    estimate_counterfactual,
    estimate_per_unit,
)
from .simulate import simulate_panel
from .sv import (
    SvConfig,
    SvParams,
    SvPosterior,
    SvPriors,
    aggregate_monthly,
    estimate_sv,
    filter_volatility,
    log_returns_from_prices,
    mean_correct,
    simulate_sv,
)

__all__ = [
    "AttResult",
    "ConfigError",
    "ConvergenceError",
    "CvRow",
    "CvTable",
    "DataError",
    "EquivalenceResult",
    "FactorExport",
    "FactorModel",
    "GscConfig",
    "NumericalError",
    "PanelData",
    "PlaceboEntry",
    "PlaceboReport",
    "SvConfig",
    "SvParams",
    "SvPosterior",
    "SvPriors",
    "TreatedProjection",
    "TreatmentReport",
    "VolsynthError",
    "aggregate_monthly",
    "assemble_panel",
    "bootstrap_inference",
    "compile_placebo_report",
    "compound_to_monthly",
    "compute_inflation_differential",
    "compute_ird",
    "cross_validate",
    "equivalence_test",
    "estimate_att",
    "estimate_counterfactual",
    "estimate_per_unit",
    "estimate_sv",
    "export_factors",
    "filter_volatility",
    "fit_ife",
    "fit_twoway",
    "in_space_placebo",
    "in_time_placebo",
    "load_panel",
    "log_returns_from_prices",
    "mean_correct",
    "project_loadings",
    "project_treated",
    "replace_treatment",
    "select_r",
    "simulate_panel",
    "simulate_sv",
    "subset_units",
    "truncate_periods",
    "validate_treatment",
]
