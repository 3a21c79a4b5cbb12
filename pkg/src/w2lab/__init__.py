"""Numerical laboratory for transport-variance and functional inequalities
on one-dimensional grid diffusions and finite metric spaces."""

from __future__ import annotations

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    DegenerateInputError,
    InvalidDensityError,
    InvalidMeasureError,
    NumericalFailureError,
    W2LabError,
)
from .measures import (
    Centering,
    DensityRatio,
    FunctionalBundle,
    GridMeasure,
    build_grid_measure,
    density_from_positive,
    functionals,
    gaussian_tilt,
    sqrt_centering,
)
from .generator import (
    ConstantsBundle,
    FlowTrace,
    GeneratorMatrix,
    build_generator,
    curvature_lower_bound,
    evolve,
    flow_trace,
    gap_mode,
    lsi_constant,
    model_constants,
    spectral_gap,
)
from .transport import (
    FiniteMetricMeasure,
    LPResult,
    SinkhornResult,
    TransportPlan,
    W2QuantileResult,
    sinkhorn_bracket,
    w2_lp,
    w2_quantile,
)
from .hopflax import (
    GridFunction,
    HopfLaxResult,
    ResidualReport,
    dual_lower_bound,
    hj_residual,
    hopf_lax,
    small_time_error,
)
from .battery import (
    ContractionConstants,
    InequalityReport,
    LyapunovReport,
    LyapunovWitness,
    WeightedPoincareFit,
    best_p,
    check_centralization,
    check_contraction,
    check_decay,
    check_derivative_bound,
    check_interpolation_bound,
    check_lyapunov,
    check_transport_inequalities,
    check_variance_bounds,
    check_w2i_from_lyapunov,
    contraction_constants,
    fit_weighted_poincare,
    w2i_constant,
)
from .suites import RunResult, SuiteConfig, config_from_dict, run_suite

__all__ = [
    "__version__",
    "W2LabError",
    "InvalidMeasureError",
    "InvalidDensityError",
    "DegenerateInputError",
    "ConfigError",
    "NumericalFailureError",
    "GridMeasure",
    "DensityRatio",
    "FunctionalBundle",
    "Centering",
    "build_grid_measure",
    "density_from_positive",
    "gaussian_tilt",
    "functionals",
    "sqrt_centering",
    "GeneratorMatrix",
    "ConstantsBundle",
    "FlowTrace",
    "build_generator",
    "evolve",
    "spectral_gap",
    "gap_mode",
    "curvature_lower_bound",
    "lsi_constant",
    "model_constants",
    "flow_trace",
    "W2QuantileResult",
    "FiniteMetricMeasure",
    "TransportPlan",
    "LPResult",
    "SinkhornResult",
    "w2_quantile",
    "w2_lp",
    "sinkhorn_bracket",
    "GridFunction",
    "HopfLaxResult",
    "ResidualReport",
    "hopf_lax",
    "hj_residual",
    "small_time_error",
    "dual_lower_bound",
    "InequalityReport",
    "ContractionConstants",
    "LyapunovWitness",
    "LyapunovReport",
    "WeightedPoincareFit",
    "best_p",
    "check_variance_bounds",
    "check_interpolation_bound",
    "check_derivative_bound",
    "check_decay",
    "contraction_constants",
    "check_contraction",
    "w2i_constant",
    "check_transport_inequalities",
    "check_centralization",
    "check_lyapunov",
    "fit_weighted_poincare",
    "check_w2i_from_lyapunov",
    "RunResult",
    "SuiteConfig",
    "config_from_dict",
    "run_suite",
]
