"""Two-crossover income distribution toolkit.

Stationary law of a threshold Langevin process with additive noise at
the bottom of the income range and Gibrat-type multiplicative noise
above it, in the two-temperature extension of the Yakovenko model:
an exponential Boltzmann-Gibbs regime up to the crossover m0, a weak
Pareto law with exponent alpha between m0 and the threshold m1, and a
second, flatter Pareto tail with exponent alpha1 beyond it.
"""

from .distribution import (
    ModelCCDF,
    bg_ccdf,
    build_model_ccdf,
    model_ccdf,
    model_quantile,
    pareto_ccdf,
    sample,
)
from .empirical import (
    EmpiricalCCDF,
    IncomeSample,
    Source,
    build_ccdf,
    ks_distance,
    local_log_slope,
)
from .errors import NumericsError, ParseError, PreconditionError
from .estimator import ThresholdIncomeModel
from .fitting import (
    CrossoverResult,
    FitReport,
    ParetoFit,
    TemperatureFit,
    detect_crossovers,
    fit_pareto,
    fit_pipeline,
    fit_temperature,
)
from .ingest import (
    ConversionResult,
    LoadResult,
    MergeReport,
    WealthRecord,
    find_scale_factor,
    gap_score,
    incomes_from_wealth,
    load_samples,
    merge,
)
from .model import (
    Branch,
    EffectiveParams,
    MicroParams,
    branch_of,
    diffusion_B,
    drift_A,
    effective_from_micro,
    micro_from_effective,
    stationary_pdf,
    stationary_pdf_quadrature,
    yakovenko_pdf,
)
from .simulate import (
    Boundary,
    SimConfig,
    SimResult,
    StationaryHistogram,
    run,
    step,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "Branch",
    "EffectiveParams",
    "MicroParams",
    "branch_of",
    "drift_A",
    "diffusion_B",
    "micro_from_effective",
    "effective_from_micro",
    "stationary_pdf",
    "stationary_pdf_quadrature",
    "yakovenko_pdf",
    "ModelCCDF",
    "bg_ccdf",
    "pareto_ccdf",
    "build_model_ccdf",
    "model_ccdf",
    "model_quantile",
    "sample",
    "Source",
    "IncomeSample",
    "EmpiricalCCDF",
    "build_ccdf",
    "ks_distance",
    "local_log_slope",
    "WealthRecord",
    "MergeReport",
    "ConversionResult",
    "LoadResult",
    "load_samples",
    "incomes_from_wealth",
    "find_scale_factor",
    "gap_score",
    "merge",
    "CrossoverResult",
    "TemperatureFit",
    "ParetoFit",
    "FitReport",
    "detect_crossovers",
    "fit_temperature",
    "fit_pareto",
    "fit_pipeline",
    "Boundary",
    "SimConfig",
    "StationaryHistogram",
    "SimResult",
    "step",
    "run",
    "ThresholdIncomeModel",
    "ParseError",
    "PreconditionError",
    "NumericsError",
]
