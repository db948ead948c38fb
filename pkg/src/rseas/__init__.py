"""Seasonal adjustment with the airline model under Gaussian and heavy-tailed noise."""

from .airline import EstimationError, OptimizerSettings, fit_gaussian, profile_sigma2
from .canonical import (
    DecompositionError,
    InadmissibleError,
    airline_pseudo_spectrum,
    canonicalize,
    decompose,
    partial_fraction_split,
    spectral_factorize,
)
from .heavy import (
    ApproximationError,
    ImportanceSample,
    ImportanceSamplingError,
    approximate_gaussian_model,
    extract_components_heavy,
    fit_heavy,
    is_loglik,
    mixture_log_density,
    t_log_density,
)
from .outliers import Outlier, OutlierSet, adjust_for_outliers, detect_outliers
from .selection import (
    CriteriaRow,
    KurtosisResult,
    SelectionReport,
    StabilityReport,
    information_criteria,
    kurtosis_statistic,
    kurtosis_test,
    select_model,
    stability_diff,
)
from .series import (
    AirlineParams,
    CanonicalDecomposition,
    ComponentEstimates,
    FitResult,
    HeavyTailSpec,
    SeriesError,
    TimeSeries,
    airline_difference,
    log_transform,
)
from .simulate import (
    ExperimentConfig,
    SimpleNoiseModel,
    experiment_aic,
    experiment_kurtosis,
    gen_airline,
    inject_outliers,
)
from .statespace import (
    NumericalError,
    StateSpaceModel,
    build_decomposition_ss,
    kalman_loglik,
    simulation_smoother,
    smooth,
)

__version__ = "0.1.0"
