"""High-dimensional max-margin interpolation and boosting: finite-sample
solvers on synthetic data next to the asymptotic fixed-point theory that
predicts their margins, test errors and iteration counts."""

from .boosting import (
    BoostState,
    StepsizeSpec,
    active_features,
    asymptotic_T,
    boost_run,
    certified_T,
)
from .datagen import (
    Dataset,
    FeaturePair,
    default_activation,
    hermite_calibrate,
    make_feature_pair,
    sample_diagonal,
    sample_gmm,
    sample_misspecified,
)
from .fixedpoint import (
    AsymptoticPrediction,
    SystemSolution,
    bayes_error,
    err_star,
    kappa_star,
    prox_l1,
    prox_lq,
    psi_down,
    solve_system,
    system_residuals,
    T_value,
    zeta_omega,
)
from .fkappa import (
    FEval,
    MCCloud,
    NumericalError,
    derivative_check,
    f_kappa,
    f_kappa_gmm_closed,
    make_cloud,
    separability_threshold,
)
from .margin import (
    MarginResult,
    NonSeparableError,
    dual_margin,
    empirical_angle,
    generalization_error,
    max_margin_l1,
    max_margin_lq,
    min_norm_interpolant_l1,
    xi_value,
)
from .spectra import (
    LOGISTIC,
    PURE_NOISE,
    ConfigError,
    DiagonalVariant,
    GmmVariant,
    LinkFunction,
    MisspecifiedVariant,
    ModelConfig,
    SpectralMeasure,
    measure_from_text,
    standard_gaussian_measure,
    validate,
)

__version__ = "0.1.0"
