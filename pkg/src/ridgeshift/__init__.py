"""Regularization-parameter selection for ridge classifiers under covariate
shift: shifted-problem generation, four importance-weight estimators,
importance-weighted cross-validation, and reproducible benchmark tables."""

from .config import ExperimentConfig, build_config, read_config_file
from .data import (
    LabeledDataset,
    PreprocessReport,
    SplitPlan,
    load_uci_heart,
    make_holdout_plan,
    make_split_plan,
    preprocess,
)
from .errors import (
    ConfigurationError,
    DegenerateDataError,
    EstimationFailureError,
    InfeasibleConstraintsError,
    ParseError,
    RidgeshiftError,
    SelectionError,
    SingularSystemError,
)
from .experiments import (
    CellStats,
    ResultTable,
    emit_mse_curves,
    emit_table,
    run_artificial,
    run_heart,
    write_manifest,
)
from .ridge import (
    RidgePath,
    SvdSpectrum,
    fit_ridge,
    mse,
    svd_spectrum,
    weighted_mse,
    weighted_ridge_minimizer,
)
from .select import (
    SelectionResult,
    cv_select,
    cv_select_multi,
    exponential_lambda_grid,
    make_lambda_grid,
    target_select,
)
from .shift import (
    DomainPair,
    GaussianMixture,
    GaussianSpec,
    ShiftProblem,
    identity_shift_problem,
    sample_domain_pair,
    sample_source,
    sample_target,
    source_posterior,
    target_conditional_density,
    true_importance_weights,
    variance_shift_problem,
)
from .weights import (
    KliepConfig,
    KmmConfig,
    estimate_kliep,
    estimate_kmm,
    estimate_nn,
    estimate_rg,
    gaussian_kernel,
    silverman_bandwidth,
    solve_box_sum_qp,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
