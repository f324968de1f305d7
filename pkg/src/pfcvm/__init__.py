"""Sparse Bayesian kernel classification with joint feature selection."""

from .data import (
    Dataset,
    gen_sparse_informative,
    gen_waveform,
    load_dense_csv,
    load_sparse_svmlight,
    loocv_splits,
    standardize_columns,
    standardize_rows_then_columns,
    stratified_split,
)
from .diagnostics import (
    BoundInput,
    KLInput,
    generalization_bound,
    kl_feature_divergence,
)
from .errors import (
    DataFormatError,
    DegenerateModelError,
    DegenerateRowError,
    DimensionError,
    DomainError,
    IllConditionedError,
    NumericError,
    PfcvmError,
    UndefinedMetricError,
)
from .experiments import (
    LoocvResult,
    StabilityResult,
    resample_per_class,
    run_loocv,
    run_stability,
)
from .kernels import KernelSpec, basis_matrix, d_matrix, e_matrix, kernel_value
from .metrics import (
    EvalReport,
    SubsetCollection,
    auc,
    cohen_kappa,
    error_rate,
    friedman_cd,
    jaccard_stability,
    pearson_stability,
    selection_frequency,
)
from .model import FittedModel, TrainConfig, fit

__all__ = [
    "BoundInput",
    "DataFormatError",
    "Dataset",
    "DegenerateModelError",
    "DegenerateRowError",
    "DimensionError",
    "DomainError",
    "EvalReport",
    "FittedModel",
    "IllConditionedError",
    "KLInput",
    "KernelSpec",
    "LoocvResult",
    "NumericError",
    "PfcvmError",
    "StabilityResult",
    "SubsetCollection",
    "TrainConfig",
    "UndefinedMetricError",
    "auc",
    "basis_matrix",
    "cohen_kappa",
    "d_matrix",
    "e_matrix",
    "error_rate",
    "fit",
    "friedman_cd",
    "gen_sparse_informative",
    "gen_waveform",
    "generalization_bound",
    "jaccard_stability",
    "kernel_value",
    "kl_feature_divergence",
    "load_dense_csv",
    "load_sparse_svmlight",
    "loocv_splits",
    "pearson_stability",
    "resample_per_class",
    "run_loocv",
    "run_stability",
    "selection_frequency",
    "standardize_columns",
    "standardize_rows_then_columns",
    "stratified_split",
]
