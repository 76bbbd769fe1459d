"""One-class SVM anomaly screening for wide wafer-test matrices."""

from .data import (
    ColumnView,
    DataMatrix,
    IngestOptions,
    Label,
    LabelSet,
    column,
    load_csv,
    load_labels,
    restrict,
    save_csv,
    save_labels,
)
from .errorbars import (
    ErrorBarCalibration,
    GreyZoneReport,
    PerturbationResult,
    ensemble_experiment,
    grey_zone,
    perturb_decision,
)
from .harness import (
    DEFAULT_SPEC,
    EvalRow,
    EvalTable,
    GenerationMeta,
    SyntheticSpec,
    evaluate,
    generate,
    run_pipeline,
    select_features,
)
from .multivariate import (
    AUTO,
    MedoidClustering,
    RfeConfig,
    RfeTrace,
    fuse_detections_combined,
    fuse_feature_sets_both,
    kmedoids,
    rank_cluster_diagnostic,
    rfe,
    rfe_kmedoid,
)
from .ocsvm import (
    LINEAR,
    RBF,
    KernelSpec,
    OcSvmModel,
    SolverReport,
    decision,
    decision_matrix,
    default_gamma,
    kernel_eval,
    kernel_grad,
    load_model,
    primal_weights,
    rfe_criteria,
    rfe_criterion,
    save_model,
    train,
)
from .univariate import (
    Binning,
    FeatureRanking,
    MadeStats,
    entropy,
    made_stats,
    make_binning,
    rank_by_entropy,
    rank_by_made,
    select_top,
)

__version__ = "0.1.0"
