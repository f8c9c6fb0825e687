"""Discriminative multiset canonical correlation analysis and its special cases."""
from .classify import SweepResult, evaluate_accuracy, nn_classify, sweep_dimensions
from .dataset import (
    CenteringStats,
    DatasetError,
    FeatureMatrix,
    LabelVector,
    MultisetDataset,
    apply_centering,
    build_indicator_dense,
    center,
    class_sums,
    load_feature_table,
    load_idx,
)
from .family import (
    CouplingPair,
    FitError,
    Fusion,
    FusedFeatures,
    Method,
    MethodSpec,
    ProjectionModel,
    build_coupling,
    fit,
    fuse,
    predicted_dim_bound,
    project,
    serial_fuse,
    transform,
)
from .gev import GevProblem, GevSolution, RegularizationPolicy, oracle_gev, residuals, solve_gev

__version__ = "0.1.0"
