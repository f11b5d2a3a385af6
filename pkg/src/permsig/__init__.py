"""Permutation significance testing for feature categories of trained
classifiers: train cross-validated models, permute one category block
across subjects, and derive a p-value for the category from the null
distribution of the accuracy score."""

__version__ = "0.1.0"

from .schema import CategorySchema
from .dataset import (
    CrossSectionalDataset,
    Labels,
    LongitudinalDataset,
    Standardizer,
    SubjectRecord,
    apply_standardizer,
    collapse_cross_sectional,
    derive_labels,
    fit_standardizer,
    load_dataset,
)
from .synth import SynthConfig, generate, ground_truth, uniform_block_schema
from .metrics import ConfusionMatrix, MetricKind, bacc, confusion, evaluate, f1
from .models import (
    GruPredictor,
    MlpPredictor,
    TrainConfig,
    l1_penalty,
    predict,
    predict_proba,
    train,
    weighted_bce,
)
from .crossval import CvRun, FoldAssignment, run_cv, stratified_kfold
from .permeng import (
    CategoryTestResult,
    NullDistribution,
    PermutationPlan,
    null_distribution,
    p_value,
    permute_category,
    test_all_categories,
)
from .analysis import (
    FeatureImportance,
    SpecificityReport,
    SubSchema,
    feature_importance,
    hierarchical_test,
    specificity_study,
)

__all__ = [
    "__version__",
    "CategorySchema",
    "LongitudinalDataset",
    "CrossSectionalDataset",
    "SubjectRecord",
    "Labels",
    "Standardizer",
    "load_dataset",
    "derive_labels",
    "collapse_cross_sectional",
    "fit_standardizer",
    "apply_standardizer",
    "SynthConfig",
    "generate",
    "ground_truth",
    "uniform_block_schema",
    "ConfusionMatrix",
    "MetricKind",
    "confusion",
    "bacc",
    "f1",
    "evaluate",
    "MlpPredictor",
    "GruPredictor",
    "TrainConfig",
    "train",
    "predict",
    "predict_proba",
    "weighted_bce",
    "l1_penalty",
    "CvRun",
    "FoldAssignment",
    "stratified_kfold",
    "run_cv",
    "PermutationPlan",
    "NullDistribution",
    "CategoryTestResult",
    "permute_category",
    "null_distribution",
    "p_value",
    "test_all_categories",
    "SubSchema",
    "SpecificityReport",
    "FeatureImportance",
    "specificity_study",
    "hierarchical_test",
    "feature_importance",
]
