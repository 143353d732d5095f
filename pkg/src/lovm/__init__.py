"""Rank vision-language models and predict their zero-shot accuracy from text.

The workflow: generate captions and synonyms per class (textgen), embed them
with each candidate model (an external encoder writes embedding bundles),
compute text-derived scores per (model, dataset) (scores), then fit and
evaluate the linear accuracy predictor under hold-out protocols (predictor,
benchmark). No images required anywhere in the loop.
"""

from .datastore import (
    EmbeddingBundle,
    EmbeddingMatrix,
    GroundTruthTable,
    ModelId,
    TaskSpec,
    l2_normalize,
    load_bundle,
    load_gt_table,
    load_imagenet_csv,
    write_bundle,
)
from .ensemble import ensemble_class_weights
from .errors import BundleError, LovmError, TableError, TextGenError
from .metrics import kendall_tau_a, mean_abs_error, r_squared, top5_recall, top5_tau
from .predictor import (
    FeatureTable,
    LinearModel,
    ablate_subsets,
    build_feature_table,
    evaluate_subset,
    fit_linear,
    predict,
    predict_performance,
    rank_models,
)
from .scores import (
    ALL_FEATURES,
    NoiseConfig,
    ScoreTable,
    ScoreVector,
    compute_scores,
    load_scores_csv,
    parse_feature_subset,
    score_pair,
    write_scores_csv,
)

__version__ = "0.1.0"

__all__ = [
    "ALL_FEATURES",
    "BundleError",
    "EmbeddingBundle",
    "EmbeddingMatrix",
    "FeatureTable",
    "GroundTruthTable",
    "LinearModel",
    "LovmError",
    "ModelId",
    "NoiseConfig",
    "ScoreTable",
    "ScoreVector",
    "TableError",
    "TaskSpec",
    "TextGenError",
    "ablate_subsets",
    "build_feature_table",
    "compute_scores",
    "ensemble_class_weights",
    "evaluate_subset",
    "fit_linear",
    "kendall_tau_a",
    "l2_normalize",
    "load_bundle",
    "load_gt_table",
    "load_imagenet_csv",
    "load_scores_csv",
    "mean_abs_error",
    "parse_feature_subset",
    "predict",
    "predict_performance",
    "r_squared",
    "rank_models",
    "score_pair",
    "top5_recall",
    "top5_tau",
    "write_bundle",
    "write_scores_csv",
]
