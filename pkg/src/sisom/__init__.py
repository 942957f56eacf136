"""SISOM / SISOMe: gradient-weighted multi-layer feature distances for active
learning and out-of-distribution detection."""

__version__ = "0.1.0"

from .comparison import ComparisonSet, build as build_comparison_set, reduce as reduce_comparison_set
from .features import EnhancedFeatures, SteepnessConfig, concat_features, embed, enhance
from .nn import MlpModel, forward, grad_wrt_captured, init_model, load_model, save_model, train
from .ood import auroc, decide, fpr_at_95tpr, run_benchmark
from .scoring import (ScoreBundle, class_distances, energy_score, fuse, ood_score, score_batch,
                      separability, sisom_score)
from .steepness import SteepnessSearchSpace, optimize as optimize_steepness
