"""Citation-trend prediction on causally masked citation graphs.

The package trains a graph attention network on the prior side of a
year-based split and predicts which freshly published papers end up in the
top citation percentile, against a parameter-matched multilayer perceptron
and a logistic regression over the same features.
"""

from .errors import CitetrendError
from .graph import (AnticausalEdge, CitationGraph, DocumentNode,
                    DuplicateEdge, EmptyTargetYear, GraphError, SelfCitation,
                    TrendLabels, UnknownEndpoint, YearSplit, build_graph,
                    label_by_percentile, nearest_rank_threshold,
                    split_by_year)
from .features import (EmptyCorpus, FeatureError, FeatureSet, Vocabulary,
                       YearOutOfWindow, build_features, encode_affiliations,
                       encode_year, fit_vocabulary, tokenize,
                       transform_tfidf)
from .autodiff import (AutodiffError, EmptySoftmaxRow, NotScalarLoss,
                       ShapeMismatch, Tape, Tensor)
from .optim import AdamState, adam_step
from .models import (CacheShapeMismatch, CausalityViolation, CheckpointError,
                     LogisticModel, MlpBaseline, ModelConfig, ModelError,
                     ParityError, PriorCache, TrendModel, UnknownCitedNode,
                     build_edge_plan, build_model, build_neighborhoods,
                     count_parameters, gat_parameter_total, load_checkpoint,
                     map_gat_weights_to_mlp, prepare_inputs, save_checkpoint,
                     solve_mlp_widths)
from .experiments import (AblationCurve, AblationPoint, Divergence,
                          EmptyEvaluationSet, EvalReport, ExperimentError,
                          TrainConfig, TrainResult, ablate_edges,
                          ablation_csv, compare_models, eval_report_csv,
                          evaluate, lambda_predictivity, run_model, train)
from .data import (DataError, ManifestMismatch, ParseError, SyntheticConfig,
                   bundle_corpus, bundle_presets, generate_synthetic,
                   load_bundle, save_bundle)

__version__ = "0.1.0"

__all__ = [
    "AblationCurve", "AblationPoint", "AdamState", "AnticausalEdge",
    "AutodiffError", "CacheShapeMismatch", "CausalityViolation",
    "CheckpointError", "CitationGraph", "CitetrendError", "DataError",
    "Divergence", "DocumentNode", "DuplicateEdge", "EmptyCorpus",
    "EmptyEvaluationSet", "EmptySoftmaxRow", "EmptyTargetYear", "EvalReport",
    "ExperimentError", "FeatureError", "FeatureSet", "GraphError",
    "LogisticModel", "ManifestMismatch", "MlpBaseline", "ModelConfig",
    "ModelError", "NotScalarLoss", "ParityError", "ParseError", "PriorCache",
    "SelfCitation", "ShapeMismatch", "SyntheticConfig", "Tape", "Tensor",
    "TrainConfig", "TrainResult", "TrendLabels", "TrendModel",
    "UnknownCitedNode", "UnknownEndpoint", "Vocabulary", "YearOutOfWindow",
    "YearSplit", "adam_step", "ablate_edges", "ablation_csv",
    "build_edge_plan", "build_features", "build_graph", "build_model",
    "build_neighborhoods", "bundle_corpus", "bundle_presets",
    "compare_models", "count_parameters",
    "encode_affiliations", "encode_year", "eval_report_csv", "evaluate",
    "fit_vocabulary", "gat_parameter_total", "generate_synthetic",
    "label_by_percentile", "lambda_predictivity", "load_bundle",
    "load_checkpoint", "map_gat_weights_to_mlp", "nearest_rank_threshold",
    "prepare_inputs", "run_model", "save_bundle", "save_checkpoint",
    "solve_mlp_widths", "split_by_year", "tokenize", "train",
    "transform_tfidf",
]
