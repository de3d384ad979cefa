"""Graph-based image privacy classification.

Builds a prior-knowledge adjacency matrix over object categories, feeds
per-image scene logits and object counts through a gated graph network
with sigmoid-normalized attention, and trains the binary private/public
classifier with exact reverse-mode gradients.
"""

from .corpus import (Corpus, ImageRecord, SplitPlan, load_corpus, make_splits,
                     synth_corpus, write_corpus)
from .errors import (ConfigError, CorpusWarning, DataError, NumericError,
                     ParseError, ValidationError)
from .estimator import GraphPrivacyClassifier
from .metrics import EvalReport, evaluate, f1_from_pr, random_baseline
from .model import (ForwardTrace, InfoMatrix, ModelParams, assemble_info,
                    attend_and_classify, forward, init_graph, load_checkpoint,
                    propagate, save_checkpoint)
from .prior import (AdjacencyPrior, build_class_freq, build_cooccurrence,
                    build_fixed, build_prior, load_prior, save_prior)
from .training import (AdamState, LossValue, TrainConfig, adam_step, backward,
                       fit_single, gradient_check, loss, train)

__version__ = "0.1.0"

__all__ = [
    "Corpus", "ImageRecord", "SplitPlan", "load_corpus", "make_splits",
    "synth_corpus", "write_corpus",
    "ConfigError", "CorpusWarning", "DataError", "NumericError",
    "ParseError", "ValidationError",
    "GraphPrivacyClassifier",
    "EvalReport", "evaluate", "f1_from_pr", "random_baseline",
    "ForwardTrace", "InfoMatrix", "ModelParams", "assemble_info",
    "attend_and_classify", "forward", "init_graph", "load_checkpoint",
    "propagate", "save_checkpoint",
    "AdjacencyPrior", "build_class_freq", "build_cooccurrence", "build_fixed",
    "build_prior", "load_prior", "save_prior",
    "AdamState", "LossValue", "TrainConfig", "adam_step", "backward",
    "fit_single", "gradient_check", "loss", "train",
]
