"""Scikit-learn style estimator wrapping the graph privacy classifier.

Feature matrix convention: X has shape (n_samples, 2 + K). Columns 0 and
1 are the two scene logits; column 2 + c is the detection count of object
category c. This is the dense equivalent of one corpus record per row,
so the estimator composes with model selection utilities
(cross_val_score, GridSearchCV, clone) while the lower-level modules keep
the record-oriented API.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import NotFittedError
from sklearn.utils.validation import check_array, check_X_y

from .corpus import Corpus, ImageRecord
from .errors import ConfigError
from .model import forward
from .prior import build_prior
from .training import TrainConfig, fit_single

__all__ = ["GraphPrivacyClassifier", "records_to_matrix", "matrix_to_records"]


def records_to_matrix(records, k: int) -> np.ndarray:
    """Stack records into the (n, 2 + K) feature-matrix convention."""
    x = np.zeros((len(records), 2 + k))
    for i, rec in enumerate(records):
        x[i, 0], x[i, 1] = rec.scene_logits
        x[i, 2:] = rec.cardinality_vector(k)
    return x


def matrix_to_records(x: np.ndarray, labels=None, prefix: str = "x") -> list[ImageRecord]:
    """Rows back to records; count columns must hold nonnegative integers."""
    counts = x[:, 2:]
    if counts.size and (np.any(counts < 0)
                        or np.any(np.abs(counts - np.round(counts)) > 1e-9)):
        raise ConfigError("count columns (2..) must be nonnegative integers")
    records = []
    for i, row in enumerate(x):
        objects = {int(c): int(round(v))
                   for c, v in enumerate(row[2:]) if round(v) >= 1}
        label = int(labels[i]) if labels is not None else 0
        records.append(ImageRecord(id=f"{prefix}{i}", label=label,
                                   scene_logits=(float(row[0]), float(row[1])),
                                   objects=objects))
    return records


class GraphPrivacyClassifier(ClassifierMixin, BaseEstimator):
    """Gated graph network over scene logits and object counts.

    Parameters mirror the training configuration: the prior adjacency is
    rebuilt from the fitted data (for the corpus-derived kinds), the node
    states run ``rounds`` GRU iterations, and the attention-weighted
    states feed a two-layer softmax head trained with Adam.
    """

    def __init__(self, prior_kind: str = "cooccurrence", rounds: int = 3,
                 hidden_units: int = 32, attn_dim: int = 4, epochs: int = 50,
                 batch_size: int = 64, learning_rate: float = 1e-4,
                 loss_reduction: str = "sum", use_scene: bool = True,
                 use_cardinality: bool = True, random_state: int = 0):
        self.prior_kind = prior_kind
        self.rounds = rounds
        self.hidden_units = hidden_units
        self.attn_dim = attn_dim
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.loss_reduction = loss_reduction
        self.use_scene = use_scene
        self.use_cardinality = use_cardinality
        self.random_state = random_state

    def _config(self) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs, batch_size=self.batch_size,
            learning_rate=self.learning_rate, seed=self.random_state,
            rounds=self.rounds, hidden_units=self.hidden_units,
            attn_dim=self.attn_dim, prior_kind=self.prior_kind,
            loss_reduction=self.loss_reduction, use_scene=self.use_scene,
            use_cardinality=self.use_cardinality)

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        if X.shape[1] < 3:
            raise ValueError("X needs at least 3 columns: two scene logits "
                             "plus one count column")
        self.classes_, y01 = np.unique(y, return_inverse=True)
        if len(self.classes_) != 2:
            raise ValueError(f"expected exactly 2 classes, got "
                             f"{len(self.classes_)}")
        k = X.shape[1] - 2
        records = matrix_to_records(X, labels=y01)
        corpus = Corpus(records, k=k)
        cfg = self._config()
        cfg.validate()
        prior = build_prior(self.prior_kind, corpus, seed=self.random_state)
        params, _, log = fit_single(records, prior, cfg, k,
                                    init_seed=self.random_state)
        self.n_features_in_ = X.shape[1]
        self.k_ = k
        self.prior_ = prior
        self.params_ = params
        self.train_log_ = log
        return self

    def _check_fitted(self):
        if not hasattr(self, "params_"):
            raise NotFittedError("fit must be called before predicting")

    def predict_proba(self, X) -> np.ndarray:
        self._check_fitted()
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features; expected "
                             f"{self.n_features_in_}")
        records = matrix_to_records(X)
        out = np.empty((len(records), 2))
        for i, rec in enumerate(records):
            trace = forward(rec, self.prior_, self.params_,
                            use_scene=self.use_scene,
                            use_cardinality=self.use_cardinality)
            out[i] = trace.probs
        return out

    def predict(self, X) -> np.ndarray:
        probs = self.predict_proba(X)
        return self.classes_[np.argmax(probs, axis=1)]
