"""Scikit-learn API conformance and ecosystem composition."""

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.model_selection import cross_val_score

from privgraph.corpus import synth_corpus
from privgraph.estimator import (GraphPrivacyClassifier, matrix_to_records,
                                 records_to_matrix)


def synth_xy(n=48, k=5, seed=7, rule="scene_and_objects"):
    corpus = synth_corpus(n, k, rule=rule, seed=seed)
    return records_to_matrix(corpus.records, k), corpus.labels()


def fast_clf(**kw):
    defaults = dict(epochs=40, batch_size=8, learning_rate=3e-3,
                    hidden_units=12, random_state=0)
    defaults.update(kw)
    return GraphPrivacyClassifier(**defaults)


def test_matrix_record_roundtrip():
    corpus = synth_corpus(20, 4, seed=3)
    x = records_to_matrix(corpus.records, 4)
    back = matrix_to_records(x, labels=corpus.labels())
    for orig, rt in zip(corpus.records, back):
        assert rt.scene_logits == orig.scene_logits
        assert rt.objects == orig.objects
        assert rt.label == orig.label


def test_fit_predict_separable():
    x, y = synth_xy()
    clf = fast_clf().fit(x, y)
    assert (clf.predict(x) == y).mean() >= 0.95
    assert list(clf.classes_) == [0, 1]


def test_predict_proba_rows_sum_to_one():
    x, y = synth_xy(n=24)
    clf = fast_clf(epochs=5).fit(x, y)
    probs = clf.predict_proba(x)
    assert probs.shape == (len(x), 2)
    assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-12)


def test_not_fitted_error():
    x, _ = synth_xy(n=12)
    with pytest.raises(NotFittedError):
        GraphPrivacyClassifier().predict(x)


def test_get_params_roundtrip_and_clone():
    clf = GraphPrivacyClassifier(prior_kind="ones", epochs=3, rounds=2,
                                 random_state=5)
    params = clf.get_params()
    assert params["prior_kind"] == "ones" and params["rounds"] == 2
    twin = clone(clf)
    assert twin.get_params() == params


def test_clone_refits_identically():
    x, y = synth_xy(n=24)
    clf = fast_clf(epochs=6)
    a = clf.fit(x, y).predict_proba(x)
    b = clone(clf).fit(x, y).predict_proba(x)
    assert np.array_equal(a, b)


def test_cross_val_score_composes():
    x, y = synth_xy(n=36)
    scores = cross_val_score(fast_clf(epochs=25), x, y, cv=3)
    assert scores.shape == (3,)
    assert scores.mean() >= 0.7


def test_nonbinary_labels_rejected():
    x, _ = synth_xy(n=12)
    with pytest.raises(ValueError):
        GraphPrivacyClassifier(epochs=1).fit(x, np.zeros(len(x)))
    with pytest.raises(ValueError):
        GraphPrivacyClassifier(epochs=1).fit(x, np.arange(len(x)))


def test_arbitrary_binary_labels_map_to_classes():
    x, y = synth_xy(n=24)
    y_str = np.where(y == 1, 5, -5)
    clf = fast_clf(epochs=20).fit(x, y_str)
    assert set(clf.predict(x)) <= {-5, 5}
    assert list(clf.classes_) == [-5, 5]


def test_count_column_validation():
    x, y = synth_xy(n=12)
    x_bad = x.copy()
    x_bad[0, 3] = 0.5
    with pytest.raises(Exception):
        GraphPrivacyClassifier(epochs=1).fit(x_bad, y)


def test_feature_width_checked_at_predict():
    x, y = synth_xy(n=12, k=4)
    clf = fast_clf(epochs=2).fit(x, y)
    with pytest.raises(ValueError):
        clf.predict(x[:, :-1])


def test_prior_kind_is_honored():
    x, y = synth_xy(n=24)
    clf = fast_clf(epochs=2, prior_kind="uniform").fit(x, y)
    assert clf.prior_.kind == "uniform"
    assert clf.prior_.matrix[0, 2] == pytest.approx(1 / clf.k_)
