"""Loss values, exact gradients, Adam, and the training loop contracts."""

import math

import numpy as np
import pytest

from privgraph.corpus import ImageRecord, synth_corpus
from privgraph.errors import ConfigError, NumericError
from privgraph.model import PARAM_ORDER, ModelParams, forward
from privgraph.prior import AdjacencyPrior, build_cooccurrence
from privgraph.training import (AdamState, TrainConfig, adam_step, backward,
                                fit_single, gradient_check, loss,
                                predict_labels, train)

from oracles import central_differences, scalar_adam


def rec(rec_id, label, objects, logits=(0.3, -0.2)):
    return ImageRecord(id=rec_id, label=label, scene_logits=logits,
                       objects=objects)


def random_prior(k, seed=0):
    rng = np.random.default_rng(seed)
    return AdjacencyPrior(kind="random", matrix=rng.random((k + 2, k + 2)),
                          k=k, seed=seed)


class TestLoss:
    def test_uniform_prediction(self):
        assert loss([np.array([0.5, 0.5])], [1]).value == pytest.approx(
            math.log(2), abs=1e-12)

    def test_near_perfect_prediction(self):
        value = loss([np.array([1e-12, 1 - 1e-12])], [1]).value
        assert value == pytest.approx(1e-12, rel=0.2)

    def test_hand_summed_batch(self):
        probs = [np.array([1 - p, p]) for p in (0.9, 0.2, 0.7)]
        got = loss(probs, [1, 0, 1]).value
        assert got == pytest.approx(0.685179, abs=5e-7)
        # independent recomputation
        assert got == pytest.approx(-(math.log(.9) + math.log(.8) + math.log(.7)),
                                    abs=1e-12)

    def test_exact_zero_and_one_are_clamped(self):
        value = loss([np.array([1.0, 0.0])], [1]).value
        assert np.isfinite(value)
        assert value == pytest.approx(-math.log(1e-12))

    def test_duplicating_batch_doubles_loss(self):
        probs = [np.array([0.3, 0.7]), np.array([0.6, 0.4])]
        labels = [1, 0]
        single = loss(probs, labels).value
        double = loss(probs * 2, labels * 2).value
        assert double == pytest.approx(2 * single, abs=1e-12)

    def test_mean_reduction(self):
        probs = [np.array([0.3, 0.7]), np.array([0.6, 0.4])]
        total = loss(probs, [1, 0]).value
        mean = loss(probs, [1, 0], reduction="mean").value
        assert mean == pytest.approx(total / 2, abs=1e-15)

    def test_validation(self):
        with pytest.raises(ConfigError):
            loss([], [])
        with pytest.raises(ConfigError):
            loss([np.array([0.5, 0.5])], [1, 0])


class TestBackward:
    def test_zero_params_head_bias_closed_form(self):
        k = 3
        params = ModelParams.zeros(k)
        records = [rec("a", 1, {0: 1}), rec("b", 0, {1: 2}),
                   rec("c", 1, {2: 1}), rec("d", 0, {})]
        labels = [r.label for r in records]
        _, grads = backward(records, random_prior(k), params, labels)
        # uniform output: d loss / d logits = probs - onehot(y), summed
        expected = sum(np.array([0.5, 0.5]) - np.eye(2)[y] for y in labels)
        assert np.allclose(grads["head.b2"], expected, atol=1e-12)
        assert not grads["head.w2"].any()

    def test_duplicated_record_doubles_contribution(self):
        k = 3
        params = ModelParams.init(k, seed=1)
        prior = random_prior(k)
        single = [rec("a", 1, {0: 1})]
        _, g1 = backward(single, prior, params, [1])
        _, g2 = backward(single * 2, prior, params, [1, 1])
        for name in PARAM_ORDER:
            assert np.allclose(g2[name], 2 * g1[name], atol=1e-14)

    def test_batch_equals_sum_of_records(self):
        k = 3
        params = ModelParams.init(k, seed=5)
        prior = random_prior(k, 2)
        records = [rec("a", 1, {0: 1}), rec("b", 0, {1: 1}),
                   rec("c", 0, {2: 3})]
        labels = [1, 0, 0]
        _, batch = backward(records, prior, params, labels)
        parts = [backward([r], prior, params, [y])[1]
                 for r, y in zip(records, labels)]
        for name in PARAM_ORDER:
            total = parts[0][name] + parts[1][name] + parts[2][name]
            assert np.array_equal(batch[name], total)

    def test_loss_value_matches_forward_loss(self):
        k = 2
        params = ModelParams.init(k, seed=3)
        prior = random_prior(k, 3)
        records = [rec("a", 1, {0: 1}), rec("b", 0, {1: 1})]
        labels = [1, 0]
        via_backward, _ = backward(records, prior, params, labels)
        probs = [forward(r, prior, params).probs for r in records]
        assert via_backward.value == pytest.approx(
            loss(probs, labels).value, abs=1e-12)

    def test_gradient_check_acceptance_instance(self):
        report = gradient_check(k=3, rounds=2, batch=4, seed=0, eps=1e-5)
        assert report.passed, (report.worst_tensor, report.max_rel_error)
        assert report.max_rel_error <= 1e-5

    def test_gradient_check_negative_control(self):
        report = gradient_check(k=3, rounds=2, batch=4, seed=0,
                                corrupt="head.w2")
        assert not report.passed
        assert report.worst_tensor == "head.w2"

    def test_against_independent_finite_differences(self):
        # oracle from tests/oracles.py, not the package's own checker
        k = 2
        params = ModelParams.init(k, rounds=1, hidden_units=4, attn_dim=2,
                                  seed=9)
        prior = random_prior(k, 9)
        records = [rec("a", 1, {0: 2}), rec("b", 0, {1: 1})]
        labels = [1, 0]
        _, grads = backward(records, prior, params, labels)

        def loss_fn():
            probs = [forward(r, prior, params).probs for r in records]
            return loss(probs, labels).value

        for name in ("gru.u_cand", "attn.score", "head.w1"):
            numeric = central_differences(loss_fn, params.tensors[name])
            analytic = grads[name].ravel()
            for a, n in zip(analytic, numeric):
                assert abs(a - n) <= 1e-5 * max(abs(a), abs(n), 1e-4)

    def test_empty_batch(self):
        with pytest.raises(ConfigError):
            backward([], random_prior(3), ModelParams.zeros(3), [])


class TestAdam:
    def test_first_step_magnitude(self):
        cfg = TrainConfig(learning_rate=1e-4)
        tensors = {"w": np.zeros(3)}
        grads = {"w": np.ones(3)}
        state = AdamState.zeros_like(tensors)
        adam_step(tensors, grads, state, t=1, cfg=cfg)
        assert np.allclose(tensors["w"], -1e-4, rtol=1e-6)

    def test_zero_gradient_is_noop(self):
        cfg = TrainConfig()
        tensors = {"w": np.array([1.0, -2.0])}
        state = AdamState.zeros_like(tensors)
        adam_step(tensors, {"w": np.zeros(2)}, state, t=1, cfg=cfg)
        assert np.array_equal(tensors["w"], [1.0, -2.0])

    def test_quadratic_descent_matches_scalar_oracle(self):
        cfg = TrainConfig(learning_rate=0.1)
        tensors = {"x": np.array([1.0])}
        state = AdamState.zeros_like(tensors)
        xs = [1.0]
        for t in range(1, 11):
            grads = {"x": 2.0 * tensors["x"]}
            adam_step(tensors, grads, state, t=t, cfg=cfg)
            xs.append(float(tensors["x"][0]))
        oracle = scalar_adam(lambda x: 2.0 * x, 1.0, lr=0.1, steps=10)
        assert np.allclose(xs, oracle, atol=1e-12)
        assert all(b < a for a, b in zip(xs, xs[1:]))  # monotone toward 0
        assert xs[-1] > -0.5

    def test_step_index_validation(self):
        with pytest.raises(ConfigError):
            adam_step({}, {}, AdamState.zeros_like({}), t=0, cfg=TrainConfig())


class TestTrainLoop:
    def test_epochs_zero_returns_init_and_empty_log(self):
        corpus = synth_corpus(12, 4, seed=2)
        cfg = TrainConfig(epochs=0, n_folds=2, seed=2)
        result = train(corpus, cfg)
        assert result.log == []
        assert len(result.checkpoints) == 2
        init = ModelParams.init(corpus.k, rounds=cfg.rounds,
                                hidden_units=cfg.hidden_units,
                                attn_dim=cfg.attn_dim, seed=cfg.seed)
        for name in PARAM_ORDER:
            assert np.array_equal(result.checkpoints[0].tensors[name],
                                  init.tensors[name])

    def test_deterministic_logs(self):
        corpus = synth_corpus(24, 4, seed=6)
        cfg = TrainConfig(epochs=3, batch_size=8, learning_rate=1e-3,
                          n_folds=2, seed=6)
        a = train(corpus, cfg)
        b = train(corpus, cfg)
        assert [e.deterministic_fields() for e in a.log] == \
            [e.deterministic_fields() for e in b.log]
        for pa, pb in zip(a.checkpoints, b.checkpoints):
            for name in PARAM_ORDER:
                assert np.array_equal(pa.tensors[name], pb.tensors[name])

    def test_loss_decreases_on_separable_data(self):
        corpus = synth_corpus(24, 5, seed=1)
        prior = build_cooccurrence(corpus)
        cfg = TrainConfig(epochs=40, batch_size=8, learning_rate=3e-3, seed=1)
        _, _, log = fit_single(corpus.records, prior, cfg, corpus.k,
                               init_seed=1)
        assert log[-1].train_loss < 0.5 * log[0].train_loss

    def test_best_checkpoint_by_val_uf1(self):
        corpus = synth_corpus(30, 4, seed=3)
        cfg = TrainConfig(epochs=4, batch_size=8, learning_rate=1e-3,
                          n_folds=2, seed=3)
        result = train(corpus, cfg)
        # the stored checkpoint must reproduce the best logged val UF1
        for fold in range(2):
            entries = [e for e in result.log if e.fold == fold]
            best_logged = max(e.val_uf1 for e in entries)
            val_ids = result.split.folds[fold][1]
            val_records = corpus.subset(val_ids).records
            preds = predict_labels(val_records, result.priors[fold],
                                   result.checkpoints[fold])
            from privgraph.metrics import evaluate
            got = evaluate(preds, [r.label for r in val_records]).uf1
            assert got == pytest.approx(best_logged, abs=1e-12)

    def test_divergence_aborts_with_coordinates(self):
        corpus = synth_corpus(8, 3, seed=0)
        ones = AdjacencyPrior(kind="ones", matrix=np.ones((5, 5)), k=3)
        cfg = TrainConfig(epochs=1, batch_size=4, learning_rate=1e-3, seed=0)
        # both scene logits at float max: C @ A overflows to inf
        records = [ImageRecord("x", 1, (1e308, 1e308), {})] + corpus.records
        with np.errstate(invalid="ignore", over="ignore"):
            with pytest.raises(NumericError, match="epoch 1"):
                fit_single(records, ones, cfg, corpus.k, init_seed=0)

    def test_config_validation(self):
        with pytest.raises(ConfigError):
            TrainConfig(epochs=-1).validate()
        with pytest.raises(ConfigError):
            TrainConfig(batch_size=0).validate()
        with pytest.raises(ConfigError):
            TrainConfig(learning_rate=0.0).validate()
        with pytest.raises(ConfigError):
            TrainConfig(use_scene=False, use_cardinality=False).validate()
