"""Loss, reverse-mode gradients, Adam, and the k-fold training loop.

The batch gradient is the sum of per-record gradients accumulated in
record order, so results are bit-reproducible regardless of how a batch
might be parallelized. Loss reduction defaults to a plain sum over the
batch (a mean switch is exposed for the conventional scaling).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor
from .corpus import Corpus, ImageRecord, make_splits
from .errors import ConfigError, NumericError
from .model import (PARAM_ORDER, ModelParams, assemble_info,
                    build_forward_graph, forward)
from .prior import AdjacencyPrior, build_prior
from .metrics import EvalReport, evaluate

__all__ = [
    "LossValue", "TrainConfig", "AdamState", "LogEntry", "TrainResult",
    "loss", "backward", "adam_step", "fit_single", "train",
    "predict_labels", "write_log_csv", "gradient_check", "GradCheckReport",
]

PROB_CLAMP = 1e-12


@dataclass(frozen=True)
class LossValue:
    """Cross-entropy total for one batch."""

    value: float
    batch_size: int


@dataclass
class TrainConfig:
    """Hyperparameters for optimization and cross-validation."""

    epochs: int = 50
    batch_size: int = 64
    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    n_folds: int = 3
    test_fraction: float = 0.0
    seed: int = 0
    rounds: int = 3
    hidden_units: int = 32
    attn_dim: int = 4
    prior_kind: str = "cooccurrence"
    loss_reduction: str = "sum"
    use_scene: bool = True
    use_cardinality: bool = True

    def validate(self) -> None:
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be > 0")
        if self.loss_reduction not in ("sum", "mean"):
            raise ConfigError("loss_reduction must be 'sum' or 'mean'")
        if not (self.use_scene or self.use_cardinality):
            raise ConfigError("at least one feature channel must be enabled")


def loss(probs_batch, labels, reduction: str = "sum") -> LossValue:
    """Binary cross-entropy over predicted private-class probabilities.

    Probabilities are clamped to [1e-12, 1 - 1e-12] before the log.
    """
    if len(probs_batch) != len(labels):
        raise ConfigError("probs and labels must have equal length")
    if not len(labels):
        raise ConfigError("empty batch")
    total = 0.0
    for probs, y in zip(probs_batch, labels):
        p = float(np.clip(probs[1], PROB_CLAMP, 1.0 - PROB_CLAMP))
        total += -np.log(p) if y == 1 else -np.log(1.0 - p)
    if reduction == "mean":
        total /= len(labels)
    return LossValue(value=float(total), batch_size=len(labels))


def _record_loss_graph(record: ImageRecord, prior: AdjacencyPrior,
                       pt: dict[str, Tensor], params: ModelParams, label: int,
                       use_scene: bool, use_cardinality: bool) -> Tensor:
    info = assemble_info(record, params.k, use_scene=use_scene,
                         use_cardinality=use_cardinality)
    _, _, _, _, _, probs = build_forward_graph(
        info.c, prior.matrix, pt, params.rounds, params.attn_dim)
    p = probs.reshape((2,))[1].clip(PROB_CLAMP, 1.0 - PROB_CLAMP)
    return -(p.log()) if label == 1 else -((1.0 - p).log())


def backward(records, prior: AdjacencyPrior, params: ModelParams, labels,
             use_scene: bool = True, use_cardinality: bool = True,
             reduction: str = "sum") -> tuple[LossValue, dict[str, np.ndarray]]:
    """Loss and its exact gradient w.r.t. every parameter tensor.

    Each record gets its own tape; per-record gradients are summed in
    record order.
    """
    if not len(records):
        raise ConfigError("empty batch")
    params.validate()
    grads = {name: np.zeros_like(params.tensors[name]) for name in PARAM_ORDER}
    total = 0.0
    for record, label in zip(records, labels):
        pt = {name: Tensor(params.tensors[name]) for name in PARAM_ORDER}
        loss_t = _record_loss_graph(record, prior, pt, params, int(label),
                                    use_scene, use_cardinality)
        loss_t.backward()
        total += float(loss_t.data)
        for name in PARAM_ORDER:
            if pt[name].grad is not None:
                grads[name] += pt[name].grad
    if reduction == "mean":
        total /= len(records)
        for name in PARAM_ORDER:
            grads[name] /= len(records)
    for name in PARAM_ORDER:
        if not np.isfinite(grads[name]).all():
            raise NumericError(f"non-finite gradient in tensor {name}")
    return LossValue(value=total, batch_size=len(records)), grads


@dataclass
class AdamState:
    """First/second moment accumulators, keyed like the parameters."""

    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def zeros_like(cls, tensors: dict[str, np.ndarray]) -> "AdamState":
        return cls(m={n: np.zeros_like(a) for n, a in tensors.items()},
                   v={n: np.zeros_like(a) for n, a in tensors.items()})


def adam_step(tensors: dict[str, np.ndarray], grads: dict[str, np.ndarray],
              state: AdamState, t: int, cfg: TrainConfig
              ) -> tuple[dict[str, np.ndarray], AdamState]:
    """One bias-corrected Adam update, in place; t is the 1-based step."""
    if t < 1:
        raise ConfigError("Adam step index starts at 1")
    b1, b2 = cfg.beta1, cfg.beta2
    for name, g in grads.items():
        state.m[name] = b1 * state.m[name] + (1.0 - b1) * g
        state.v[name] = b2 * state.v[name] + (1.0 - b2) * g * g
        m_hat = state.m[name] / (1.0 - b1 ** t)
        v_hat = state.v[name] / (1.0 - b2 ** t)
        tensors[name] -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.adam_eps)
    return tensors, state


@dataclass(frozen=True)
class LogEntry:
    epoch: int
    fold: int
    train_loss: float
    val_uba: float
    val_f1_public: float
    val_f1_private: float
    val_uf1: float
    seconds: float

    def deterministic_fields(self) -> tuple:
        # everything except wall-clock time
        return (self.epoch, self.fold, self.train_loss, self.val_uba,
                self.val_f1_public, self.val_f1_private, self.val_uf1)


@dataclass
class TrainResult:
    checkpoints: list[ModelParams]
    log: list[LogEntry]
    split: object
    priors: list[AdjacencyPrior]


def predict_labels(records, prior: AdjacencyPrior, params: ModelParams,
                   use_scene: bool = True, use_cardinality: bool = True
                   ) -> np.ndarray:
    """Argmax class per record (ties resolve to public)."""
    out = np.empty(len(records), dtype=np.int64)
    for i, rec in enumerate(records):
        trace = forward(rec, prior, params, use_scene=use_scene,
                        use_cardinality=use_cardinality)
        out[i] = int(np.argmax(trace.probs))
    return out


def _epoch_order(ids: list[str], seed: int, epoch: int) -> list[str]:
    rng = np.random.default_rng(seed ^ epoch)
    order = list(ids)
    rng.shuffle(order)
    return order


def fit_single(records: list[ImageRecord], prior: AdjacencyPrior,
               cfg: TrainConfig, k: int, init_seed: int,
               val_records: list[ImageRecord] | None = None,
               fold: int = 0) -> tuple[ModelParams, ModelParams, list[LogEntry]]:
    """Optimize on one record list; returns (final, best-by-val-uf1, log).

    Without validation records the final parameters double as best.
    Shuffling reseeds per epoch from cfg.seed XOR the epoch index.
    """
    cfg.validate()
    params = ModelParams.init(k, rounds=cfg.rounds, hidden_units=cfg.hidden_units,
                              attn_dim=cfg.attn_dim, seed=init_seed)
    state = AdamState.zeros_like(params.tensors)
    by_id = {r.id: r for r in records}
    ids = [r.id for r in records]
    log: list[LogEntry] = []
    best = params.copy()
    best_uf1 = -1.0
    step = 0
    for epoch in range(1, cfg.epochs + 1):
        started = time.perf_counter()
        order = _epoch_order(ids, cfg.seed, epoch)
        epoch_loss = 0.0
        for lo in range(0, len(order), cfg.batch_size):
            batch = [by_id[i] for i in order[lo:lo + cfg.batch_size]]
            labels = [r.label for r in batch]
            try:
                loss_val, grads = backward(
                    batch, prior, params, labels,
                    use_scene=cfg.use_scene, use_cardinality=cfg.use_cardinality,
                    reduction=cfg.loss_reduction)
            except NumericError as exc:
                raise NumericError(
                    f"epoch {epoch}, batch {lo // cfg.batch_size}: {exc}") from exc
            if not np.isfinite(loss_val.value):
                raise NumericError(
                    f"divergence at epoch {epoch}, batch {lo // cfg.batch_size}")
            epoch_loss += loss_val.value * (loss_val.batch_size
                                            if cfg.loss_reduction == "mean" else 1.0)
            step += 1
            adam_step(params.tensors, grads, state, step, cfg)
        if cfg.loss_reduction == "mean":
            epoch_loss /= len(order)
        if val_records is not None:
            preds = predict_labels(val_records, prior, params,
                                   use_scene=cfg.use_scene,
                                   use_cardinality=cfg.use_cardinality)
            report = evaluate(preds, [r.label for r in val_records])
            if report.uf1 > best_uf1:
                best_uf1 = report.uf1
                best = params.copy()
            entry = LogEntry(epoch=epoch, fold=fold, train_loss=epoch_loss,
                             val_uba=report.uba, val_f1_public=report.f1_public,
                             val_f1_private=report.f1_private, val_uf1=report.uf1,
                             seconds=time.perf_counter() - started)
        else:
            entry = LogEntry(epoch=epoch, fold=fold, train_loss=epoch_loss,
                             val_uba=float("nan"), val_f1_public=float("nan"),
                             val_f1_private=float("nan"), val_uf1=float("nan"),
                             seconds=time.perf_counter() - started)
        log.append(entry)
    if val_records is None:
        best = params.copy()
    return params, best, log


def train(corpus: Corpus, cfg: TrainConfig) -> TrainResult:
    """Stratified k-fold training; keeps each fold's best-val-UF1 epoch.

    Corpus-derived priors are rebuilt per fold from that fold's training
    records only, so validation and test records never leak into the
    prior.
    """
    cfg.validate()
    split = make_splits(corpus, cfg.n_folds, cfg.test_fraction, cfg.seed)
    checkpoints: list[ModelParams] = []
    priors: list[AdjacencyPrior] = []
    log: list[LogEntry] = []
    for fold, (train_ids, val_ids) in enumerate(split.folds):
        train_records = corpus.subset(train_ids).records
        val_records = corpus.subset(val_ids).records
        prior = build_prior(cfg.prior_kind, corpus.subset(train_ids),
                            seed=cfg.seed)
        _, best, fold_log = fit_single(train_records, prior, cfg, corpus.k,
                                       init_seed=cfg.seed + fold,
                                       val_records=val_records, fold=fold)
        checkpoints.append(best)
        priors.append(prior)
        log.extend(fold_log)
    return TrainResult(checkpoints=checkpoints, log=log, split=split,
                       priors=priors)


LOG_COLUMNS = ("epoch", "fold", "train_loss", "val_uba", "val_f1_public",
               "val_f1_private", "val_uf1", "seconds")


def write_log_csv(log: list[LogEntry], path) -> None:
    """Full-precision CSV; the seconds column is wall time and is the one
    field excluded from the bit-reproducibility contract."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(LOG_COLUMNS) + "\n")
        for e in log:
            fh.write(f"{e.epoch},{e.fold},{e.train_loss!r},{e.val_uba!r},"
                     f"{e.val_f1_public!r},{e.val_f1_private!r},{e.val_uf1!r},"
                     f"{e.seconds:.3f}\n")


# ---------------------------------------------------------------------------
# Gradient checking

@dataclass
class GradCheckReport:
    max_rel_error: float
    worst_tensor: str
    per_tensor: dict[str, float]
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_rel_error <= self.tolerance


def _gradcheck_fixture(k: int, batch: int, seed: int):
    rng = np.random.default_rng(seed)
    records = []
    labels = []
    for i in range(batch):
        label = i % 2
        objects = {}
        for cat in rng.choice(k, size=min(2, k), replace=False):
            objects[int(cat)] = int(rng.integers(1, 4))
        records.append(ImageRecord(
            id=f"g{i}", label=label,
            scene_logits=(float(rng.normal(0, 1.5)), float(rng.normal(0, 1.5))),
            objects=objects))
        labels.append(label)
    prior = AdjacencyPrior(kind="random",
                           matrix=np.random.default_rng(seed + 1).random((k + 2, k + 2)),
                           k=k, seed=seed + 1)
    return records, labels, prior


def gradient_check(k: int = 3, rounds: int = 2, batch: int = 4, seed: int = 0,
                   eps: float = 1e-5, tolerance: float = 1e-5,
                   corrupt: str | None = None) -> GradCheckReport:
    """Compare analytic gradients against central finite differences.

    Relative error uses max(|analytic|, |numeric|, 1e-4) as denominator;
    the floor keeps near-zero entries from amplifying the O(eps^2)
    finite-difference noise.  ``corrupt`` perturbs one tensor's analytic
    gradient (negative-control hook for the CLI).
    """
    records, labels, prior = _gradcheck_fixture(k, batch, seed)
    params = ModelParams.init(k, rounds=rounds, hidden_units=8, attn_dim=3,
                              seed=seed)

    def batch_loss() -> float:
        traces = [forward(r, prior, params) for r in records]
        return loss([t.probs for t in traces], labels).value

    _, grads = backward(records, prior, params, labels)
    if corrupt is not None:
        if corrupt not in grads:
            raise ConfigError(f"unknown tensor {corrupt!r}")
        grads[corrupt] = grads[corrupt] + 1e-3
    per_tensor: dict[str, float] = {}
    for name in PARAM_ORDER:
        arr = params.tensors[name]
        worst = 0.0
        flat = arr.ravel()
        g_flat = grads[name].ravel()
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + eps
            up = batch_loss()
            flat[idx] = orig - eps
            down = batch_loss()
            flat[idx] = orig
            numeric = (up - down) / (2.0 * eps)
            denom = max(abs(g_flat[idx]), abs(numeric), 1e-4)
            worst = max(worst, abs(g_flat[idx] - numeric) / denom)
        per_tensor[name] = worst
    worst_tensor = max(per_tensor, key=per_tensor.get)
    return GradCheckReport(max_rel_error=per_tensor[worst_tensor],
                           worst_tensor=worst_tensor, per_tensor=per_tensor,
                           tolerance=tolerance)
