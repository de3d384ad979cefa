"""Per-image graph construction and the gated message-passing forward pass.

Pipeline for one image:

1. Assemble the 2 x (K+2) information matrix ``C``: row 0 is the scene
   channel (the two scene logits in columns 0 and 1), row 1 the object
   channel (category counts in columns 2..K+1). Each column block is
   active in exactly one row, which is what distinguishes the two kinds
   of information.
2. Initialize node states ``H0 = [C @ A ; C @ A^T]`` (4 x (K+2)) from the
   prior adjacency ``A``.
3. Run ``rounds`` iterations of GRU message passing with weights shared
   across nodes. Messages aggregate over in- and out-edges via
   ``A + A^T``.
4. Score every node pair with a sigmoid-normalized attention coefficient,
   weight each node by the mean of its incoming coefficients, flatten,
   and classify with a two-layer head plus softmax.

All arithmetic is float64 so the gradient checks stay sharp.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor, concat_rows
from .corpus import ImageRecord
from .errors import NumericError, ValidationError
from .prior import NUM_CLASS_NODES, AdjacencyPrior

__all__ = [
    "InfoMatrix", "ModelParams", "ForwardTrace", "PARAM_ORDER",
    "assemble_info", "init_graph", "propagate", "attend_and_classify",
    "forward", "save_checkpoint", "load_checkpoint",
]

STATE_DIM = 4  # rows of H: two channels from C @ A plus two from C @ A^T

CHECKPOINT_VERSION = 1

# Canonical parameter enumeration; gradient checking, Adam state and
# checkpoints all follow this order.
PARAM_ORDER = (
    "gru.w_update", "gru.u_update", "gru.b_update",
    "gru.w_reset", "gru.u_reset", "gru.b_reset",
    "gru.w_cand", "gru.u_cand", "gru.b_cand",
    "attn.proj", "attn.score",
    "head.w1", "head.b1", "head.w2", "head.b2",
)


@dataclass(frozen=True)
class InfoMatrix:
    """The 2 x (K+2) scene/object feature matrix of one image."""

    c: np.ndarray
    k: int

    @property
    def n_nodes(self) -> int:
        return self.k + NUM_CLASS_NODES


def assemble_info(record: ImageRecord, k: int, use_scene: bool = True,
                  use_cardinality: bool = True) -> InfoMatrix:
    """Build the information matrix; channels can be zeroed for ablations."""
    n = k + NUM_CLASS_NODES
    c = np.zeros((2, n), dtype=np.float64)
    if use_scene:
        c[0, 0] = record.scene_logits[0]
        c[0, 1] = record.scene_logits[1]
    if use_cardinality:
        c[1, NUM_CLASS_NODES:] = record.cardinality_vector(k)
    return InfoMatrix(c=c, k=k)


@dataclass
class ModelParams:
    """All learnable weights, keyed by the canonical enumeration.

    Shapes (n = K + 2):
      gru.[wu]_{update,reset,cand}: (4, 4); gru.b_*: (4,)
      attn.proj: (attn_dim, 4); attn.score: (2 * attn_dim,)
      head.w1: (hidden_units, 4 * n); head.b1: (hidden_units,)
      head.w2: (2, hidden_units); head.b2: (2,)
    """

    k: int
    rounds: int = 3
    hidden_units: int = 32
    attn_dim: int = 4
    seed: int = 0
    tensors: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def n_nodes(self) -> int:
        return self.k + NUM_CLASS_NODES

    def shapes(self) -> dict[str, tuple[int, ...]]:
        n, h, d = self.n_nodes, self.hidden_units, self.attn_dim
        gate = {}
        for gate_name in ("update", "reset", "cand"):
            gate[f"gru.w_{gate_name}"] = (STATE_DIM, STATE_DIM)
            gate[f"gru.u_{gate_name}"] = (STATE_DIM, STATE_DIM)
            gate[f"gru.b_{gate_name}"] = (STATE_DIM,)
        return {
            **gate,
            "attn.proj": (d, STATE_DIM),
            "attn.score": (2 * d,),
            "head.w1": (h, STATE_DIM * n),
            "head.b1": (h,),
            "head.w2": (2, h),
            "head.b2": (2,),
        }

    @classmethod
    def init(cls, k: int, rounds: int = 3, hidden_units: int = 32,
             attn_dim: int = 4, seed: int = 0) -> "ModelParams":
        """Seeded uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)]."""
        params = cls(k=k, rounds=rounds, hidden_units=hidden_units,
                     attn_dim=attn_dim, seed=seed)
        rng = np.random.default_rng(seed)
        fan_in = {
            "gru": STATE_DIM,
            "attn.proj": STATE_DIM,
            "attn.score": 2 * attn_dim,
            "head.w1": STATE_DIM * params.n_nodes,
            "head.b1": STATE_DIM * params.n_nodes,
            "head.w2": hidden_units,
            "head.b2": hidden_units,
        }
        for name, shape in params.shapes().items():
            bound = 1.0 / np.sqrt(fan_in.get(name, fan_in["gru"]))
            params.tensors[name] = rng.uniform(-bound, bound, size=shape)
        return params

    @classmethod
    def zeros(cls, k: int, rounds: int = 3, hidden_units: int = 32,
              attn_dim: int = 4) -> "ModelParams":
        params = cls(k=k, rounds=rounds, hidden_units=hidden_units,
                     attn_dim=attn_dim)
        for name, shape in params.shapes().items():
            params.tensors[name] = np.zeros(shape)
        return params

    def validate(self) -> None:
        expected = self.shapes()
        if set(self.tensors) != set(expected):
            raise ValidationError("parameter names do not match the "
                                  "canonical enumeration")
        for name in PARAM_ORDER:
            arr = self.tensors[name]
            if arr.shape != expected[name]:
                raise ValidationError(
                    f"{name}: expected shape {expected[name]}, got {arr.shape}")
            if not np.isfinite(arr).all():
                raise NumericError(f"parameter tensor {name} is not finite")

    def copy(self) -> "ModelParams":
        return ModelParams(k=self.k, rounds=self.rounds,
                           hidden_units=self.hidden_units,
                           attn_dim=self.attn_dim, seed=self.seed,
                           tensors={n: a.copy() for n, a in self.tensors.items()})

    def flat(self) -> np.ndarray:
        """All parameters as one vector, in enumeration order."""
        return np.concatenate([self.tensors[n].ravel() for n in PARAM_ORDER])


@dataclass
class ForwardTrace:
    """Intermediate states of one forward pass."""

    h0: np.ndarray | None
    h_states: tuple[np.ndarray, ...]
    attention: np.ndarray
    weighted: np.ndarray
    logits: np.ndarray
    probs: np.ndarray


def _wrap_params(params: ModelParams) -> dict[str, Tensor]:
    return {name: Tensor(params.tensors[name]) for name in PARAM_ORDER}


def _col(t: Tensor, n: int) -> Tensor:
    return t.reshape((n, 1))


def _graph_init(c_t: Tensor, a_t: Tensor) -> Tensor:
    return concat_rows(c_t @ a_t, c_t @ a_t.T())


def _graph_propagate(h: Tensor, a_hat: Tensor, pt: dict[str, Tensor],
                     rounds: int) -> list[Tensor]:
    states: list[Tensor] = []
    b_update = _col(pt["gru.b_update"], STATE_DIM)
    b_reset = _col(pt["gru.b_reset"], STATE_DIM)
    b_cand = _col(pt["gru.b_cand"], STATE_DIM)
    for it in range(1, rounds + 1):
        m = h @ a_hat
        z = (pt["gru.w_update"] @ m + pt["gru.u_update"] @ h + b_update).sigmoid()
        r = (pt["gru.w_reset"] @ m + pt["gru.u_reset"] @ h + b_reset).sigmoid()
        cand = (pt["gru.w_cand"] @ m + pt["gru.u_cand"] @ (r * h) + b_cand).tanh()
        h = (1.0 - z) * cand + z * h
        if not np.isfinite(h.data).all():
            raise NumericError(f"non-finite node state at iteration {it}")
        states.append(h)
    return states


def _graph_attend(h: Tensor, pt: dict[str, Tensor],
                  attn_dim: int) -> tuple[Tensor, Tensor, Tensor, Tensor]:
    """Sigmoid pair scores, mean-incoming node weights, two-layer head."""
    n = h.shape[1]
    proj = pt["attn.proj"] @ h                                # (d, n)
    src = (pt["attn.score"][:attn_dim].reshape((1, attn_dim)) @ proj)  # (1, n)
    dst = (pt["attn.score"][attn_dim:].reshape((1, attn_dim)) @ proj)  # (1, n)
    coeff = (src.T() + dst).sigmoid()                         # coeff[i, j]
    node_w = coeff.mean(axis=0)                               # (n,)
    weighted = (h * node_w.reshape((1, n))).reshape((STATE_DIM * n, 1))
    hidden = (pt["head.w1"] @ weighted
              + _col(pt["head.b1"], pt["head.b1"].shape[0])).relu()
    logits = pt["head.w2"] @ hidden + _col(pt["head.b2"], 2)
    shift = float(logits.data.max())
    exp = (logits - shift).exp()
    probs = exp / exp.sum()
    return coeff, weighted, logits, probs


def build_forward_graph(c: np.ndarray, a: np.ndarray, pt: dict[str, Tensor],
                        rounds: int, attn_dim: int):
    """Full tensor graph for one image; shared by inference and training."""
    c_t, a_t = Tensor(c), Tensor(a)
    h0 = _graph_init(c_t, a_t)
    a_hat = Tensor(a + a.T)
    states = _graph_propagate(h0, a_hat, pt, rounds)
    h_last = states[-1] if states else h0
    coeff, weighted, logits, probs = _graph_attend(h_last, pt, attn_dim)
    return h0, states, coeff, weighted, logits, probs


def _check_prior(n_nodes: int, prior: AdjacencyPrior) -> None:
    if prior.n_nodes != n_nodes:
        raise ValidationError(
            f"prior has {prior.n_nodes} nodes, expected {n_nodes}")


def init_graph(info: InfoMatrix, prior: AdjacencyPrior) -> np.ndarray:
    """H0 = [C A ; C A^T], stacking object- and scene-side initializations."""
    _check_prior(info.n_nodes, prior)
    a = prior.matrix
    return np.concatenate([info.c @ a, info.c @ a.T], axis=0)


def propagate(h0: np.ndarray, prior: AdjacencyPrior,
              params: ModelParams) -> np.ndarray:
    """Run the GRU message-passing iterations on a given initial state."""
    params.validate()
    _check_prior(h0.shape[1], prior)
    if params.rounds == 0:
        return np.array(h0, dtype=np.float64, copy=True)
    pt = _wrap_params(params)
    a_hat = Tensor(prior.matrix + prior.matrix.T)
    states = _graph_propagate(Tensor(h0), a_hat, pt, params.rounds)
    return states[-1].data


def attend_and_classify(h_last: np.ndarray,
                        params: ModelParams) -> tuple[np.ndarray, ForwardTrace]:
    """Attention readout and classification of a final node-state matrix."""
    params.validate()
    pt = _wrap_params(params)
    coeff, weighted, logits, probs = _graph_attend(Tensor(h_last), pt,
                                                   params.attn_dim)
    trace = ForwardTrace(h0=None, h_states=(),
                         attention=coeff.data, weighted=weighted.data.ravel(),
                         logits=logits.data.ravel(), probs=probs.data.ravel())
    return trace.probs, trace


def forward(record: ImageRecord, prior: AdjacencyPrior, params: ModelParams,
            use_scene: bool = True, use_cardinality: bool = True) -> ForwardTrace:
    """Deterministic full forward pass for one record."""
    params.validate()
    _check_prior(params.n_nodes, prior)
    info = assemble_info(record, params.k, use_scene=use_scene,
                         use_cardinality=use_cardinality)
    pt = _wrap_params(params)
    h0, states, coeff, weighted, logits, probs = build_forward_graph(
        info.c, prior.matrix, pt, params.rounds, params.attn_dim)
    return ForwardTrace(
        h0=h0.data, h_states=tuple(s.data for s in states),
        attention=coeff.data, weighted=weighted.data.ravel(),
        logits=logits.data.ravel(), probs=probs.data.ravel())


def save_checkpoint(params: ModelParams, path) -> None:
    doc = {
        "version": CHECKPOINT_VERSION,
        "K": params.k,
        "L": params.rounds,
        "h1": params.hidden_units,
        "d_a": params.attn_dim,
        "seed": params.seed,
        "params": {name: params.tensors[name].tolist() for name in PARAM_ORDER},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_checkpoint(path) -> ModelParams:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ValidationError(f"unsupported checkpoint version {doc.get('version')}")
    params = ModelParams(
        k=int(doc["K"]), rounds=int(doc["L"]), hidden_units=int(doc["h1"]),
        attn_dim=int(doc["d_a"]), seed=int(doc["seed"]),
        tensors={name: np.array(arr, dtype=np.float64)
                 for name, arr in doc["params"].items()})
    params.validate()
    return params
