"""Prior-knowledge adjacency matrices over the (K+2)-node graph.

Node layout: indices 0 and 1 are the two class/scene nodes, indices
2..K+1 are the object categories (column ``2 + cat``). Five builders
cover the studied initializations: binary object co-occurrence, per-class
object frequency, uniform, all-ones and seeded random.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .corpus import Corpus
from .errors import ConfigError, ValidationError

__all__ = [
    "AdjacencyPrior", "PRIOR_KINDS", "NUM_CLASS_NODES",
    "build_cooccurrence", "build_class_freq", "build_fixed", "build_prior",
    "save_prior", "load_prior",
]

NUM_CLASS_NODES = 2
PRIOR_KINDS = ("cooccurrence", "class_freq", "uniform", "ones", "random")


@dataclass
class AdjacencyPrior:
    """A (K+2) x (K+2) adjacency matrix initializing the graph edges."""

    kind: str
    matrix: np.ndarray
    k: int
    seed: int | None = None

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=np.float64)
        n = self.k + NUM_CLASS_NODES
        if self.matrix.shape != (n, n):
            raise ValidationError(
                f"prior matrix must be {n}x{n}, got {self.matrix.shape}")

    @property
    def n_nodes(self) -> int:
        return self.k + NUM_CLASS_NODES

    def object_block(self) -> np.ndarray:
        return self.matrix[NUM_CLASS_NODES:, NUM_CLASS_NODES:]


def object_node(cat: int) -> int:
    """Graph node index of object category ``cat``."""
    return NUM_CLASS_NODES + cat


def build_cooccurrence(corpus: Corpus) -> AdjacencyPrior:
    """Binary object co-occurrence matrix with zero class-node padding.

    Entry (i, j) of the object block is 1 iff two distinct categories both
    appear (count >= 1) in at least one image. The diagonal stays zero:
    repeated instances of one category do not co-occur with themselves.
    """
    n = corpus.k + NUM_CLASS_NODES
    a = np.zeros((n, n), dtype=np.float64)
    for rec in corpus.records:
        present = sorted(rec.objects)
        for idx, cat_i in enumerate(present):
            for cat_j in present[idx + 1:]:
                a[object_node(cat_i), object_node(cat_j)] = 1.0
                a[object_node(cat_j), object_node(cat_i)] = 1.0
    return AdjacencyPrior(kind="cooccurrence", matrix=a, k=corpus.k)


def build_class_freq(corpus: Corpus) -> AdjacencyPrior:
    """Per-class object frequency prior.

    Entry (class node c, object node of cat) is the fraction of class-c
    images containing cat, mirrored into the transposed position; the
    object block and the class-class block stay zero. Class node index
    equals the label it represents (0 public, 1 private).
    """
    if not corpus.records:
        raise ConfigError("class_freq prior needs a non-empty corpus")
    n = corpus.k + NUM_CLASS_NODES
    class_totals = np.zeros(NUM_CLASS_NODES, dtype=np.float64)
    contains = np.zeros((NUM_CLASS_NODES, corpus.k), dtype=np.float64)
    for rec in corpus.records:
        class_totals[rec.label] += 1
        for cat in rec.objects:
            contains[rec.label, cat] += 1
    zero = [c for c in range(NUM_CLASS_NODES) if class_totals[c] == 0]
    if zero:
        raise ConfigError(f"no images for class {zero[0]}; "
                          f"cannot normalize the class_freq prior")
    a = np.zeros((n, n), dtype=np.float64)
    for c in range(NUM_CLASS_NODES):
        for cat in range(corpus.k):
            freq = contains[c, cat] / class_totals[c]
            a[c, object_node(cat)] = freq
            a[object_node(cat), c] = freq
    return AdjacencyPrior(kind="class_freq", matrix=a, k=corpus.k)


def build_fixed(kind: str, k: int, seed: int = 0) -> AdjacencyPrior:
    """Corpus-independent priors: uniform, ones or seeded random."""
    if k < 1:
        raise ConfigError("K must be >= 1")
    n = k + NUM_CLASS_NODES
    if kind == "uniform":
        a = np.zeros((n, n), dtype=np.float64)
        a[:NUM_CLASS_NODES, NUM_CLASS_NODES:] = 1.0 / k
        a[NUM_CLASS_NODES:, :NUM_CLASS_NODES] = 1.0 / k
        return AdjacencyPrior(kind="uniform", matrix=a, k=k)
    if kind == "ones":
        return AdjacencyPrior(kind="ones", matrix=np.ones((n, n)), k=k)
    if kind == "random":
        rng = np.random.default_rng(seed)
        return AdjacencyPrior(kind="random", matrix=rng.random((n, n)),
                              k=k, seed=seed)
    raise ConfigError(f"unknown fixed prior kind {kind!r}")


def build_prior(kind: str, corpus: Corpus, seed: int = 0) -> AdjacencyPrior:
    """Dispatch on kind; corpus-derived kinds use the given records only."""
    if kind == "cooccurrence":
        return build_cooccurrence(corpus)
    if kind == "class_freq":
        return build_class_freq(corpus)
    if kind in ("uniform", "ones", "random"):
        return build_fixed(kind, corpus.k, seed=seed)
    raise ConfigError(f"unknown prior kind {kind!r}; choose from {PRIOR_KINDS}")


def save_prior(prior: AdjacencyPrior, path) -> None:
    doc = {
        "kind": prior.kind,
        "K": prior.k,
        "seed": prior.seed,
        "matrix": [[float(v) for v in row] for row in prior.matrix],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_prior(path) -> AdjacencyPrior:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    return AdjacencyPrior(kind=doc["kind"], matrix=np.array(doc["matrix"]),
                          k=int(doc["K"]), seed=doc.get("seed"))
