"""Corpus records, JSON Lines ingestion, stratified splits, synthetic data.

A corpus is an ordered list of per-image records. Each record carries a
binary privacy label (0 = public, 1 = private), two scene logits from an
upstream scene model, and a sparse map of object-category counts with
category indices in ``[0, K-1]`` (index 0 is the background category when
names are attached).

On-disk format: UTF-8 JSON Lines, one object per line with keys exactly
``id``, ``label``, ``scene_logits``, ``objects`` and optional ``split``.
Unknown keys are rejected.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, CorpusWarning, ParseError, ValidationError

__all__ = [
    "ImageRecord", "Corpus", "SplitPlan",
    "load_corpus", "write_corpus", "make_splits", "synth_corpus",
    "SYNTH_RULES",
]

DEFAULT_K = 81
DEFAULT_MAX_OBJECTS = 12

_RECORD_KEYS = {"id", "label", "scene_logits", "objects", "split"}


@dataclass(frozen=True)
class ImageRecord:
    """One image's label, scene logits and object-category counts."""

    id: str
    label: int
    scene_logits: tuple[float, float]
    objects: dict[int, int]
    split_hint: str | None = None

    def total_objects(self) -> int:
        return sum(self.objects.values())

    def cardinality_vector(self, k: int) -> np.ndarray:
        """Dense per-category count vector of length ``k``."""
        f_c = np.zeros(k, dtype=np.float64)
        for cat, count in self.objects.items():
            if not 0 <= cat < k:
                raise ValidationError(
                    f"record {self.id!r}: category {cat} out of range [0, {k - 1}]")
            f_c[cat] = count
        return f_c

    def validate(self, k: int, max_objects: int = DEFAULT_MAX_OBJECTS) -> None:
        if self.label not in (0, 1):
            raise ValidationError(f"record {self.id!r}: label must be 0 or 1")
        if len(self.scene_logits) != 2 or not all(
                np.isfinite(v) for v in self.scene_logits):
            raise ValidationError(
                f"record {self.id!r}: scene_logits must be two finite numbers")
        for cat, count in self.objects.items():
            if not isinstance(cat, int) or not 0 <= cat < k:
                raise ValidationError(
                    f"record {self.id!r}: category {cat} out of range [0, {k - 1}]")
            if not isinstance(count, int) or isinstance(count, bool) or count < 1:
                raise ValidationError(
                    f"record {self.id!r}: count for category {cat} must be a "
                    f"positive integer")
        if self.total_objects() > max_objects:
            raise ValidationError(
                f"record {self.id!r}: {self.total_objects()} objects exceed "
                f"the cap of {max_objects}")


@dataclass
class Corpus:
    """Ordered collection of records sharing one category space.

    Immutable by convention after construction; safe to share read-only.
    """

    records: list[ImageRecord]
    k: int = DEFAULT_K
    category_names: list[str] | None = None

    def __post_init__(self):
        if self.k < 1:
            raise ValidationError("K must be >= 1")
        if self.category_names is not None and len(self.category_names) != self.k:
            raise ValidationError("category_names must have exactly K entries")
        seen: set[str] = set()
        for rec in self.records:
            if rec.id in seen:
                raise ValidationError(f"duplicate record id {rec.id!r}")
            seen.add(rec.id)

    def __len__(self) -> int:
        return len(self.records)

    def labels(self) -> np.ndarray:
        return np.array([r.label for r in self.records], dtype=np.int64)

    def by_id(self) -> dict[str, ImageRecord]:
        return {r.id: r for r in self.records}

    def subset(self, ids) -> "Corpus":
        """Sub-corpus with the given ids, in the given order."""
        index = self.by_id()
        missing = [i for i in ids if i not in index]
        if missing:
            raise ValidationError(f"unknown record ids: {missing[:5]}")
        return Corpus([index[i] for i in ids], k=self.k,
                      category_names=self.category_names)


@dataclass
class SplitPlan:
    """Stratified test split plus k validation folds over the rest."""

    folds: list[tuple[list[str], list[str]]]
    test_ids: list[str]
    seed: int
    n_folds: int

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "n_folds": self.n_folds,
            "test": list(self.test_ids),
            "folds": [{"train": list(tr), "val": list(va)}
                      for tr, va in self.folds],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "SplitPlan":
        return cls(
            folds=[(list(f["train"]), list(f["val"])) for f in doc["folds"]],
            test_ids=list(doc["test"]),
            seed=int(doc["seed"]),
            n_folds=int(doc["n_folds"]),
        )


def _clip_counts(objects: dict[int, int], max_objects: int) -> tuple[dict[int, int], bool]:
    """Reduce counts until the total is <= max_objects.

    Removes one instance at a time from the currently largest category;
    count ties break toward the lower category index. Categories that
    reach zero are dropped.
    """
    counts = dict(objects)
    total = sum(counts.values())
    clipped = total > max_objects
    while total > max_objects:
        cat = max(sorted(counts), key=lambda c: counts[c])
        # sorted() puts lower indices first; max keeps the first of equal counts
        counts[cat] -= 1
        total -= 1
        if counts[cat] == 0:
            del counts[cat]
    return counts, clipped


def _parse_record(doc: object, line_no: int, k: int) -> ImageRecord:
    if not isinstance(doc, dict):
        raise ParseError(f"line {line_no}: expected a JSON object")
    unknown = set(doc) - _RECORD_KEYS
    if unknown:
        raise ValidationError(f"line {line_no}: unknown keys {sorted(unknown)}")
    for key in ("id", "label", "scene_logits", "objects"):
        if key not in doc:
            raise ValidationError(f"line {line_no}: missing key {key!r}")
    rec_id = doc["id"]
    if not isinstance(rec_id, str) or not rec_id:
        raise ValidationError(f"line {line_no}: id must be a non-empty string")
    label = doc["label"]
    if isinstance(label, bool) or not isinstance(label, int) or label not in (0, 1):
        raise ValidationError(f"line {line_no}: label must be the integer 0 or 1")
    logits = doc["scene_logits"]
    if (not isinstance(logits, list) or len(logits) != 2
            or not all(isinstance(v, (int, float)) and not isinstance(v, bool)
                       for v in logits)):
        raise ValidationError(f"line {line_no}: scene_logits must be 2 numbers")
    raw_objects = doc["objects"]
    if not isinstance(raw_objects, dict):
        raise ValidationError(f"line {line_no}: objects must be an object")
    objects: dict[int, int] = {}
    for key, count in raw_objects.items():
        try:
            cat = int(key)
        except ValueError:
            raise ValidationError(
                f"line {line_no}: object key {key!r} is not a decimal index")
        if str(cat) != key or not 0 <= cat < k:
            raise ValidationError(
                f"line {line_no}: category {key!r} out of range [0, {k - 1}]")
        if isinstance(count, bool) or not isinstance(count, int) or count < 1:
            raise ValidationError(
                f"line {line_no}: count for category {key!r} must be a "
                f"positive integer")
        objects[cat] = count
    split = doc.get("split")
    if split is not None and not isinstance(split, str):
        raise ValidationError(f"line {line_no}: split must be a string")
    return ImageRecord(id=rec_id, label=label,
                       scene_logits=(float(logits[0]), float(logits[1])),
                       objects=objects, split_hint=split)


def load_corpus(path, k: int = DEFAULT_K,
                max_objects: int = DEFAULT_MAX_OBJECTS) -> Corpus:
    """Load and validate a JSON Lines corpus.

    Per-image object totals above ``max_objects`` are clipped (largest
    category first) with a CorpusWarning.
    """
    records: list[ImageRecord] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                doc = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"line {line_no}: invalid JSON ({exc.msg})") from exc
            rec = _parse_record(doc, line_no, k)
            if rec.id in seen:
                raise ValidationError(f"line {line_no}: duplicate id {rec.id!r}")
            seen.add(rec.id)
            clipped_objects, clipped = _clip_counts(rec.objects, max_objects)
            if clipped:
                warnings.warn(
                    f"line {line_no}: clipped objects of record {rec.id!r} "
                    f"from {rec.total_objects()} to {max_objects}",
                    CorpusWarning, stacklevel=2)
                rec = ImageRecord(rec.id, rec.label, rec.scene_logits,
                                  clipped_objects, rec.split_hint)
            rec.validate(k, max_objects)
            records.append(rec)
    return Corpus(records, k=k)


def write_corpus(corpus: Corpus, path) -> None:
    """Write a corpus in the JSON Lines interchange format."""
    with open(path, "w", encoding="utf-8") as fh:
        for rec in corpus.records:
            doc = {
                "id": rec.id,
                "label": rec.label,
                "scene_logits": [rec.scene_logits[0], rec.scene_logits[1]],
                "objects": {str(cat): count
                            for cat, count in sorted(rec.objects.items())},
            }
            if rec.split_hint is not None:
                doc["split"] = rec.split_hint
            fh.write(json.dumps(doc) + "\n")


def _stratified_take(ids_by_class: dict[int, list[str]], fraction: float,
                     rng: np.random.Generator) -> tuple[dict[int, list[str]], list[str]]:
    """Split off ``fraction`` of each class; returns (remaining, taken)."""
    taken: list[str] = []
    remaining: dict[int, list[str]] = {}
    for label in sorted(ids_by_class):
        ids = list(ids_by_class[label])
        rng.shuffle(ids)
        n_take = int(round(fraction * len(ids)))
        taken.extend(ids[:n_take])
        remaining[label] = ids[n_take:]
    return remaining, taken


def make_splits(corpus: Corpus, n_folds: int, test_fraction: float,
                seed: int) -> SplitPlan:
    """Deterministic stratified test split and k-fold assignment.

    Every non-test id lands in exactly one fold's validation set; class
    ratios are preserved per fold by round-robin assignment within each
    class.
    """
    if n_folds < 2:
        raise ConfigError("n_folds must be >= 2")
    if not 0.0 <= test_fraction < 1.0:
        raise ConfigError("test_fraction must be in [0, 1)")
    ids_by_class: dict[int, list[str]] = {}
    for rec in corpus.records:
        ids_by_class.setdefault(rec.label, []).append(rec.id)
    for label, ids in sorted(ids_by_class.items()):
        if len(ids) < n_folds:
            raise ConfigError(
                f"class {label} has {len(ids)} records; need >= {n_folds}")
    rng = np.random.default_rng(seed)
    remaining, test_ids = _stratified_take(ids_by_class, test_fraction, rng)
    for label, ids in sorted(remaining.items()):
        if len(ids) < n_folds:
            raise ConfigError(
                f"class {label} has {len(ids)} non-test records; "
                f"need >= {n_folds}")
    val_sets: list[list[str]] = [[] for _ in range(n_folds)]
    for label in sorted(remaining):
        for i, rec_id in enumerate(remaining[label]):
            val_sets[i % n_folds].append(rec_id)
    folds: list[tuple[list[str], list[str]]] = []
    for f in range(n_folds):
        val = list(val_sets[f])
        train = [i for g in range(n_folds) if g != f for i in val_sets[g]]
        folds.append((train, val))
    return SplitPlan(folds=folds, test_ids=test_ids, seed=seed, n_folds=n_folds)


# Synthetic corpora: the label is a deterministic function of the scene
# logits and/or the joint presence of one designated category pair, so the
# data is separable by construction. Which cue carries the label:
#   scene_and_objects  both cues, aligned (default)
#   scene_only         scene informative, objects are noise
#   objects_only       pair presence informative, scene is noise
SYNTH_RULES = ("scene_and_objects", "scene_only", "objects_only")


def _designated_pair(k: int) -> tuple[int, int]:
    return (1, 2) if k >= 3 else (0, 1)


def synth_corpus(n: int, k: int, rule: str = "scene_and_objects",
                 seed: int = 0) -> Corpus:
    """Generate a deterministic labeled corpus under a separability rule."""
    if n < 2:
        raise ConfigError("n must be >= 2")
    if k < 2:
        raise ConfigError("K must be >= 2")
    if rule not in SYNTH_RULES:
        raise ConfigError(f"unknown rule {rule!r}; choose from {SYNTH_RULES}")
    rng = np.random.default_rng(seed)
    pair = _designated_pair(k)
    noise_pool = [c for c in range(k) if c not in pair]
    records: list[ImageRecord] = []
    for i in range(n):
        label = int(rng.integers(0, 2))
        jitter = rng.normal(0.0, 0.25, size=2)
        if rule == "objects_only":
            scene = tuple(rng.normal(0.0, 1.0, size=2))
        elif label == 1:
            scene = (2.0 + jitter[0], 1.0 + jitter[1])
        else:
            scene = (-2.0 + jitter[0], -1.0 + jitter[1])
        objects: dict[int, int] = {}
        if rule == "scene_only":
            cats = rng.choice(k, size=int(rng.integers(0, 3)), replace=False)
            for cat in cats:
                objects[int(cat)] = int(rng.integers(1, 3))
        else:
            if label == 1:
                objects[pair[0]] = 1
                objects[pair[1]] = 1
            if noise_pool:
                n_noise = int(rng.integers(0, min(3, len(noise_pool)) + 1))
                cats = rng.choice(noise_pool, size=n_noise, replace=False)
                for cat in cats:
                    objects[int(cat)] = int(rng.integers(1, 3))
        records.append(ImageRecord(
            id=f"s{i:05d}", label=label,
            scene_logits=(float(scene[0]), float(scene[1])),
            objects=objects))
    return Corpus(records, k=k)
