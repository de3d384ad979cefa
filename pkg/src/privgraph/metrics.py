"""Confusion counts and the binary-classification evaluation measures.

Private (label 1) is the positive class. Reported measures: per-class
precision/recall/F1, unweighted binary accuracy (UBA, in percent) and
unweighted F1 (U-F1, the mean of the two per-class F1 scores). A class
that is never predicted has undefined precision, reported as absent, and
an F1 of 0.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ValidationError

__all__ = [
    "EvalReport", "evaluate", "random_baseline", "f1_from_pr",
    "unweighted_f1", "format_report_table", "write_reports_csv",
    "write_reports_json",
]


def f1_from_pr(precision: float, recall: float) -> float:
    """Harmonic mean of precision and recall; 0 when both are 0."""
    if precision + recall == 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def unweighted_f1(f1_public: float, f1_private: float) -> float:
    return (f1_public + f1_private) / 2.0


@dataclass(frozen=True)
class EvalReport:
    """Confusion counts plus the derived measures for one evaluation."""

    tp: int
    fp: int
    tn: int
    fn: int
    precision_public: float | None
    recall_public: float
    f1_public: float
    precision_private: float | None
    recall_private: float
    f1_private: float
    uba: float
    uf1: float

    @classmethod
    def from_counts(cls, tp: int, fp: int, tn: int, fn: int) -> "EvalReport":
        total = tp + fp + tn + fn
        if total == 0:
            raise ConfigError("cannot evaluate zero records")
        # public treats label 0 as the positive class
        prec_pub = tn / (tn + fn) if (tn + fn) > 0 else None
        rec_pub = tn / (tn + fp) if (tn + fp) > 0 else 0.0
        prec_priv = tp / (tp + fp) if (tp + fp) > 0 else None
        rec_priv = tp / (tp + fn) if (tp + fn) > 0 else 0.0
        f1_pub = f1_from_pr(prec_pub, rec_pub) if prec_pub is not None else 0.0
        f1_priv = f1_from_pr(prec_priv, rec_priv) if prec_priv is not None else 0.0
        return cls(tp=tp, fp=fp, tn=tn, fn=fn,
                   precision_public=prec_pub, recall_public=rec_pub,
                   f1_public=f1_pub,
                   precision_private=prec_priv, recall_private=rec_priv,
                   f1_private=f1_priv,
                   uba=100.0 * (tp + tn) / total,
                   uf1=unweighted_f1(f1_pub, f1_priv))

    def to_json(self) -> dict:
        return {
            "tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn,
            "public": {"precision": self.precision_public,
                       "recall": self.recall_public, "f1": self.f1_public},
            "private": {"precision": self.precision_private,
                        "recall": self.recall_private, "f1": self.f1_private},
            "uba": self.uba,
            "uf1": self.uf1,
        }


def evaluate(predictions, labels) -> EvalReport:
    """Score binary predictions against ground truth."""
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if predictions.size == 0:
        raise ConfigError("cannot evaluate an empty prediction list")
    if predictions.shape != labels.shape:
        raise ConfigError("predictions and labels must have equal length")
    for arr, what in ((predictions, "prediction"), (labels, "label")):
        bad = set(np.unique(arr)) - {0, 1}
        if bad:
            raise ValidationError(f"{what}s must be 0 or 1, got {sorted(bad)}")
    tp = int(np.sum((predictions == 1) & (labels == 1)))
    fp = int(np.sum((predictions == 1) & (labels == 0)))
    tn = int(np.sum((predictions == 0) & (labels == 0)))
    fn = int(np.sum((predictions == 0) & (labels == 1)))
    return EvalReport.from_counts(tp, fp, tn, fn)


def random_baseline(labels, seed: int, prior_coin: bool = False) -> EvalReport:
    """Coin-flip predictions scored against the given labels.

    Fair coin by default; with prior_coin the private probability equals
    the private fraction of the labels.
    """
    labels = np.asarray(labels)
    if labels.size == 0:
        raise ConfigError("labels must be non-empty")
    rng = np.random.default_rng(seed)
    p = float(np.mean(labels)) if prior_coin else 0.5
    predictions = (rng.random(labels.size) < p).astype(np.int64)
    return evaluate(predictions, labels)


def _fmt(value: float | None, percent: bool = False) -> str:
    if value is None:
        return "-"
    return f"{value:.2f}" if percent else f"{value:.3f}"


_TABLE_COLUMNS = ("public_p", "public_r", "public_f1",
                  "private_p", "private_r", "private_f1", "uba", "uf1")


def _row_values(report: EvalReport) -> list[str]:
    return [
        _fmt(report.precision_public), _fmt(report.recall_public),
        _fmt(report.f1_public),
        _fmt(report.precision_private), _fmt(report.recall_private),
        _fmt(report.f1_private),
        _fmt(report.uba, percent=True), _fmt(report.uf1),
    ]


def format_report_table(rows: list[tuple[str, EvalReport]]) -> str:
    """Aligned text table: public P/R/F1, private P/R/F1, UBA, U-F1."""
    header = ["", "P", "R", "F1", "P", "R", "F1", "UBA(%)", "U-F1"]
    group = ["", "Public", "", "", "Private", "", "", "Overall", ""]
    body = [[name] + _row_values(rep) for name, rep in rows]
    widths = [max(len(line[i]) for line in [header, group] + body)
              for i in range(len(header))]
    out = []
    for line in [group, header] + body:
        out.append("  ".join(cell.ljust(w) for cell, w in zip(line, widths)).rstrip())
    return "\n".join(out) + "\n"


def write_reports_csv(rows: list[tuple[str, EvalReport]], path) -> None:
    """CSV mirror of the text table; absent precision becomes an empty cell."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("name," + ",".join(_TABLE_COLUMNS) + "\n")
        for name, rep in rows:
            cells = [cell if cell != "-" else "" for cell in _row_values(rep)]
            fh.write(name + "," + ",".join(cells) + "\n")


def write_reports_json(rows: list[tuple[str, EvalReport]], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({name: rep.to_json() for name, rep in rows}, fh, indent=2)
        fh.write("\n")
