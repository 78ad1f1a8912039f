"""Confusion counts, precision/recall/specificity/F1, ROC and AUC."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from planktonad.dataset import SampleLabel
from planktonad.errors import DomainError, ShapeError
from planktonad.oneclass import DecisionThreshold, classify, nok_mask

REPORT_COLUMNS = ["combination_id", "species", "auc", "f1", "precision", "recall", "specificity",
                  "threshold", "tp", "tn", "fp", "fn"]


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


@dataclass(frozen=True)
class EvaluationReport:
    combination_id: str
    species: str
    auc: float
    f1: float
    precision: float
    recall: float
    specificity: float
    threshold: DecisionThreshold
    counts: ConfusionCounts

    def row(self) -> dict:
        c = self.counts
        return {"combination_id": self.combination_id, "species": self.species, "auc": self.auc,
                "f1": self.f1, "precision": self.precision, "recall": self.recall,
                "specificity": self.specificity, "threshold": self.threshold.value,
                "tp": c.tp, "tn": c.tn, "fp": c.fp, "fn": c.fn}

    def display(self) -> str:
        return (f"{self.combination_id} [{self.species}] AUC {self.auc:.2f} F1 {self.f1:.2f} "
                f"Prec {self.precision:.2f} Rec {self.recall:.2f}")

    def to_json(self) -> dict:
        doc = self.row()
        doc["threshold"] = {"value": self.threshold.value, "fpr": self.threshold.fpr,
                            "fnr": self.threshold.fnr, "source": self.threshold.source}
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> EvaluationReport:
        t = doc["threshold"]
        return cls(doc["combination_id"], doc["species"], doc["auc"], doc["f1"], doc["precision"],
                   doc["recall"], doc["specificity"],
                   DecisionThreshold(float(t["value"]), t["fpr"], t["fnr"], t["source"]),
                   ConfusionCounts(doc["tp"], doc["tn"], doc["fp"], doc["fn"]))


def _as_labels(values: Sequence) -> list[SampleLabel]:
    return [SampleLabel.NOK if n else SampleLabel.OK for n in nok_mask(values)]


def confusion_counts(predicted: Sequence, truth: Sequence, positive_class: SampleLabel | str = SampleLabel.OK
                     ) -> ConfusionCounts:
    """Confusion counts with ``positive_class`` as the positive label.

    With the default (OK positive): TP = OK predicted OK, TN = NOK predicted
    NOK, FP = NOK predicted OK, FN = OK predicted NOK.
    """
    if len(predicted) != len(truth):
        raise ShapeError(f"{len(predicted)} predictions but {len(truth)} labels")
    pos = SampleLabel(positive_class)
    pred, true = _as_labels(predicted), _as_labels(truth)
    tp = sum(p is pos and t is pos for p, t in zip(pred, true))
    tn = sum(p is not pos and t is not pos for p, t in zip(pred, true))
    fp = sum(p is pos and t is not pos for p, t in zip(pred, true))
    fn = sum(p is not pos and t is pos for p, t in zip(pred, true))
    return ConfusionCounts(tp, tn, fp, fn)


def _ratio(num: float, den: float) -> float:
    return num / den if den else 0.0


def f1_score(precision: float, recall: float) -> float:
    return _ratio(2.0 * precision * recall, precision + recall)


def binary_metrics(counts: ConfusionCounts) -> tuple[float, float, float, float]:
    """(precision, recall, specificity, F1); zero denominators give 0."""
    precision = _ratio(counts.tp, counts.tp + counts.fp)
    recall = _ratio(counts.tp, counts.tp + counts.fn)
    specificity = _ratio(counts.tn, counts.tn + counts.fp)
    return precision, recall, specificity, f1_score(precision, recall)


def roc_auc(scores: Sequence[float], labels: Sequence) -> tuple[np.ndarray, float]:
    """ROC points (FPR, TPR) sorted by FPR and the trapezoidal AUC.

    NOK is the detected class: a sample counts as detected when its score is
    at least the threshold. Every distinct score is a threshold, so tied
    scores produce diagonal segments worth half credit.
    """
    s = np.asarray(scores, dtype=np.float64)
    nok = nok_mask(labels)
    if len(s) != len(nok):
        raise ShapeError(f"{len(s)} scores but {len(nok)} labels")
    if nok.all() or not nok.any():
        raise DomainError("ROC needs both OK and NOK samples")
    order = np.argsort(-s, kind="mergesort")
    s, nok = s[order], nok[order]
    last_of_tie = np.r_[np.diff(s) != 0, True]
    tps = np.cumsum(nok)[last_of_tie]
    fps = np.cumsum(~nok)[last_of_tie]
    tpr = np.r_[0.0, tps / nok.sum()]
    fpr = np.r_[0.0, fps / (~nok).sum()]
    auc = float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))
    return np.column_stack([fpr, tpr]), min(max(auc, 0.0), 1.0)


def build_report(combination_id: str, species: str, scores: Sequence[float], labels: Sequence,
                 threshold: DecisionThreshold, positive_class: SampleLabel | str = SampleLabel.OK
                 ) -> EvaluationReport:
    predicted = classify(scores, threshold)
    counts = confusion_counts(predicted, labels, positive_class)
    precision, recall, specificity, f1 = binary_metrics(counts)
    _, auc = roc_auc(scores, labels)
    return EvaluationReport(combination_id, species, auc, f1, precision, recall, specificity, threshold, counts)


def write_reports_csv(path: str | Path, reports: Sequence[EvaluationReport]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=REPORT_COLUMNS)
        writer.writeheader()
        for r in reports:
            writer.writerow(r.row())
