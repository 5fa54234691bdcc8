"""Confusion matrices and imbalance-aware classification metrics.

With ~19% error trials, raw accuracy rewards predicting "correct" everywhere.
Every summary here is therefore built from per-class rates: the normalized
accuracy is the unweighted (macro) mean of the per-class true positive rates,
which pins chance level at 1/n_classes regardless of imbalance.

Two aggregation modes are supported when several recordings are scored: the
pooled matrix (sum the confusion matrices, then compute) and the mean of the
per-recording values. They differ slightly whenever recordings have unequal
trial counts, so both are reported.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import CLASS_NAMES, write_json
from .errors import DataError


@dataclass
class ConfusionMatrix:
    """Counts with rows = true class, columns = predicted class."""

    counts: np.ndarray
    class_names: tuple = CLASS_NAMES

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.ndim != 2 or self.counts.shape[0] != self.counts.shape[1]:
            raise DataError(f"counts must be square, got shape {self.counts.shape}")
        if len(self.class_names) != self.counts.shape[0]:
            raise DataError(
                f"{len(self.class_names)} class names for "
                f"{self.counts.shape[0]} x {self.counts.shape[1]} counts"
            )
        if (self.counts < 0).any():
            raise DataError("negative counts")

    @property
    def n_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def tp(self, class_i: int) -> int:
        return int(self.counts[class_i, class_i])

    def fn(self, class_i: int) -> int:
        return int(self.counts[class_i].sum() - self.counts[class_i, class_i])

    def fp(self, class_i: int) -> int:
        return int(self.counts[:, class_i].sum() - self.counts[class_i, class_i])

    def tn(self, class_i: int) -> int:
        return self.total - self.tp(class_i) - self.fn(class_i) - self.fp(class_i)

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        if self.class_names != other.class_names:
            raise DataError("cannot add matrices with different class names")
        return ConfusionMatrix(self.counts + other.counts, self.class_names)


def confusion(preds, labels, class_names: tuple = CLASS_NAMES) -> ConfusionMatrix:
    """Tally predictions against true labels."""
    preds = np.asarray(preds, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    if preds.shape != labels.shape or preds.ndim != 1:
        raise DataError(
            f"preds and labels must be equal-length 1-D, got {preds.shape} vs {labels.shape}"
        )
    n = len(class_names)
    for name, arr in (("preds", preds), ("labels", labels)):
        if len(arr) and (arr.min() < 0 or arr.max() >= n):
            raise DataError(f"{name} outside class range [0, {n})")
    counts = np.zeros((n, n), dtype=np.int64)
    np.add.at(counts, (labels, preds), 1)
    return ConfusionMatrix(counts, class_names)


def tpr(cm: ConfusionMatrix, class_i: int):
    """True positive rate TP/(TP+FN); None when the class has no trials."""
    row = cm.tp(class_i) + cm.fn(class_i)
    if row == 0:
        return None
    return cm.tp(class_i) / row


def specificity(cm: ConfusionMatrix, class_i: int):
    """True negative rate TN/(TN+FP); None when undefined."""
    denom = cm.tn(class_i) + cm.fp(class_i)
    if denom == 0:
        return None
    return cm.tn(class_i) / denom


def precision(cm: ConfusionMatrix, class_i: int):
    """TP/(TP+FP); None when the class was never predicted."""
    denom = cm.tp(class_i) + cm.fp(class_i)
    if denom == 0:
        return None
    return cm.tp(class_i) / denom


def f1(cm: ConfusionMatrix, class_i: int) -> float:
    """2TP/(2TP+FP+FN); 0.0 when the denominator is zero (see f1_degenerate)."""
    denom = 2 * cm.tp(class_i) + cm.fp(class_i) + cm.fn(class_i)
    if denom == 0:
        return 0.0
    return 2 * cm.tp(class_i) / denom


def f1_degenerate(cm: ConfusionMatrix, class_i: int) -> bool:
    """True when the F1 denominator is zero and the reported 0.0 is a sentinel."""
    return 2 * cm.tp(class_i) + cm.fp(class_i) + cm.fn(class_i) == 0


def macro(values) -> float:
    """Unweighted mean over the defined (non-None) per-class values."""
    present = [v for v in values if v is not None]
    if not present:
        raise DataError("no class has a defined value to average")
    return float(np.mean(present))


def acc_norm(cm: ConfusionMatrix) -> float:
    """Normalized accuracy: arithmetic mean of the per-class TPRs."""
    rates = []
    for i, name in enumerate(cm.class_names):
        r = tpr(cm, i)
        if r is None:
            raise DataError(f"class {name!r} has no trials; acc_norm undefined")
        rates.append(r)
    return float(np.mean(rates))


def pooled_acc_norm(cms) -> float:
    """acc_norm of the summed confusion matrix.

    Accepts a recording-name mapping or a plain iterable of matrices.
    """
    cms = list(cms.values() if isinstance(cms, dict) else cms)
    if not cms:
        raise DataError("no confusion matrices to pool")
    total = cms[0]
    for cm in cms[1:]:
        total = total + cm
    return acc_norm(total)


def mean_acc_norm(cms) -> float:
    """Mean of the per-matrix acc_norm values; accepts a mapping or iterable."""
    cms = list(cms.values() if isinstance(cms, dict) else cms)
    if not cms:
        raise DataError("no confusion matrices to average")
    return float(np.mean([acc_norm(cm) for cm in cms]))


def per_class_report(cm: ConfusionMatrix) -> dict:
    """All per-class metrics keyed by class name (None where undefined)."""
    out = {}
    for i, name in enumerate(cm.class_names):
        out[name] = {
            "tpr": tpr(cm, i),
            "specificity": specificity(cm, i),
            "precision": precision(cm, i),
            "f1": f1(cm, i),
            "f1_degenerate": f1_degenerate(cm, i),
        }
    return out


def build_report(cms_by_recording: dict) -> dict:
    """JSON-ready report over one or more recordings' confusion matrices."""
    if not cms_by_recording:
        raise DataError("no confusion matrices to report")
    names = list(cms_by_recording)
    pooled = cms_by_recording[names[0]]
    for name in names[1:]:
        pooled = pooled + cms_by_recording[name]
    report = {
        "class_names": list(pooled.class_names),
        "pooled": {
            "counts": pooled.counts.tolist(),
            "acc_norm": acc_norm(pooled),
            "per_class": per_class_report(pooled),
        },
        "mean_acc_norm": mean_acc_norm(cms_by_recording.values()),
        "per_recording": {
            name: {
                "counts": cm.counts.tolist(),
                "acc_norm": acc_norm(cm),
                "per_class": per_class_report(cm),
            }
            for name, cm in cms_by_recording.items()
        },
    }
    return report


def write_metrics(out_dir, cms_by_recording: dict) -> dict:
    """Write metrics.json and a flat metrics.csv; returns the report dict."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report = build_report(cms_by_recording)
    write_json(out_dir / "metrics.json", report)

    rows = []
    sections = [("pooled", report["pooled"])] + [
        (name, entry) for name, entry in report["per_recording"].items()
    ]
    for rec_name, entry in sections:
        rows.append((rec_name, "acc_norm", "", entry["acc_norm"]))
        for cls, vals in entry["per_class"].items():
            for metric in ("tpr", "specificity", "precision", "f1"):
                v = vals[metric]
                rows.append((rec_name, metric, cls, "" if v is None else v))
    rows.append(("mean_of_recordings", "acc_norm", "", report["mean_acc_norm"]))
    with open(out_dir / "metrics.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["recording", "metric", "class", "value"])
        writer.writerows(rows)
    return report
