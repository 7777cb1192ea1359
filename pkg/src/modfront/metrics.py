"""ROC-AUC and PR-AUC (average precision), per tag and macro-averaged."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ArtifactIOError, UndefinedMetricError

METRICS = ("roc_auc", "pr_auc")


@dataclass(frozen=True, eq=False)
class PredictionTable:
    scores: np.ndarray  # (N, C) in [0, 1]
    labels: np.ndarray  # (N, C) bool
    class_names: tuple[str, ...]

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=np.float64)
        labels = np.asarray(self.labels).astype(bool)
        if scores.ndim != 2 or scores.shape != labels.shape:
            raise ValueError(f"scores {scores.shape} and labels {labels.shape} must be equal 2-D shapes")
        if len(self.class_names) != scores.shape[1]:
            raise ValueError("one class name per column required")
        if not np.all(np.isfinite(scores)) or scores.min() < 0 or scores.max() > 1:
            raise ValueError("scores must be finite and within [0, 1]")
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "class_names", tuple(self.class_names))


def _average_ranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks, tied values sharing the mean of their positions."""
    order = np.argsort(values, kind="mergesort")
    sorted_vals = values[order]
    boundaries = np.flatnonzero(np.diff(sorted_vals)) + 1
    starts = np.concatenate([[0], boundaries])
    ends = np.concatenate([boundaries, [values.size]])
    ranks = np.empty(values.size)
    ranks[order] = np.repeat((starts + ends + 1) / 2.0, ends - starts)
    return ranks


def roc_auc(scores, labels) -> float:
    """Mann-Whitney AUC: P(random positive outscores random negative), ties count 1/2."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(bool)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("ROC-AUC needs at least one positive and one negative")
    rank_sum = _average_ranks(scores)[labels].sum()
    return float((rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def pr_auc(scores, labels) -> float:
    """Average precision over a descending sweep of distinct score thresholds.

    Equal scores form one threshold, so tied examples enter together.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(bool)
    n_pos = int(labels.sum())
    if n_pos == 0:
        raise UndefinedMetricError("PR-AUC needs at least one positive")
    order = np.argsort(-scores, kind="mergesort")
    s, y = scores[order], labels[order]
    last_of_group = np.r_[np.flatnonzero(np.diff(s)), s.size - 1]
    tp = np.cumsum(y)[last_of_group]
    predicted = last_of_group + 1
    prev_tp = np.r_[0, tp[:-1]]
    ap = 0.0
    for t, p, t0 in zip(tp.tolist(), predicted.tolist(), prev_tp.tolist()):
        ap += (t / p) * ((t - t0) / n_pos)
    return ap


_FUNCS = {"roc_auc": roc_auc, "pr_auc": pr_auc}


def macro_average(table: PredictionTable, metric: str = "roc_auc"):
    """Unweighted mean over classes where the metric is defined.

    Returns ``(overall, per_class)``; undefined classes appear as ``None``
    in ``per_class`` (kept in ``class_names`` order).
    """
    fn = _FUNCS[metric]
    per_class = []
    for c in range(table.scores.shape[1]):
        try:
            per_class.append(fn(table.scores[:, c], table.labels[:, c]))
        except UndefinedMetricError:
            per_class.append(None)
    defined = [v for v in per_class if v is not None]
    if not defined:
        raise UndefinedMetricError(f"{metric} is undefined for every class")
    return float(np.mean(defined)), per_class


def _read_matrix(path: Path):
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    except OSError as exc:
        raise ArtifactIOError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise ArtifactIOError(f"{path} is empty")
    header = [h.strip() for h in rows[0]]
    try:
        values = np.array([[float(v) for v in r] for r in rows[1:]], dtype=np.float64)
    except ValueError as exc:
        raise ArtifactIOError(f"{path}: non-numeric entry ({exc})") from exc
    if values.size and values.shape[1] != len(header):
        raise ArtifactIOError(f"{path}: rows do not match the {len(header)}-column header")
    return header, values.reshape(-1, len(header))


def read_prediction_table(scores_path, labels_path) -> PredictionTable:
    """Load a score CSV and a label CSV that share a header of class names."""
    s_names, scores = _read_matrix(Path(scores_path))
    l_names, labels = _read_matrix(Path(labels_path))
    if s_names != l_names:
        only_s = [n for n in s_names if n not in l_names]
        only_l = [n for n in l_names if n not in s_names]
        raise ArtifactIOError(
            f"column mismatch: only in scores {only_s}, only in labels {only_l}"
            + ("" if only_s or only_l else " (same names, different order)")
        )
    if scores.shape[0] != labels.shape[0]:
        raise ArtifactIOError(f"row count mismatch: {scores.shape[0]} scores vs {labels.shape[0]} labels")
    if not np.isin(labels, (0.0, 1.0)).all():
        raise ArtifactIOError("labels must be 0 or 1")
    try:
        return PredictionTable(scores, labels.astype(bool), tuple(s_names))
    except ValueError as exc:
        raise ArtifactIOError(str(exc)) from exc


def write_per_tag_csv(table: PredictionTable, path) -> dict:
    """Per-tag and overall ROC-AUC / PR-AUC; returns the overall values."""
    overall = {}
    per = {}
    for metric in METRICS:
        try:
            overall[metric], per[metric] = macro_average(table, metric)
        except UndefinedMetricError:
            overall[metric], per[metric] = None, [None] * len(table.class_names)
    fmt = lambda v: "nan" if v is None else repr(float(v))  # noqa: E731
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["tag", "roc_auc", "pr_auc", "defined"])
        for i, name in enumerate(table.class_names):
            r, p = per["roc_auc"][i], per["pr_auc"][i]
            w.writerow([name, fmt(r), fmt(p), int(r is not None and p is not None)])
        w.writerow(["__overall__", fmt(overall["roc_auc"]), fmt(overall["pr_auc"]), 1])
    return overall
