"""Evaluation metrics with abnormal (label 1) as the positive class.

Scores are abnormality probabilities: higher means more abnormal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm, rankdata

from ._io import atomic_write_text
from .errors import DegenerateLabels, DomainError

P_FLOOR = 1e-12
# exact null distribution of U is used up to this many pairs
EXACT_MAX_PAIRS = 400


def _check(scores, labels):
    s = np.asarray(scores, dtype=np.float64).reshape(-1)
    y = np.asarray(labels).reshape(-1)
    if s.shape != y.shape:
        raise ValueError("scores and labels differ in length")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be 0 or 1")
    y = y.astype(bool)
    if y.all() or not y.any():
        raise DegenerateLabels("both classes must be present")
    return s, y


def roc_auc(scores, labels):
    """P(positive outscores negative), ties counting one half (Mann-Whitney form)."""
    s, y = _check(scores, labels)
    r = rankdata(s)
    n1 = int(y.sum())
    n0 = y.size - n1
    u = r[y].sum() - n1 * (n1 + 1) / 2.0
    return float(u / (n1 * n0))


def roc_curve(scores, labels):
    """``(fpr, tpr, thresholds)``, one point per distinct score plus (0, 0).

    Point i predicts positive for ``score >= thresholds[i]``; the first
    threshold is +inf.
    """
    s, y = _check(scores, labels)
    order = np.argsort(-s, kind="mergesort")
    s, y = s[order], y[order]
    distinct = np.r_[np.flatnonzero(np.diff(s)), s.size - 1]
    tp = np.cumsum(y)[distinct]
    fp = (distinct + 1) - tp
    tpr = np.r_[0.0, tp / y.sum()]
    fpr = np.r_[0.0, fp / (~y).sum()]
    return fpr, tpr, np.r_[np.inf, s[distinct]]


def candidate_thresholds(scores):
    """Midpoints between adjacent distinct scores (the score itself if all tie)."""
    u = np.unique(np.asarray(scores, dtype=np.float64))
    if u.size == 1:
        return u
    return (u[:-1] + u[1:]) / 2.0


def youden_threshold(scores, labels):
    """Threshold maximizing sensitivity + specificity - 1.

    Candidates are midpoints between adjacent distinct scores; ties go to the
    lowest threshold. J is compared exactly as the integer
    ``TP * N - FP * P``.
    """
    s, y = _check(scores, labels)
    cand = candidate_thresholds(s)
    pos, neg = s[y], s[~y]
    n_pos, n_neg = pos.size, neg.size
    tp = n_pos - np.searchsorted(np.sort(pos), cand, side="left")
    fp = n_neg - np.searchsorted(np.sort(neg), cand, side="left")
    j = tp.astype(np.int64) * n_neg - fp.astype(np.int64) * n_pos
    return float(cand[int(np.argmax(j))])


def youden_index(scores, labels, threshold):
    r = confusion_metrics(scores, labels, threshold)
    return r.sensitivity + r.specificity - 1.0


@dataclass(frozen=True)
class EvalReport:
    auc: float
    threshold: float
    accuracy: float
    specificity: float
    sensitivity: float
    precision: float
    f1: float
    confusion: tuple  # (TP, FP, FN, TN)
    precision_undefined: bool = False

    def format(self):
        tp, fp, fn, tn = self.confusion
        rows = [
            ("auc", self.auc),
            ("threshold", self.threshold),
            ("accuracy", self.accuracy),
            ("specificity", self.specificity),
            ("sensitivity", self.sensitivity),
            ("precision", self.precision),
            ("f1", self.f1),
        ]
        out = [f"{k:<12} {v:.6f}" for k, v in rows]
        if self.precision_undefined:
            out[5] += "  (no positive predictions)"
        out.append(f"{'confusion':<12} TP={tp} FP={fp} FN={fn} TN={tn}")
        return "\n".join(out)


def _ratio(a, b):
    return a / b if b else 0.0


def report_from_counts(tp, fp, fn, tn, auc=float("nan"), threshold=float("nan")):
    total = tp + fp + fn + tn
    precision = _ratio(tp, tp + fp)
    sensitivity = _ratio(tp, tp + fn)
    f1 = _ratio(2 * precision * sensitivity, precision + sensitivity)
    return EvalReport(
        auc=auc,
        threshold=threshold,
        accuracy=_ratio(tp + tn, total),
        specificity=_ratio(tn, tn + fp),
        sensitivity=sensitivity,
        precision=precision,
        f1=f1,
        confusion=(tp, fp, fn, tn),
        precision_undefined=(tp + fp == 0),
    )


def confusion_metrics(scores, labels, threshold, auc=None):
    """Positive prediction iff ``score >= threshold``."""
    if not math.isfinite(threshold):
        raise ValueError("threshold must be finite")
    s = np.asarray(scores, dtype=np.float64).reshape(-1)
    y = np.asarray(labels).reshape(-1).astype(bool)
    pred = s >= threshold
    tp = int(np.sum(pred & y))
    fp = int(np.sum(pred & ~y))
    fn = int(np.sum(~pred & y))
    tn = int(np.sum(~pred & ~y))
    if auc is None:
        auc = roc_auc(s, y) if 0 < y.sum() < y.size else float("nan")
    return report_from_counts(tp, fp, fn, tn, auc, float(threshold))


def evaluate(scores, labels):
    """AUC plus confusion metrics at the Youden-optimal threshold."""
    t = youden_threshold(scores, labels)
    return confusion_metrics(scores, labels, t, roc_auc(scores, labels))


def predicted_score(p):
    """``-log10(p)``, with p clamped below at 1e-12."""
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"predicted value {p} outside [0, 1]")
    return -math.log10(max(p, P_FLOOR))


def _exact_u_pvalue(r2, n_a, u2_obs):
    """Two-sided exact p-value from the permutation distribution of rank sums.

    ``r2`` holds doubled midranks (integers). The count of subsets of size
    ``n_a`` with each doubled rank sum is built by dynamic programming.
    """
    r2 = [int(v) for v in r2]
    top = sum(sorted(r2)[-n_a:])
    # ways[k][s]: subsets of size k with doubled rank sum s
    ways = [np.zeros(top + 1, dtype=object) for _ in range(n_a + 1)]
    ways[0][0] = 1
    for v in r2:
        for k in range(n_a, 0, -1):
            ways[k][v:] = ways[k][v:] + ways[k - 1][:top + 1 - v]
    dist = ways[n_a]
    total = sum(dist)
    base = n_a * (n_a + 1)  # doubled n_a (n_a + 1) / 2
    sums = np.arange(top + 1)
    u2 = sums - base
    lower = sum(dist[u2 <= u2_obs])
    upper = sum(dist[u2 >= u2_obs])
    return min(1.0, 2.0 * float(min(lower, upper)) / float(total))


def rank_sum_test(a, b):
    """Mann-Whitney U of ``a`` against ``b`` and a two-sided p-value.

    Exact permutation p-value when ``len(a) * len(b) <= 400``; otherwise a
    normal approximation with tie and continuity corrections.
    """
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    n_a, n_b = a.size, b.size
    if n_a == 0 or n_b == 0:
        raise ValueError("both samples must be nonempty")
    ranks = rankdata(np.r_[a, b])
    u = float(ranks[:n_a].sum() - n_a * (n_a + 1) / 2.0)
    if n_a * n_b <= EXACT_MAX_PAIRS:
        r2 = np.rint(2 * ranks).astype(np.int64)
        return u, _exact_u_pvalue(r2, n_a, int(round(2 * u)))
    n = n_a + n_b
    _, counts = np.unique(ranks, return_counts=True)
    tie = float(np.sum(counts ** 3 - counts))
    var = n_a * n_b / 12.0 * ((n + 1) - tie / (n * (n - 1)))
    mu = n_a * n_b / 2.0
    if var <= 0:
        return u, 1.0
    z = (abs(u - mu) - 0.5) / math.sqrt(var)
    return u, min(1.0, 2.0 * float(norm.sf(max(z, 0.0))))


def write_roc_csv(path, scores, labels):
    fpr, tpr, thr = roc_curve(scores, labels)
    lines = ["threshold,fpr,tpr"]
    lines += [f"{float(t)!r},{float(f)!r},{float(p)!r}" for t, f, p in zip(thr, fpr, tpr)]
    atomic_write_text(path, "\n".join(lines) + "\n")
