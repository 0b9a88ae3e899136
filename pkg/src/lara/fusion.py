"""Sliding-window scan of long records and minute-level risk fusion.

A record of T minutes is scanned by 10-minute windows at a 1-minute step, so
minute m is covered by every window starting in [m - 9, m] that fits. The
predictions covering a minute are fused into its risk index (mRI) by one of
three operators; the record's RI is the mean mRI.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._io import atomic_write_text
from .errors import EmptyAggregate, RecordTooShort, ShapeError
from .gradcam import cam_pass, minute_cam_means, normalize, upsample
from .timeseries import WINDOW_MINUTES, WINDOW_SAMPLES, window_at

OPERATORS = ("basic", "rs", "cw")
RDM_HEADER = "minute,mri_basic,mri_rs,mri_cw,window_count"
SCAN_CHUNK = 8


@dataclass(frozen=True, eq=False)
class WindowPredictions:
    """Per-window outputs for starts ``0 .. n_minutes - 10``."""

    p: np.ndarray  # (W,)
    cam_means: np.ndarray  # (W, 10)
    n_minutes: int
    splices: tuple = ()

    def __post_init__(self):
        p = np.asarray(self.p, dtype=np.float64)
        c = np.asarray(self.cam_means, dtype=np.float64)
        w = self.n_minutes - WINDOW_MINUTES + 1
        if w < 1 or p.shape != (w,) or c.shape != (w, WINDOW_MINUTES):
            raise ShapeError(f"{self.n_minutes} minutes need {max(w, 0)} windows with 10 cam means each")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "cam_means", c)


@dataclass(frozen=True, eq=False)
class RiskProfile:
    operator: str
    mri: np.ndarray
    ri: float
    window_counts: np.ndarray
    splices: tuple = field(default=())


def thread_count():
    try:
        n = int(os.environ.get("LARA_THREADS", "1"))
    except ValueError:
        n = 1
    return max(1, n)


def _predict_with_cams(model, x):
    """Eval-mode probabilities and minute cam means for a block of windows."""
    p, raw = cam_pass(model, x)
    means = [minute_cam_means(normalize(upsample(r, WINDOW_SAMPLES))) for r in raw]
    return p, np.array(means)


def scan(model, record, chunk=SCAN_CHUNK):
    """Predict every 10-minute window of ``record`` at a 1-minute step.

    Chunks of windows may run on ``LARA_THREADS`` threads; results are
    always assembled in start-minute order.
    """
    t = record.n_minutes
    if t < WINDOW_MINUTES:
        raise RecordTooShort(f"record has {t} whole minutes, need at least {WINDOW_MINUTES}")
    x = np.stack([window_at(record, s).samples for s in range(t - WINDOW_MINUTES + 1)])
    blocks = [x[i:i + chunk] for i in range(0, len(x), chunk)]
    workers = min(thread_count(), len(blocks))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(lambda b: _predict_with_cams(model, b), blocks))
    else:
        results = [_predict_with_cams(model, b) for b in blocks]
    p = np.concatenate([r[0] for r in results])
    cams = np.concatenate([r[1] for r in results])
    return WindowPredictions(p, cams, t, tuple(record.splices))


def _values(values):
    v = np.asarray(values, dtype=np.float64).reshape(-1)
    if v.size == 0:
        raise EmptyAggregate("no predictions to aggregate")
    return v


def basic_op(values):
    return float(_values(values).mean())


def rs_op(values):
    """Exponentially up-weights the larger predictions: weights e^(x - mean)."""
    v = _values(values)
    w = np.exp(v - v.mean())
    return float(np.dot(w, v) / w.sum())


def cw_op(values, cams):
    """Cam-weighted mean; falls back to the plain mean if all cams are zero."""
    v = _values(values)
    c = np.asarray(cams, dtype=np.float64).reshape(-1)
    if c.shape != v.shape:
        raise ShapeError(f"{v.size} predictions but {c.size} cam weights")
    if np.any(c < 0):
        raise ValueError("cam weights must be non-negative")
    total = c.sum()
    if total == 0:
        return basic_op(v)
    return float(np.dot(c, v) / total)


def coverage(n_minutes):
    """Window start range ``(first, last)`` covering each minute."""
    m = np.arange(n_minutes)
    return np.maximum(0, m - (WINDOW_MINUTES - 1)), np.minimum(m, n_minutes - WINDOW_MINUTES)


def window_counts(n_minutes):
    lo, hi = coverage(n_minutes)
    return hi - lo + 1


def risk_profile(wp, operator="basic"):
    if operator not in OPERATORS:
        raise ValueError(f"operator must be one of {OPERATORS}")
    t = wp.n_minutes
    lo, hi = coverage(t)
    mri = np.empty(t)
    for m in range(t):
        ws = np.arange(lo[m], hi[m] + 1)
        vals = wp.p[ws]
        if operator == "basic":
            mri[m] = basic_op(vals)
        elif operator == "rs":
            mri[m] = rs_op(vals)
        else:
            mri[m] = cw_op(vals, wp.cam_means[ws, m - ws])
    return RiskProfile(operator, mri, risk_index(mri), hi - lo + 1, wp.splices)


def risk_index(profile):
    mri = profile.mri if isinstance(profile, RiskProfile) else np.asarray(profile, dtype=np.float64)
    if mri.size == 0:
        raise EmptyAggregate("empty risk profile")
    return float(mri.mean())


def risk_profiles(wp):
    return {op: risk_profile(wp, op) for op in OPERATORS}


def format_rdm(profiles):
    b, r, c = profiles["basic"], profiles["rs"], profiles["cw"]
    lines = [RDM_HEADER]
    for m in range(b.mri.size):
        lines.append(f"{m},{float(b.mri[m])!r},{float(r.mri[m])!r},{float(c.mri[m])!r},{int(b.window_counts[m])}")
    lines.append(f"# RI_basic={float(b.ri)!r} RI_rs={float(r.ri)!r} RI_cw={float(c.ri)!r}")
    return "\n".join(lines) + "\n"


def write_rdm(path, profiles):
    atomic_write_text(path, format_rdm(profiles))


def read_rdm(path):
    """Returns ``(rows, ri)`` where rows are ``(minute, basic, rs, cw, count)``."""
    rows, ri = [], {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line == RDM_HEADER:
                continue
            if line.startswith("#"):
                for tok in line[1:].split():
                    k, _, v = tok.partition("=")
                    ri[k.removeprefix("RI_")] = float(v)
                continue
            m, a, b, c, n = line.split(",")
            rows.append((int(m), float(a), float(b), float(c), int(n)))
    return rows, ri
