"""Rule-based scoring of 20-minute FHR segments.

Each segment starts at 5 points and loses points for an out-of-range
baseline, sustained low or high variability, too few accelerations, and
decelerations of certain durations. Segments keeping more than 3 points are
labelled normal.

Event detection and per-minute amplitudes work on a 1.25 s moving average
of the valid samples; the baseline is the median of raw valid samples.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientSignal
from .timeseries import SAMPLE_RATE_HZ, SAMPLES_PER_MINUTE

SEGMENT_MINUTES = 20
SEGMENT_SAMPLES = SEGMENT_MINUTES * SAMPLES_PER_MINUTE

EXCURSION_BPM = 15.0
MIN_EVENT_SAMPLES = 15 * SAMPLE_RATE_HZ
BRIDGE_SAMPLES = 2 * SAMPLE_RATE_HZ
SMOOTH_SAMPLES = 5
MIN_MINUTE_SAMPLES = SAMPLES_PER_MINUTE // 2

BASELINE_RANGE = (110.0, 160.0)
LOW_VARIABILITY_BPM = 5.0
HIGH_VARIABILITY_BPM = 25.0
MIN_ACCELERATIONS = 2
VARIABLE_DECEL_S = (30.0, 60.0)
PROLONGED_DECEL_S = 180.0

NORMAL = "normal"
ABNORMAL = "abnormal"


@dataclass(frozen=True, eq=False)
class Segment20:
    samples: np.ndarray
    valid_mask: np.ndarray
    record_id: str = ""
    index: int = 0

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.float64)
        m = np.asarray(self.valid_mask, dtype=bool)
        if s.shape != (SEGMENT_SAMPLES,) or m.shape != (SEGMENT_SAMPLES,):
            raise ValueError("a segment holds exactly 4800 samples")
        object.__setattr__(self, "samples", s)
        object.__setattr__(self, "valid_mask", m)

    @classmethod
    def from_array(cls, samples, record_id="", index=0):
        """Build from raw values; zeros and NaNs count as missing."""
        x = np.nan_to_num(np.asarray(samples, dtype=np.float64), nan=0.0)
        valid = x > 0
        return cls(np.where(valid, x, 0.0), valid, record_id, index)


@dataclass(frozen=True)
class Event:
    kind: str  # "acceleration" | "deceleration"
    start_index: int
    duration_s: float
    peak_excursion_bpm: float

    @property
    def stop_index(self):
        return self.start_index + int(round(self.duration_s * SAMPLE_RATE_HZ))


@dataclass
class ScoreCard:
    baseline_bpm: float
    variability_bpm: float
    accelerations: list
    decelerations: list
    deductions: list = field(default_factory=list)
    minute_amplitudes: np.ndarray = None

    @property
    def score(self):
        return max(1, 5 - sum(p for _, p in self.deductions))

    @property
    def binary_label(self):
        return label_for_score(self.score)

    @property
    def label(self):
        """1 for abnormal, 0 for normal."""
        return int(self.binary_label == ABNORMAL)


def label_for_score(score):
    return NORMAL if score > 3 else ABNORMAL


def _check(segment):
    n_valid = np.count_nonzero(segment.valid_mask)
    if n_valid * 2 < segment.samples.size:
        raise InsufficientSignal(f"only {n_valid} of {segment.samples.size} samples valid")


def smoothed(samples, valid_mask, width=SMOOTH_SAMPLES):
    """Centred moving average over valid samples only (invalid stay NaN)."""
    x = np.where(valid_mask, samples, 0.0)
    k = np.ones(width)
    num = np.convolve(x, k, mode="same")
    den = np.convolve(valid_mask.astype(float), k, mode="same")
    out = np.full(x.shape, np.nan)
    np.divide(num, den, out=out, where=(den > 0) & valid_mask)
    return out


def estimate_baseline(segment):
    """Median of valid samples, refined twice by dropping samples >= 15 bpm away."""
    _check(segment)
    v = segment.samples[segment.valid_mask]
    b = float(np.median(v))
    for _ in range(2):
        kept = v[np.abs(v - b) < EXCURSION_BPM]
        if kept.size == 0:
            break
        b = float(np.median(kept))
    return b


def _runs(flag):
    f = np.concatenate([[False], flag, [False]]).astype(np.int8)
    edges = np.flatnonzero(np.diff(f))
    return list(zip(edges[::2].tolist(), edges[1::2].tolist()))


def _threshold_runs(hit, valid_mask):
    """Runs of ``hit`` merged across gaps of at most 2 s of invalid samples."""
    merged = []
    for a, b in _runs(hit):
        if merged:
            pa, pb = merged[-1]
            gap = slice(pb, a)
            if a - pb <= BRIDGE_SAMPLES and not valid_mask[gap].any():
                merged[-1] = (pa, b)
                continue
        merged.append((a, b))
    return merged


def detect_events(segment, baseline):
    """Accelerations and decelerations: runs >= 15 bpm off baseline for >= 15 s."""
    xs = smoothed(segment.samples, segment.valid_mask)
    events = []
    for kind, sign in (("acceleration", 1.0), ("deceleration", -1.0)):
        with np.errstate(invalid="ignore"):
            hit = segment.valid_mask & (sign * (xs - baseline) >= EXCURSION_BPM)
        for a, b in _threshold_runs(hit, segment.valid_mask):
            if b - a < MIN_EVENT_SAMPLES:
                continue
            seg = segment.samples[a:b][segment.valid_mask[a:b]]
            peak = float(np.max(sign * (seg - baseline)))
            events.append(Event(kind, a, (b - a) / SAMPLE_RATE_HZ, peak))
    events.sort(key=lambda e: e.start_index)
    return events


def _event_extent(xs, valid_mask, baseline, event):
    """Widen an event to where the trace returns to baseline on either side."""
    sign = 1.0 if event.kind == "acceleration" else -1.0
    a, b = event.start_index, event.stop_index
    n = xs.size
    while a > 0 and valid_mask[a - 1] and sign * (xs[a - 1] - baseline) > 0:
        a -= 1
    while b < n and valid_mask[b] and sign * (xs[b] - baseline) > 0:
        b += 1
    return a, b


def minute_amplitudes(segment, baseline, events=None):
    """Per-minute max-min of in-band, non-event samples; NaN where under 120 remain."""
    if events is None:
        events = detect_events(segment, baseline)
    xs = smoothed(segment.samples, segment.valid_mask)
    usable = segment.valid_mask.copy()
    with np.errstate(invalid="ignore"):
        usable &= np.abs(xs - baseline) < EXCURSION_BPM
    for ev in events:
        a, b = _event_extent(xs, segment.valid_mask, baseline, ev)
        usable[a:b] = False
    n_min = segment.samples.size // SAMPLES_PER_MINUTE
    amps = np.full(n_min, np.nan)
    for m in range(n_min):
        sl = slice(m * SAMPLES_PER_MINUTE, (m + 1) * SAMPLES_PER_MINUTE)
        vals = xs[sl][usable[sl]]
        if vals.size >= MIN_MINUTE_SAMPLES:
            amps[m] = vals.max() - vals.min()
    return amps


def compute_variability(segment, baseline, events=None):
    amps = minute_amplitudes(segment, baseline, events)
    if np.all(np.isnan(amps)):
        raise InsufficientSignal("no minute has enough in-band samples")
    return float(np.nanmedian(amps))


def _longest_run(flags, known):
    """Longest run of ``flags``; unknown minutes join a run that brackets them
    (or, at either end of the segment, one that borders them)."""
    f = np.asarray(flags, bool) & known
    idx = np.flatnonzero(known)
    if idx.size == 0:
        return 0
    for a, b in zip(idx, idx[1:]):
        if b - a > 1 and f[a] and f[b]:
            f[a + 1:b] = True
    if f[idx[0]]:
        f[:idx[0]] = True
    if f[idx[-1]]:
        f[idx[-1]:] = True
    best = cur = 0
    for v in f:
        cur = cur + 1 if v else 0
        best = max(best, cur)
    return best


def deductions_for(baseline, amplitudes, accelerations, decelerations):
    """Point deductions as ``(rule_id, points)`` pairs.

    NaN amplitudes (excluded minutes) count toward a sustained-variability
    run that brackets them, or borders them at a segment edge.
    """
    out = []
    known = ~np.isnan(amplitudes)
    if not BASELINE_RANGE[0] <= baseline <= BASELINE_RANGE[1]:
        out.append(("baseline", 1))
    with np.errstate(invalid="ignore"):
        low = _longest_run(amplitudes <= LOW_VARIABILITY_BPM, known)
        high = _longest_run(amplitudes > HIGH_VARIABILITY_BPM, known)
    if low >= 20:
        out.append(("low_variability_20min", 2))
    elif low >= 10:
        out.append(("low_variability_10min", 1))
    if high >= 20:
        out.append(("high_variability_20min", 1))
    if len(accelerations) < MIN_ACCELERATIONS:
        out.append(("accelerations", 1))
    for d in decelerations:
        if d.duration_s > PROLONGED_DECEL_S:
            out.append(("prolonged_deceleration", 2))
        elif VARIABLE_DECEL_S[0] <= d.duration_s <= VARIABLE_DECEL_S[1]:
            out.append(("variable_deceleration", 1))
    return out


def score_segment(segment):
    baseline = estimate_baseline(segment)
    events = detect_events(segment, baseline)
    amps = minute_amplitudes(segment, baseline, events)
    if np.all(np.isnan(amps)):
        raise InsufficientSignal("no minute has enough in-band samples")
    acc = [e for e in events if e.kind == "acceleration"]
    dec = [e for e in events if e.kind == "deceleration"]
    return ScoreCard(
        baseline_bpm=baseline,
        variability_bpm=float(np.nanmedian(amps)),
        accelerations=acc,
        decelerations=dec,
        deductions=deductions_for(baseline, amps, acc, dec),
        minute_amplitudes=amps,
    )


def format_deductions(deductions):
    return ";".join(f"{rule}:-{pts}" for rule, pts in deductions)
