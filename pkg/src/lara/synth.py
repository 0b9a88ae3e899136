"""Synthetic FHR records with known ground truth.

Signal model::

    fhr(t) = baseline + (1 - env(t)) * variability(t) + sum(+-A_i * trap_i(t)) + noise

``variability`` is a mixture of sinusoids whose periods all divide 60 s, so
every whole minute has exactly the requested peak-to-peak swing. ``trap_i``
are trapezoids (10% rise, 80% plateau, 10% fall) and ``env`` is their
pointwise maximum; variability is faded out under events so that the
ground-truth event durations stay unambiguous.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import rubric
from ._io import atomic_write_text
from .errors import SpecError
from .ingest import SAMPLE_PERIOD_MS
from .timeseries import SAMPLE_RATE_HZ, SAMPLES_PER_MINUTE, FhrRecord

# all divide 60 s; short periods get small weights
_PERIODS_S = np.array([2.0, 3.0, 4.0, 5.0, 6.0, 10.0, 12.0, 15.0, 20.0, 30.0])
_N_COMPONENTS = 5
_RAMP = 0.1


@dataclass(frozen=True)
class SynthSpec:
    """Parameters of one synthetic record.

    Event tuples are ``(start_s, duration_s, amplitude_bpm)``; dropout and
    variability-override tuples are ``(start_s, duration_s)`` and
    ``(start_s, duration_s, peak_to_peak_bpm)``.
    """

    duration_min: float = 20.0
    baseline_bpm: float = 140.0
    variability_bpm: float = 10.0
    accel_events: tuple = ()
    decel_events: tuple = ()
    dropout_runs: tuple = ()
    noise_sd_bpm: float = 0.0
    seed: int = 0
    variability_segments: tuple = ()
    source_id: str = "synth"

    @property
    def n_samples(self):
        return int(round(self.duration_min * SAMPLES_PER_MINUTE))


@dataclass(frozen=True)
class GroundTruth:
    expected_baseline: float
    expected_events: tuple
    expected_scores: tuple  # one per full 20-minute segment

    @property
    def expected_score(self):
        return self.expected_scores[0] if self.expected_scores else None

    @property
    def expected_labels(self):
        return tuple(int(s <= 3) for s in self.expected_scores)


def _validate(spec):
    total_s = spec.n_samples / SAMPLE_RATE_HZ
    if spec.n_samples <= 0:
        raise SpecError("duration must be positive")
    spans = []
    for kind, evs in (("acceleration", spec.accel_events), ("deceleration", spec.decel_events)):
        for start, dur, amp in evs:
            if dur <= 0 or amp <= 0:
                raise SpecError(f"{kind} needs positive duration and amplitude")
            if start < 0 or start + dur > total_s:
                raise SpecError(f"{kind} at {start}s exceeds the record")
            spans.append((start, start + dur))
    spans.sort()
    for (a0, a1), (b0, b1) in zip(spans, spans[1:]):
        if b0 < a1:
            raise SpecError(f"events overlap at {b0}s")
    for start, dur in spec.dropout_runs:
        if dur <= 0 or start < 0 or start + dur > total_s:
            raise SpecError("dropout run outside the record")
    for start, dur, pp in spec.variability_segments:
        if dur <= 0 or pp < 0 or start < 0 or start + dur > total_s:
            raise SpecError("bad variability override")
    if spec.variability_bpm < 0 or spec.noise_sd_bpm < 0:
        raise SpecError("variability and noise must be non-negative")


def unit_variability(n, rng):
    """Zero-mean sinusoid mixture with peak-to-peak exactly 1 over each minute."""
    t = np.arange(SAMPLES_PER_MINUTE) / SAMPLE_RATE_HZ
    periods = rng.choice(_PERIODS_S, size=_N_COMPONENTS, replace=False)
    phases = rng.uniform(0, 2 * np.pi, size=_N_COMPONENTS)
    weights = periods * rng.uniform(0.5, 1.0, size=_N_COMPONENTS)
    cycle = (weights[:, None] * np.sin(2 * np.pi * t[None, :] / periods[:, None] + phases[:, None])).sum(0)
    cycle = (cycle - 0.5 * (cycle.max() + cycle.min())) / (cycle.max() - cycle.min())
    reps = -(-n // SAMPLES_PER_MINUTE)
    return np.tile(cycle, reps)[:n]


def trapezoid(n, start_s, duration_s):
    t = np.arange(n) / SAMPLE_RATE_HZ - start_s
    ramp = _RAMP * duration_s
    env = np.clip(np.minimum(t, duration_s - t) / ramp, 0.0, 1.0)
    return env


def _pp_profile(spec, n):
    pp = np.full(n, float(spec.variability_bpm))
    for start, dur, value in spec.variability_segments:
        a = int(round(start * SAMPLE_RATE_HZ))
        b = int(round((start + dur) * SAMPLE_RATE_HZ))
        pp[a:b] = value
    return pp


def expected_event(kind, start_s, duration_s, amp):
    """The event the rubric should detect for a noise-free trapezoid, or None."""
    if amp < rubric.EXCURSION_BPM:
        return None
    lead = _RAMP * duration_s * rubric.EXCURSION_BPM / amp
    dur = duration_s - 2 * lead
    if dur * SAMPLE_RATE_HZ < rubric.MIN_EVENT_SAMPLES:
        return None
    return rubric.Event(kind, int(round((start_s + lead) * SAMPLE_RATE_HZ)), dur, float(amp))


def _expected_scores(spec, n, events, pp):
    scores = []
    excluded = np.zeros(n, bool)
    for _, evs in (("a", spec.accel_events), ("d", spec.decel_events)):
        for start, dur, _amp in evs:
            a = int(np.floor(start * SAMPLE_RATE_HZ))
            b = int(np.ceil((start + dur) * SAMPLE_RATE_HZ))
            excluded[a:b] = True
    dropped = np.zeros(n, bool)
    for start, dur in spec.dropout_runs:
        dropped[int(round(start * SAMPLE_RATE_HZ)):int(round((start + dur) * SAMPLE_RATE_HZ))] = True
    for s in range(n // rubric.SEGMENT_SAMPLES):
        lo, hi = s * rubric.SEGMENT_SAMPLES, (s + 1) * rubric.SEGMENT_SAMPLES
        amps = []
        for m in range(rubric.SEGMENT_MINUTES):
            sl = slice(lo + m * SAMPLES_PER_MINUTE, lo + (m + 1) * SAMPLES_PER_MINUTE)
            usable = ~(excluded[sl] | dropped[sl])
            amps.append(float(np.median(pp[sl])) if usable.sum() >= rubric.MIN_MINUTE_SAMPLES else np.nan)
        seg_events = [e for e in events if lo <= e.start_index < hi]
        acc = [e for e in seg_events if e.kind == "acceleration"]
        dec = [e for e in seg_events if e.kind == "deceleration"]
        ded = rubric.deductions_for(spec.baseline_bpm, np.array(amps), acc, dec)
        scores.append(max(1, 5 - sum(p for _, p in ded)))
    return tuple(scores)


def generate(spec):
    """Render ``spec`` into an :class:`FhrRecord` plus its :class:`GroundTruth`."""
    _validate(spec)
    n = spec.n_samples
    rng = np.random.default_rng(spec.seed)
    pp = _pp_profile(spec, n)
    variability = unit_variability(n, rng) * pp

    env = np.zeros(n)
    bumps = np.zeros(n)
    events = []
    for kind, sign, evs in (
        ("acceleration", 1.0, spec.accel_events),
        ("deceleration", -1.0, spec.decel_events),
    ):
        for start, dur, amp in evs:
            tr = trapezoid(n, start, dur)
            env = np.maximum(env, tr)
            bumps += sign * amp * tr
            ev = expected_event(kind, start, dur, amp)
            if ev is not None:
                events.append(ev)
    events.sort(key=lambda e: e.start_index)

    noise = rng.normal(0.0, spec.noise_sd_bpm, n) if spec.noise_sd_bpm > 0 else np.zeros(n)
    x = spec.baseline_bpm + (1.0 - env) * variability + bumps + noise
    valid = np.ones(n, bool)
    for start, dur in spec.dropout_runs:
        valid[int(round(start * SAMPLE_RATE_HZ)):int(round((start + dur) * SAMPLE_RATE_HZ))] = False
    record = FhrRecord.from_samples(x, valid, (), spec.source_id)
    truth = GroundTruth(float(spec.baseline_bpm), tuple(events), _expected_scores(spec, n, events, pp))
    return record, truth


# cohorts

def _place(rng, n_events, lo_s, hi_s, durations, margin_s=20.0):
    """Spread events over [lo_s, hi_s) one per equal slot, jittered within slot."""
    if n_events == 0:
        return []
    slot = (hi_s - lo_s) / n_events
    starts = []
    for i, d in enumerate(durations):
        a = lo_s + i * slot + margin_s
        b = lo_s + (i + 1) * slot - margin_s - d
        starts.append(float(rng.uniform(a, max(a, b))))
    return starts


def _events(rng, count, lo_s, hi_s, dur_range, amp_range):
    durs = rng.uniform(*dur_range, size=count)
    amps = rng.uniform(*amp_range, size=count)
    starts = _place(rng, count, lo_s, hi_s, durs)
    return [(round(s, 2), round(float(d), 2), round(float(a), 2)) for s, d, a in zip(starts, durs, amps)]


def _segment_plan(rng, abnormal, seg_start_s):
    """Events and variability for one 20-minute segment."""
    end_s = seg_start_s + rubric.SEGMENT_MINUTES * 60
    half_s = seg_start_s + rubric.SEGMENT_MINUTES * 30
    acc, dec, var = [], [], []
    if not abnormal:
        acc = _events(rng, int(rng.integers(3, 5)), seg_start_s, end_s, (20, 35), (20, 30))
        return acc, dec, var
    pattern = rng.integers(3)
    if pattern == 0:
        # reduced variability throughout, at most one acceleration
        var = [(seg_start_s, rubric.SEGMENT_MINUTES * 60.0, float(rng.uniform(1.0, 3.0)))]
        acc = _events(rng, int(rng.integers(0, 2)), seg_start_s, end_s, (20, 30), (20, 30))
    elif pattern == 1:
        # one variable deceleration in each half, no accelerations
        dec = _events(rng, 1, seg_start_s, half_s, (38, 55), (25, 40))
        dec += _events(rng, 1, half_s, end_s, (38, 55), (25, 40))
    else:
        # one prolonged deceleration in each half
        dec = _events(rng, 1, seg_start_s, half_s, (220, 250), (25, 40))
        dec += _events(rng, 1, half_s, end_s, (220, 250), (25, 40))
    return acc, dec, var


def cohort_spec(abnormal, seed, duration_min=20.0, source_id="synth"):
    """Draw one record spec; normal records score 5, abnormal ones at most 3."""
    rng = np.random.default_rng(seed)
    acc, dec, var = [], [], []
    n_seg = int(duration_min // rubric.SEGMENT_MINUTES)
    for s in range(n_seg):
        a, d, v = _segment_plan(rng, abnormal, s * rubric.SEGMENT_MINUTES * 60.0)
        acc += a
        dec += d
        var += v
    drops = []
    for _ in range(int(rng.integers(0, 3))):
        start = float(rng.uniform(0, duration_min * 60 - 10))
        drops.append((round(start, 2), round(float(rng.uniform(1.0, 6.0)), 2)))
    drops = [d for d in drops if not any(_overlaps(d, e) for e in acc + dec)]
    return SynthSpec(
        duration_min=duration_min,
        baseline_bpm=round(float(rng.uniform(120, 150)), 2),
        variability_bpm=round(float(rng.uniform(8, 18)), 2),
        accel_events=tuple(acc),
        decel_events=tuple(dec),
        dropout_runs=tuple(sorted(drops)),
        noise_sd_bpm=round(float(rng.uniform(0.2, 0.6)), 3),
        seed=int(rng.integers(2**31)),
        variability_segments=tuple(var),
        source_id=source_id,
    )


def _overlaps(drop, event, pad_s=5.0):
    ds, dd = drop
    es, ed = event[0], event[1]
    return ds < es + ed + pad_s and es - pad_s < ds + dd


@dataclass
class LabeledRecord:
    record: FhrRecord
    segment_labels: tuple
    truth: GroundTruth = field(default=None, repr=False)

    @property
    def record_id(self):
        return self.record.source_id

    @property
    def has_abnormal(self):
        return any(self.segment_labels)


def generate_cohort(n_normal, n_abnormal, seed, duration_min=20.0):
    """Labelled synthetic records: ``n_normal`` first, then ``n_abnormal``.

    Labels come from each record's ground truth (1 = abnormal segment).
    """
    seeds = np.random.SeedSequence(seed).generate_state(n_normal + n_abnormal)
    out = []
    for i, s in enumerate(seeds):
        abnormal = i >= n_normal
        rid = f"{'abn' if abnormal else 'nor'}{i:04d}"
        spec = cohort_spec(abnormal, int(s), duration_min, rid)
        rec, truth = generate(spec)
        out.append(LabeledRecord(rec, truth.expected_labels, truth))
    return out


def write_raw_csv(path, record, start_ms=0):
    """Write a record in the raw ingest format; dropouts become empty fields."""
    lines = ["timestamp_ms,fhr_bpm"]
    for i, (v, ok) in enumerate(zip(record.samples.tolist(), record.valid_mask.tolist())):
        lines.append(f"{start_ms + i * SAMPLE_PERIOD_MS},{round(v, 2) if ok else ''}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def write_truth_csv(path, truth):
    lines = [
        f"# expected_baseline={truth.expected_baseline}",
        "# expected_scores=" + ",".join(str(s) for s in truth.expected_scores),
        "kind,start_index,duration_s,peak_excursion_bpm",
    ]
    for e in truth.expected_events:
        lines.append(f"{e.kind},{e.start_index},{e.duration_s!r},{e.peak_excursion_bpm!r}")
    atomic_write_text(path, "\n".join(lines) + "\n")
