"""Core data model for 4 Hz fetal heart-rate records.

A record is a flat array of bpm values sampled four times per second. Missing
samples are stored as ``0.0`` with ``valid_mask`` false. All downstream
stages (rubric, windows, fusion) index the record in whole minutes of 240
samples.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyRecord, RecordTooShort, WindowOutOfRange

SAMPLE_RATE_HZ = 4
SAMPLES_PER_MINUTE = 60 * SAMPLE_RATE_HZ
WINDOW_MINUTES = 10
WINDOW_SAMPLES = WINDOW_MINUTES * SAMPLES_PER_MINUTE

# outside this band a value is treated as a dropout
MIN_VALID_BPM = 30.0
MAX_VALID_BPM = 250.0


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class FhrRecord:
    """Zero-filled 4 Hz heart-rate series.

    Use :meth:`from_samples` to build one from raw values; the constructor
    itself only checks invariants.

    Attributes:
        samples: bpm values, ``0.0`` where missing.
        valid_mask: ``True`` where the sample carries a measurement.
        splices: ``(post_splice_index, excised_samples)`` pairs recorded
            when long gaps were cut out.
        source_id: opaque identifier carried through to reports.
    """

    samples: np.ndarray
    valid_mask: np.ndarray
    splices: tuple = ()
    source_id: str = ""
    sample_rate: int = field(default=SAMPLE_RATE_HZ, init=False)

    def __post_init__(self):
        samples = _frozen(self.samples, np.float64)
        mask = _frozen(self.valid_mask, bool)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "valid_mask", mask)
        object.__setattr__(self, "splices", tuple((int(i), int(n)) for i, n in self.splices))
        if samples.ndim != 1 or samples.shape != mask.shape:
            raise ValueError("samples and valid_mask must be 1-D and equal length")
        if np.any(samples[~mask] != 0.0):
            raise ValueError("invalid samples must be zero")
        v = samples[mask]
        if v.size and (v.min() < MIN_VALID_BPM or v.max() > MAX_VALID_BPM):
            raise ValueError("valid samples must lie in [30, 250] bpm")
        prev = -1
        for idx, n in self.splices:
            if idx <= prev or idx > samples.size or n <= 0:
                raise ValueError(f"bad splice entry {(idx, n)}")
            prev = idx

    @classmethod
    def from_samples(cls, samples, valid_mask=None, splices=(), source_id=""):
        """Build a record, marking zero, non-finite or out-of-band values missing."""
        x = np.asarray(samples, dtype=np.float64)
        ok = np.isfinite(x) & (x >= MIN_VALID_BPM) & (x <= MAX_VALID_BPM)
        if valid_mask is not None:
            ok &= np.asarray(valid_mask, dtype=bool)
        x = np.where(ok, x, 0.0)
        return cls(x, ok, splices, source_id)

    def __len__(self):
        return self.samples.size

    def __eq__(self, other):
        if not isinstance(other, FhrRecord):
            return NotImplemented
        return (
            self.source_id == other.source_id
            and self.splices == other.splices
            and np.array_equal(self.samples, other.samples)
            and np.array_equal(self.valid_mask, other.valid_mask)
        )

    @property
    def n_minutes(self):
        return self.samples.size // SAMPLES_PER_MINUTE

    def slice(self, start, stop):
        """Plain sample slice as a new record; splices are not carried over."""
        return FhrRecord(self.samples[start:stop], self.valid_mask[start:stop], (), self.source_id)


@dataclass(frozen=True, eq=False)
class MinuteUnit:
    index: int
    samples: np.ndarray
    valid_mask: np.ndarray

    def __post_init__(self):
        if len(self.samples) != SAMPLES_PER_MINUTE:
            raise ValueError("a minute unit holds exactly 240 samples")


@dataclass(frozen=True, eq=False)
class Window:
    """Ten consecutive minutes (2400 samples) starting at ``start_minute``."""

    start_minute: int
    samples: np.ndarray
    valid_mask: np.ndarray

    def __post_init__(self):
        if len(self.samples) != WINDOW_SAMPLES:
            raise ValueError("a window holds exactly 2400 samples")

    @property
    def minutes(self):
        return range(self.start_minute, self.start_minute + WINDOW_MINUTES)


def minute_units(record):
    """Split a record into whole minutes; a trailing partial minute is dropped."""
    m = record.n_minutes
    if m == 0:
        raise RecordTooShort(f"record has {len(record)} samples, need at least {SAMPLES_PER_MINUTE}")
    return [
        MinuteUnit(
            i,
            record.samples[i * SAMPLES_PER_MINUTE:(i + 1) * SAMPLES_PER_MINUTE],
            record.valid_mask[i * SAMPLES_PER_MINUTE:(i + 1) * SAMPLES_PER_MINUTE],
        )
        for i in range(m)
    ]


def window_at(record, start_minute):
    m = record.n_minutes
    if start_minute < 0 or start_minute + WINDOW_MINUTES > m:
        raise WindowOutOfRange(f"start minute {start_minute} invalid for a {m}-minute record")
    a = start_minute * SAMPLES_PER_MINUTE
    b = a + WINDOW_SAMPLES
    return Window(start_minute, record.samples[a:b], record.valid_mask[a:b])


def windows(record):
    """All 10-minute windows at 1-minute stride."""
    return [window_at(record, s) for s in range(record.n_minutes - WINDOW_MINUTES + 1)]


def valid_fraction(record):
    if len(record) == 0:
        raise EmptyRecord("record has no samples")
    return float(np.count_nonzero(record.valid_mask)) / len(record)
