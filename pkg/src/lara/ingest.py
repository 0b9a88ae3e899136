"""Raw FHR file parsing and preprocessing.

Input is a two-column CSV (``timestamp_ms,fhr_bpm``) with one row per
sample. Dropouts are zero-filled on a regular 250 ms grid (no interpolation)
and invalid runs longer than ten minutes are excised, with each cut logged
in the record's splice list.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from ._io import atomic_write_text
from .errors import EmptyRecord, ParseError, TimestampOrderError
from .timeseries import SAMPLES_PER_MINUTE, FhrRecord, valid_fraction

SAMPLE_PERIOD_MS = 250
HEADER = "timestamp_ms,fhr_bpm"
CANONICAL_HEADER = "minute,sample_offset,fhr_bpm,valid"


@dataclass(frozen=True)
class RawRecord:
    """Rows as read from file; ``fhr_bpm`` is ``None`` for missing samples."""

    rows: tuple

    @property
    def timestamps(self):
        return [t for t, _ in self.rows]

    @classmethod
    def from_record(cls, record, start_ms=0):
        rows = tuple(
            (start_ms + i * SAMPLE_PERIOD_MS, float(v) if ok else None)
            for i, (v, ok) in enumerate(zip(record.samples, record.valid_mask))
        )
        return cls(rows)


def _text_lines(stream):
    if isinstance(stream, (bytes, bytearray)):
        return bytes(stream).decode("utf-8").splitlines()
    if isinstance(stream, str):
        return stream.splitlines()
    data = stream.read()
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    return data.splitlines()


def parse_csv(stream):
    """Parse ``timestamp_ms,fhr_bpm`` rows.

    ``stream`` may be bytes, text, or a file object. The header line is
    optional. An empty ``fhr_bpm`` field or a value of 0 marks a missing
    sample. Errors report 1-based physical line numbers.
    """
    rows = []
    last_t = None
    for lineno, line in enumerate(_text_lines(stream), start=1):
        line = line.strip()
        if not line:
            continue
        if lineno == 1 and line.replace(" ", "") == HEADER:
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise ParseError(lineno, f"expected 2 fields, got {len(parts)}")
        t_txt, v_txt = parts[0].strip(), parts[1].strip()
        try:
            t = int(t_txt)
        except ValueError:
            raise ParseError(lineno, f"bad timestamp {t_txt!r}") from None
        if v_txt == "":
            v = None
        else:
            try:
                v = float(v_txt)
            except ValueError:
                raise ParseError(lineno, f"bad fhr value {v_txt!r}") from None
            if not np.isfinite(v):
                raise ParseError(lineno, f"bad fhr value {v_txt!r}")
            if v == 0.0:
                v = None
        if last_t is not None and t <= last_t:
            raise TimestampOrderError(lineno)
        last_t = t
        rows.append((t, v))
    return RawRecord(tuple(rows))


def zero_fill(raw, source_id=""):
    """Place rows on a regular 4 Hz grid spanning first to last timestamp.

    Grid points with no row, and rows marked missing, become 0 with the mask
    false. Rows off the grid snap to the nearest grid point; if two rows
    snap to the same point the first one wins.
    """
    if not raw.rows:
        return FhrRecord(np.zeros(0), np.zeros(0, bool), (), source_id)
    t0 = raw.rows[0][0]
    n = int(round((raw.rows[-1][0] - t0) / SAMPLE_PERIOD_MS)) + 1
    values = np.zeros(n)
    filled = np.zeros(n, bool)
    for t, v in raw.rows:
        i = int(round((t - t0) / SAMPLE_PERIOD_MS))
        if filled[i]:
            continue
        filled[i] = True
        if v is not None:
            values[i] = v
    return FhrRecord.from_samples(values, values != 0.0, (), source_id)


def invalid_runs(mask):
    """``(start, stop)`` for each maximal run of ``False`` in ``mask``."""
    bad = np.concatenate([[False], ~np.asarray(mask, bool), [False]])
    edges = np.flatnonzero(np.diff(bad.astype(np.int8)))
    return list(zip(edges[::2].tolist(), edges[1::2].tolist()))


def excise_long_gaps(record, threshold_min=10):
    """Cut out every invalid run lasting longer than ``threshold_min`` minutes."""
    if threshold_min <= 0:
        raise ValueError("threshold_min must be positive")
    limit = threshold_min * SAMPLES_PER_MINUTE
    cuts = [(a, b) for a, b in invalid_runs(record.valid_mask) if b - a > limit]
    if not cuts:
        return record

    keep = np.ones(len(record), bool)
    for a, b in cuts:
        keep[a:b] = False
    removed_before = np.concatenate([[0], np.cumsum(~keep)])

    # keyed by post-splice index; entries landing on the same index merge
    splices = {}
    for idx, n in record.splices:
        new_idx = idx - int(removed_before[idx])
        splices[new_idx] = splices.get(new_idx, 0) + n
    for a, b in cuts:
        new_idx = a - int(removed_before[a])
        splices[new_idx] = splices.get(new_idx, 0) + (b - a)

    return FhrRecord(
        record.samples[keep],
        record.valid_mask[keep],
        tuple(sorted(splices.items())),
        record.source_id,
    )


@dataclass(frozen=True)
class GateResult:
    accepted: bool
    reason: str = ""

    def __bool__(self):
        return self.accepted


def quality_gate(record, max_loss=0.5):
    """Reject a record that lost more than ``max_loss`` of its samples."""
    if len(record) == 0:
        raise EmptyRecord("record has no samples")
    frac = valid_fraction(record)
    if frac < 1.0 - max_loss:
        return GateResult(False, f"signal loss {1.0 - frac:.1%} exceeds {max_loss:.0%}")
    return GateResult(True)


def preprocess(raw, source_id="", threshold_min=10, max_loss=0.5):
    """zero_fill -> quality_gate -> excise_long_gaps.

    The gate sees the record before excision so that excised gaps still
    count as lost signal. Returns ``(record, gate)``; the record is excised
    even when rejected so callers can still inspect it.
    """
    record = zero_fill(raw, source_id)
    gate = quality_gate(record, max_loss)
    return excise_long_gaps(record, threshold_min), gate


# canonical processed form

def dumps_record(record):
    """Serialize a record to the canonical CSV text."""
    out = io.StringIO()
    out.write(f"# source_id={record.source_id}\n")
    out.write(f"# sample_rate={record.sample_rate}\n")
    out.write("# splices=" + ";".join(f"{i}:{n}" for i, n in record.splices) + "\n")
    out.write(CANONICAL_HEADER + "\n")
    for k, (v, ok) in enumerate(zip(record.samples.tolist(), record.valid_mask.tolist())):
        m, off = divmod(k, SAMPLES_PER_MINUTE)
        out.write(f"{m},{off},{v!r},{int(ok)}\n")
    return out.getvalue()


def loads_record(text):
    meta = {}
    values, mask = [], []
    expect = 0
    header_seen = False
    for lineno, line in enumerate(text.splitlines(), start=1):
        if line.startswith("#"):
            key, _, val = line[1:].strip().partition("=")
            meta[key.strip()] = val.strip()
            continue
        if not line.strip():
            continue
        if not header_seen:
            if line.strip() != CANONICAL_HEADER:
                raise ParseError(lineno, "missing canonical header")
            header_seen = True
            continue
        try:
            m, off, v, ok = line.split(",")
            m, off, v, ok = int(m), int(off), float(v), int(ok)
        except ValueError:
            raise ParseError(lineno) from None
        if m * SAMPLES_PER_MINUTE + off != expect:
            raise ParseError(lineno, "sample out of sequence")
        expect += 1
        values.append(v)
        mask.append(bool(ok))
    splices = []
    if meta.get("splices"):
        for item in meta["splices"].split(";"):
            i, n = item.split(":")
            splices.append((int(i), int(n)))
    return FhrRecord(np.array(values), np.array(mask, bool), tuple(splices), meta.get("source_id", ""))


def write_record(path, record):
    atomic_write_text(path, dumps_record(record))


def read_record(path):
    with open(path, encoding="utf-8") as fh:
        return loads_record(fh.read())


def read_raw_csv(path):
    with open(path, "rb") as fh:
        return parse_csv(fh)
