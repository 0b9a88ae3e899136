"""Training material: 20-minute segments, 10-minute fragments, record split.

Training fragments are cut from each labelled segment at a 10-minute step
for normal segments (2 per segment) and a 1-minute step for abnormal ones
(11 per segment). Test material is never oversampled: one fragment per
10 minutes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._io import atomic_write_bytes, atomic_write_text
from .errors import FormatError, RecordTooShort, StratumTooSmall
from .rubric import SEGMENT_MINUTES, SEGMENT_SAMPLES, Segment20, score_segment
from .timeseries import SAMPLES_PER_MINUTE, WINDOW_MINUTES, WINDOW_SAMPLES

NORMAL_STEP_MIN = 10
ABNORMAL_STEP_MIN = 1
FRAGMENT_HEADER = "label,source_record,segment_index,start_offset"


@dataclass(frozen=True, eq=False)
class Fragment:
    """A 10-minute model input.

    ``start_offset`` is the sample offset of the fragment inside its parent
    20-minute segment.
    """

    samples: np.ndarray
    label: int
    record_id: str
    segment_index: int
    start_offset: int

    @property
    def source(self):
        return (self.record_id, self.segment_index, self.start_offset)


@dataclass(frozen=True)
class SplitPlan:
    train_ids: frozenset
    test_ids: frozenset
    seed: int


def segment_record(record):
    """Consecutive non-overlapping 20-minute segments from minute 0."""
    n = len(record) // SEGMENT_SAMPLES
    if n == 0:
        raise RecordTooShort(f"{record.n_minutes} min is shorter than one {SEGMENT_MINUTES}-min segment")
    return [
        Segment20(
            record.samples[i * SEGMENT_SAMPLES:(i + 1) * SEGMENT_SAMPLES],
            record.valid_mask[i * SEGMENT_SAMPLES:(i + 1) * SEGMENT_SAMPLES],
            record.source_id,
            i,
        )
        for i in range(n)
    ]


def label_segments(segments):
    """Score each segment with the rubric; returns ``(segment, label)`` pairs."""
    return [(seg, score_segment(seg).label) for seg in segments]


def _fragments(segment, label, step_min):
    starts = range(0, SEGMENT_MINUTES - WINDOW_MINUTES + 1, step_min)
    out = []
    for s in starts:
        off = s * SAMPLES_PER_MINUTE
        out.append(
            Fragment(
                segment.samples[off:off + WINDOW_SAMPLES].astype(np.float32),
                int(label),
                segment.record_id,
                segment.index,
                off,
            )
        )
    return out


def resample_fragments(labeled_segments):
    """Training fragments: step 10 min for normal segments, 1 min for abnormal."""
    out = []
    for seg, label in labeled_segments:
        out.extend(_fragments(seg, label, ABNORMAL_STEP_MIN if label else NORMAL_STEP_MIN))
    return out


def test_fragments(labeled_segments):
    """Evaluation fragments: both 10-minute halves of each segment, no oversampling."""
    out = []
    for seg, label in labeled_segments:
        out.extend(_fragments(seg, label, NORMAL_STEP_MIN))
    return out


test_fragments.__test__ = False  # not a pytest test


def _allocate(sizes, test_ratio):
    """Per-stratum test counts: floors, then leftover by largest remainder."""
    total = math.floor(sum(sizes) * test_ratio + 0.5)
    exact = [n * test_ratio for n in sizes]
    counts = [math.floor(e) for e in exact]
    order = sorted(range(len(sizes)), key=lambda i: (-(exact[i] - counts[i]), i))
    for i in order[: max(0, total - sum(counts))]:
        counts[i] += 1
    return counts


def stratified_split(records, test_ratio, seed):
    """Split record ids into train/test, stratified on "has an abnormal segment".

    ``records`` is a sequence of ``(record_id, has_abnormal)`` pairs or
    objects exposing ``record_id`` and ``has_abnormal``. Empty strata are
    allowed; a stratum holding a single record is not.
    """
    if not 0 < test_ratio < 1:
        raise ValueError("test_ratio must lie in (0, 1)")
    strata = {False: [], True: []}
    for r in records:
        rid, abn = (r.record_id, r.has_abnormal) if hasattr(r, "record_id") else r
        strata[bool(abn)].append(rid)
    for key, ids in strata.items():
        if len(ids) == 1:
            raise StratumTooSmall(f"{'abnormal' if key else 'normal'} stratum has a single record")
    groups = [sorted(strata[False]), sorted(strata[True])]
    counts = _allocate([len(g) for g in groups], test_ratio)
    rng = np.random.default_rng(seed)
    train, test = set(), set()
    for ids, k in zip(groups, counts):
        perm = rng.permutation(len(ids))
        test.update(ids[i] for i in perm[:k])
        train.update(ids[i] for i in perm[k:])
    return SplitPlan(frozenset(train), frozenset(test), seed)


# fragment store: CSV index + float32 little-endian sample blocks

def write_fragments(stem, fragments):
    """Write ``<stem>.csv`` and ``<stem>.bin``."""
    stem = Path(stem)
    lines = [FRAGMENT_HEADER]
    blocks = []
    for f in fragments:
        lines.append(f"{f.label},{f.record_id},{f.segment_index},{f.start_offset}")
        blocks.append(np.asarray(f.samples, dtype="<f4").tobytes())
    atomic_write_text(stem.with_suffix(".csv"), "\n".join(lines) + "\n")
    atomic_write_bytes(stem.with_suffix(".bin"), b"".join(blocks))


def read_fragments(stem):
    stem = Path(stem)
    rows = stem.with_suffix(".csv").read_text(encoding="utf-8").splitlines()
    if not rows or rows[0] != FRAGMENT_HEADER:
        raise FormatError(f"{stem}.csv: missing fragment header")
    rows = [r for r in rows[1:] if r.strip()]
    raw = np.frombuffer(stem.with_suffix(".bin").read_bytes(), dtype="<f4")
    if raw.size != len(rows) * WINDOW_SAMPLES:
        raise FormatError(f"{stem}.bin holds {raw.size} samples, expected {len(rows) * WINDOW_SAMPLES}")
    blocks = raw.reshape(len(rows), WINDOW_SAMPLES)
    out = []
    for row, block in zip(rows, blocks):
        label, rid, seg, off = row.split(",")
        out.append(Fragment(block.astype(np.float32), int(label), rid, int(seg), int(off)))
    return out


def fragments_as_arrays(fragments):
    x = np.stack([np.asarray(f.samples, dtype=np.float32) for f in fragments])
    y = np.array([f.label for f in fragments], dtype=np.float32)
    return x, y
