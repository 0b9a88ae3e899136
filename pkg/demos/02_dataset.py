"""From labelled records to training fragments and a record-level split."""

from collections import Counter

from lara.dataset import label_segments, resample_fragments, segment_record, stratified_split, test_fragments
from lara.synth import generate_cohort

cohort = generate_cohort(20, 20, seed=0, duration_min=40)
print("records:", len(cohort), " abnormal records:", sum(r.has_abnormal for r in cohort))

# split by record so no segment of a test record is ever trained on
plan = stratified_split(cohort, 0.2, seed=0)
print("train records:", len(plan.train_ids), " test records:", len(plan.test_ids))
assert not plan.train_ids & plan.test_ids


def pairs(ids):
    out = []
    for r in cohort:
        if r.record_id in ids:
            out += label_segments(segment_record(r.record))
    return out


train_pairs = pairs(plan.train_ids)
print("train segments by label:", Counter(lbl for _, lbl in train_pairs))

# abnormal segments are cut at a 1-minute step (11 fragments each) and
# normal ones at a 10-minute step (2 each), which evens out the classes
train = resample_fragments(train_pairs)
print("train fragments by label:", Counter(f.label for f in train))

test = test_fragments(pairs(plan.test_ids))
print("test fragments by label:", Counter(f.label for f in test))
print("first fragment source:", train[0].source, " length:", train[0].samples.size)
