"""Scan a long record window by window and fuse minute-level risk.

A stub network with a fixed output shows the bookkeeping (every operator
returns the constant), then a random-weight network shows operator spread.
"""

import tempfile
from pathlib import Path

import numpy as np

from lara import fusion, svg, synth
from lara.nn import ModelConfig, build_model

out = Path(tempfile.mkdtemp())
record, _ = synth.generate(synth.cohort_spec(abnormal=True, seed=4, duration_min=60))
small = ModelConfig(stem_channels=8, stage_blocks=(1, 1, 1, 1, 1), stage_channels=(8, 16, 32, 64, 1024))

# how many windows see each minute: ramps up, 10 in the middle, ramps down
print("window counts:", fusion.window_counts(record.n_minutes))

stub = build_model(small, seed=0)
stub.params["fc.weight"][:] = 0
wp = fusion.scan(stub, record)
print("stub RI:", {op: p.ri for op, p in fusion.risk_profiles(wp).items()})

model = build_model(small, seed=0)
wp = fusion.scan(model, record)
profiles = fusion.risk_profiles(wp)
for op, prof in profiles.items():
    print(f"{op:>5}: RI {prof.ri:.4f}  mRI range {prof.mri.min():.4f}..{prof.mri.max():.4f}")

# rs weights each prediction by e^(x - mean), so it never falls below basic
assert np.all(profiles["rs"].mri >= profiles["basic"].mri - 1e-12)

fusion.write_rdm(out / "rdm.csv", profiles)
print(open(out / "rdm.csv").read().splitlines()[-1])
t = np.arange(record.n_minutes)
svg.write_svg(out / "rdm.svg", svg.line_plot([(op, t, p.mri) for op, p in profiles.items()], "RDM", "minute", "mRI"))
print("wrote", out / "rdm.csv", "and", out / "rdm.svg")
