"""Grad-CAM on one 10-minute window."""

import tempfile
from pathlib import Path

import numpy as np

from lara import gradcam, svg, synth
from lara.nn import ModelConfig, build_model, forward

small = ModelConfig(stem_channels=8, stage_blocks=(1, 1, 1, 1, 1), stage_channels=(8, 16, 32, 64, 1024))
model = build_model(small, seed=2)

window, _ = synth.generate(synth.SynthSpec(duration_min=10, decel_events=((240, 60, 35),), seed=3))
p, feats = forward(model, window.samples)
print(f"p = {p:.4f}, feature vector length {feats.size}")

cam = gradcam.cam(model, window.samples)
print("cam length", len(cam), "range", cam.values.min(), cam.values.max())

# per-minute means are what the cam-weighted fusion operator uses
print("minute means:", np.round(gradcam.minute_cam_means(cam), 3))

# the map depends only on the window, not on what else is in the batch
again = gradcam.cam_batch(model, np.stack([window.samples, window.samples[::-1].copy()]))[0]
assert np.array_equal(again.values, cam.values)

out = Path(tempfile.mkdtemp()) / "cam.svg"
svg.write_svg(out, svg.cam_trace_plot(window.samples, cam.values, "Grad-CAM"))
print("wrote", out)
