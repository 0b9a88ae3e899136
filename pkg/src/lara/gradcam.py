"""1-D Grad-CAM on the last convolution stage.

Channel weights are the length-averaged gradients of the output probability
with respect to the last-stage activations; the weighted activation sum is
rectified, linearly upsampled to input resolution and max-scaled to [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .nn import autodiff as ad
from .nn.autodiff import Tensor
from .nn.model import _check_input, _samples, feature_map, head
from .timeseries import SAMPLES_PER_MINUTE, WINDOW_MINUTES


@dataclass(frozen=True, eq=False)
class CamMap:
    values: np.ndarray
    window_start_minute: int = 0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 1 or np.any(v < 0) or np.any(v > 1):
            raise ValueError("cam values must be a 1-D array in [0, 1]")
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size


def upsample(raw, length):
    """Linear interpolation with the first and last samples aligned."""
    raw = np.asarray(raw, dtype=np.float64)
    if raw.size == 1:
        return np.full(length, raw[0])
    src = np.linspace(0.0, 1.0, raw.size)
    dst = np.linspace(0.0, 1.0, length)
    return np.interp(dst, src, raw)


def normalize(u):
    peak = u.max() if u.size else 0.0
    if not peak > 0:
        return np.zeros_like(u)
    return np.clip(u / peak, 0.0, 1.0)


def _single_pass(model, x):
    acts, P = feature_map(model, x, training=False)
    a = Tensor(acts.data, requires_grad=True)
    z, _ = head(P, a)
    p = ad.sigmoid(z)
    p.backward(np.ones_like(p.data))
    alpha = a.grad.mean(axis=2)
    return p.data.astype(np.float64), np.maximum(np.einsum("nk,nkl->nl", alpha, a.data), 0.0)


def cam_pass(model, x):
    """Gradient-recording passes: ``(p (N,), raw maps (N, L))``.

    Raw maps are ``ReLU(sum_k alpha_k A_k)`` at feature resolution. Each
    window gets its own pass so a map never depends on its batch neighbours
    (batched matmuls are not bitwise invariant to row position).
    """
    x = _check_input(model, x)
    out = [_single_pass(model, x[i:i + 1]) for i in range(x.shape[0])]
    return np.concatenate([o[0] for o in out]), np.concatenate([o[1] for o in out])


def raw_cams(model, x):
    return cam_pass(model, x)[1]


def cam_batch(model, x, start_minutes=None):
    x = _check_input(model, x)
    raw = raw_cams(model, x)
    if start_minutes is None:
        start_minutes = [0] * x.shape[0]
    n = model.config.input_length
    return [CamMap(normalize(upsample(r, n)), int(s)) for r, s in zip(raw, start_minutes)]


def cam(model, window):
    """CamMap for one window (an array of bpm or a :class:`Window`)."""
    samples = _samples(window)
    if samples.ndim != 1:
        raise ShapeError(f"expected one window, got shape {samples.shape}")
    start = getattr(window, "start_minute", 0)
    return cam_batch(model, samples[None, :], [start])[0]


def minute_cam_means(cam_map):
    """Mean cam value of each of the window's 10 minutes."""
    v = cam_map.values if isinstance(cam_map, CamMap) else np.asarray(cam_map, dtype=np.float64)
    if v.size != WINDOW_MINUTES * SAMPLES_PER_MINUTE:
        raise ShapeError(f"expected {WINDOW_MINUTES * SAMPLES_PER_MINUTE} cam values, got {v.size}")
    return v.reshape(WINDOW_MINUTES, SAMPLES_PER_MINUTE).mean(axis=1)
