"""1-D SE-residual CNN for 10-minute FHR windows.

Layout::

    stem:   conv(k7, s2) - BN - Swish
    stage i (i = 1..5), blocks (2, 3, 3, 3, 2), channels 64 -> 1024:
        branch = conv - BN - Swish - conv - BN - Swish - conv - BN
        skip   = x, or conv1x1(stride) when the shape changes
        out    = Swish(branch + SE(skip))
    head:   global average pool -> FC(1024 -> 1) -> sigmoid

The first block of every stage after the first downsamples by 2, so a
2400-sample input leaves the last stage with 75 positions.
"""

from __future__ import annotations

import copy
import json
from dataclasses import asdict, dataclass, fields

import numpy as np

from ..errors import ConfigError, ShapeError
from . import autodiff as ad
from .autodiff import Tensor

FEATURE_DIM = 1024


@dataclass(frozen=True)
class ModelConfig:
    input_length: int = 2400
    stem_channels: int = 64
    stem_kernel: int = 7
    stem_stride: int = 2
    stage_blocks: tuple = (2, 3, 3, 3, 2)
    stage_channels: tuple = (64, 128, 256, 512, 1024)
    block_kernel: int = 3
    se_reduction: int = 16
    bn_momentum: float = 0.9
    bn_eps: float = 1e-5
    # bpm are divided by 200 so zero-filled gaps stay at 0
    input_scale: float = 1.0 / 200.0

    def __post_init__(self):
        object.__setattr__(self, "stage_blocks", tuple(int(b) for b in self.stage_blocks))
        object.__setattr__(self, "stage_channels", tuple(int(c) for c in self.stage_channels))
        self.validate()

    def validate(self):
        if len(self.stage_blocks) != 5 or len(self.stage_channels) != 5:
            raise ConfigError("need exactly 5 stages")
        if self.stage_channels[-1] != FEATURE_DIM:
            raise ConfigError(f"last stage must have {FEATURE_DIM} channels")
        if min(self.stage_blocks) < 1 or min(self.stage_channels) < 1 or self.stem_channels < 1:
            raise ConfigError("block counts and channel widths must be positive")
        if self.stem_kernel < 1 or self.block_kernel < 1 or self.block_kernel % 2 == 0:
            raise ConfigError("kernels must be positive and the block kernel odd")
        if self.stem_stride < 1 or self.se_reduction < 1:
            raise ConfigError("stride and SE reduction must be positive")
        if not 0 <= self.bn_momentum < 1 or self.bn_eps <= 0 or self.input_scale <= 0:
            raise ConfigError("bad normalization settings")
        if self.feature_length < 1:
            raise ConfigError("input too short for the stride schedule")

    @property
    def feature_length(self):
        n = (self.input_length + 2 * (self.stem_kernel // 2) - self.stem_kernel) // self.stem_stride + 1
        for _ in self.stage_channels[1:]:
            n = (n - 1) // 2 + 1
        return n

    def to_json(self):
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown model config keys: {sorted(unknown)}")
        return cls(**d)


def _se_hidden(channels, reduction):
    return max(1, channels // reduction)


def parameter_shapes(config):
    """Ordered ``(name, shape, kind)`` for every array; kind is param or buffer."""
    out = []

    def bn(prefix, c):
        out.append((f"{prefix}.weight", (c,), "param"))
        out.append((f"{prefix}.bias", (c,), "param"))
        out.append((f"{prefix}.running_mean", (c,), "buffer"))
        out.append((f"{prefix}.running_var", (c,), "buffer"))

    c0 = config.stem_channels
    out.append(("stem.conv.weight", (c0, 1, config.stem_kernel), "param"))
    bn("stem.bn", c0)
    k = config.block_kernel
    cin = c0
    for s, (nb, cout) in enumerate(zip(config.stage_blocks, config.stage_channels)):
        for b in range(nb):
            p = f"stages.{s}.{b}"
            c_in = cin if b == 0 else cout
            out.append((f"{p}.conv1.weight", (cout, c_in, k), "param"))
            bn(f"{p}.bn1", cout)
            out.append((f"{p}.conv2.weight", (cout, cout, k), "param"))
            bn(f"{p}.bn2", cout)
            out.append((f"{p}.conv3.weight", (cout, cout, k), "param"))
            bn(f"{p}.bn3", cout)
            if b == 0 and (c_in != cout or _block_stride(s, b) != 1):
                out.append((f"{p}.skip.weight", (cout, c_in, 1), "param"))
            h = _se_hidden(cout, config.se_reduction)
            out.append((f"{p}.se.fc1.weight", (h, cout), "param"))
            out.append((f"{p}.se.fc1.bias", (h,), "param"))
            out.append((f"{p}.se.fc2.weight", (cout, h), "param"))
            out.append((f"{p}.se.fc2.bias", (cout,), "param"))
        cin = cout
    out.append(("fc.weight", (1, FEATURE_DIM), "param"))
    out.append(("fc.bias", (1,), "param"))
    return out


def _block_stride(stage, block):
    return 2 if stage > 0 and block == 0 else 1


class Model:
    """Parameters, BN running statistics and architecture of one network.

    ``params`` holds trainable arrays and ``buffers`` the BN running
    statistics; both are keyed by the names from :func:`parameter_shapes`.
    """

    def __init__(self, config, params, buffers, mode="eval"):
        self.config = config
        self.params = params
        self.buffers = buffers
        self.mode = mode

    def train(self):
        self.mode = "train"
        return self

    def eval(self):
        self.mode = "eval"
        return self

    @property
    def dtype(self):
        return self.params["fc.weight"].dtype

    def arrays(self):
        """All arrays in manifest order."""
        out = {}
        for name, _, kind in parameter_shapes(self.config):
            out[name] = (self.params if kind == "param" else self.buffers)[name]
        return out

    def astype(self, dtype):
        return Model(
            self.config,
            {k: v.astype(dtype) for k, v in self.params.items()},
            {k: v.astype(dtype) for k, v in self.buffers.items()},
            self.mode,
        )

    def copy(self):
        return copy.deepcopy(self)

    def n_parameters(self):
        return sum(v.size for v in self.params.values())

    def predict(self, x, batch_size=32):
        """Eval-mode probabilities and features for a (N, 2400) array of bpm."""
        return predict(self, x, batch_size)


def build_model(config=None, seed=0, dtype=np.float32):
    """Fresh model with fan-in scaled normal weights; identical for equal seeds."""
    config = config or ModelConfig()
    rng = np.random.default_rng(seed)
    params, buffers = {}, {}
    for name, shape, kind in parameter_shapes(config):
        if kind == "buffer":
            fill = 0.0 if name.endswith("running_mean") else 1.0
            buffers[name] = np.full(shape, fill, dtype=dtype)
        elif name.endswith(".bias"):
            params[name] = np.zeros(shape, dtype=dtype)
        elif ".bn" in name or name.startswith("stem.bn"):
            params[name] = np.ones(shape, dtype=dtype)
        else:
            fan_in = int(np.prod(shape[1:]))
            gain = 2.0 if "conv" in name or "fc1" in name or "skip" in name else 1.0
            params[name] = rng.normal(0.0, np.sqrt(gain / fan_in), size=shape).astype(dtype)
    return Model(config, params, buffers)


def _leaves(model, requires_grad):
    return {k: Tensor(v, requires_grad) for k, v in model.params.items()}


def _check_input(model, x):
    x = np.asarray(x)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != model.config.input_length:
        raise ShapeError(f"expected windows of {model.config.input_length} samples, got shape {x.shape}")
    return x


def _bn(model, P, name, x, training, update_stats):
    return ad.batch_norm(
        x,
        P[f"{name}.weight"],
        P[f"{name}.bias"],
        model.buffers[f"{name}.running_mean"],
        model.buffers[f"{name}.running_var"],
        training,
        model.config.bn_momentum,
        model.config.bn_eps,
        update_stats,
    )


def squeeze_excite(P, prefix, x):
    """Channel gates from the length-averaged signal; returns ``x * gate``."""
    z = ad.mean(x, axis=2)
    h = ad.relu(ad.linear(z, P[f"{prefix}.fc1.weight"], P[f"{prefix}.fc1.bias"]))
    gate = ad.sigmoid(ad.linear(h, P[f"{prefix}.fc2.weight"], P[f"{prefix}.fc2.bias"]))
    n, c = gate.shape
    return ad.mul(x, _reshape(gate, (n, c, 1)))


def _reshape(t, shape):
    old = t.shape

    def backward(g):
        ad._accum(t, g.reshape(old))

    return ad._make(t.data.reshape(shape), (t,), backward)


def feature_map(model, x, training=False, requires_grad=False, update_stats=True, leaves=None):
    """Last-stage activations (N, 1024, L) for bpm input ``x`` (N, input_length).

    Returns ``(activations, leaves)`` where ``leaves`` maps parameter names
    to the tensors used, so callers can read gradients after backward.
    """
    cfg = model.config
    x = _check_input(model, x)
    P = leaves if leaves is not None else _leaves(model, requires_grad)
    h = Tensor((x * cfg.input_scale).astype(model.dtype)[:, None, :])
    h = ad.conv1d(h, P["stem.conv.weight"], cfg.stem_stride, cfg.stem_kernel // 2)
    h = ad.swish(_bn(model, P, "stem.bn", h, training, update_stats))
    pad = cfg.block_kernel // 2
    for s, nb in enumerate(cfg.stage_blocks):
        for b in range(nb):
            p = f"stages.{s}.{b}"
            stride = _block_stride(s, b)
            y = ad.conv1d(h, P[f"{p}.conv1.weight"], stride, pad)
            y = ad.swish(_bn(model, P, f"{p}.bn1", y, training, update_stats))
            y = ad.conv1d(y, P[f"{p}.conv2.weight"], 1, pad)
            y = ad.swish(_bn(model, P, f"{p}.bn2", y, training, update_stats))
            y = ad.conv1d(y, P[f"{p}.conv3.weight"], 1, pad)
            y = _bn(model, P, f"{p}.bn3", y, training, update_stats)
            skip = h
            if f"{p}.skip.weight" in P:
                skip = ad.conv1d(h, P[f"{p}.skip.weight"], stride, 0)
            skip = squeeze_excite(P, f"{p}.se", skip)
            h = ad.swish(ad.add(y, skip))
    return h, P


def head(P, activations):
    """GAP + FC: returns ``(logits (N,), features (N, 1024))``."""
    feats = ad.mean(activations, axis=2)
    z = ad.linear(feats, P["fc.weight"], P["fc.bias"])
    n = z.shape[0]
    return _reshape(z, (n,)), feats


def logits(model, x, training=False, requires_grad=False, update_stats=True):
    a, P = feature_map(model, x, training, requires_grad, update_stats)
    z, feats = head(P, a)
    return z, feats, P


def predict(model, x, batch_size=32):
    """Eval-mode ``(p, features)`` as float64 arrays for bpm windows ``x``."""
    x = _check_input(model, x)
    ps, fs = [], []
    for i in range(0, x.shape[0], batch_size):
        z, feats, _ = logits(model, x[i:i + batch_size], training=False)
        ps.append(ad._sigmoid(z.data))
        fs.append(feats.data)
    return np.concatenate(ps).astype(np.float64), np.concatenate(fs).astype(np.float64)


def _samples(window):
    return np.asarray(getattr(window, "samples", window))


def forward(model, window):
    """Prediction for one window: ``(p, features)`` with ``p`` in (0, 1)."""
    p, f = predict(model, _samples(window)[None, :])
    return float(p[0]), f[0]


def extract_features(model, window):
    return forward(model, window)[1]
