"""Plain-text run configuration.

One ``key = value`` per line, ``#`` starts a comment. Keys are the fields of
:class:`ModelConfig` and :class:`TrainConfig` plus the pipeline settings of
:class:`RunConfig`. Tuples are written comma separated::

    # small model for quick experiments
    stage_blocks = 1, 1, 1, 1, 1
    epochs = 5
    operator = rs
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace

from .errors import ConfigError
from .nn.model import ModelConfig
from .nn.training import TrainConfig

MODEL_KEYS = tuple(f.name for f in fields(ModelConfig))
TRAIN_KEYS = tuple(f.name for f in fields(TrainConfig))


@dataclass(frozen=True)
class RunConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    operator: str = "basic"
    test_ratio: float = 0.2
    gap_threshold_min: float = 10.0
    max_loss: float = 0.5
    input: str = ""
    output: str = ""

    def with_overrides(self, **kw):
        """New config with non-None values from ``kw`` applied."""
        kw = {k: v for k, v in kw.items() if v is not None}
        return _apply(self, kw)


RUN_KEYS = tuple(f.name for f in fields(RunConfig) if f.name not in ("model", "train"))


def _convert(raw, default, key):
    try:
        if isinstance(default, bool):
            if raw.lower() in ("true", "1", "yes"):
                return True
            if raw.lower() in ("false", "0", "no"):
                return False
            raise ValueError(raw)
        if isinstance(default, tuple):
            return tuple(int(p) for p in raw.split(",") if p.strip())
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None


def _apply(cfg, values):
    """Apply already-typed or string values by key."""
    unknown = set(values) - set(MODEL_KEYS) - set(TRAIN_KEYS) - set(RUN_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")

    def typed(obj, k):
        v = values[k]
        return _convert(v, getattr(obj, k), k) if isinstance(v, str) else v

    try:
        model = replace(cfg.model, **{k: typed(cfg.model, k) for k in MODEL_KEYS if k in values})
        train = replace(cfg.train, **{k: typed(cfg.train, k) for k in TRAIN_KEYS if k in values})
    except ValueError as err:
        raise ConfigError(str(err)) from None
    run = {k: typed(cfg, k) for k in RUN_KEYS if k in values}
    out = replace(cfg, model=model, train=train, **run)
    if out.operator not in ("basic", "rs", "cw"):
        raise ConfigError(f"operator must be basic, rs or cw, not {out.operator!r}")
    if not 0 < out.test_ratio < 1:
        raise ConfigError("test_ratio must lie in (0, 1)")
    return out


def parse_config(text):
    values = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"line {n}: expected key = value")
        key = key.strip()
        if key in values:
            raise ConfigError(f"line {n}: duplicate key {key}")
        values[key] = value.strip()
    return _apply(RunConfig(), values)


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
