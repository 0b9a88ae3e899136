import numpy as np
import pytest

from lara.nn import ModelConfig, build_model

# smallest architecture that still satisfies the 1024-channel head
TINY = ModelConfig(stem_channels=4, stage_blocks=(1, 1, 1, 1, 1), stage_channels=(4, 8, 16, 32, 1024))


@pytest.fixture
def tiny_config():
    return TINY


@pytest.fixture
def tiny_model():
    return build_model(TINY, seed=0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def sine_window(n=2400, base=140.0, amp=8.0, period=80.0, phase=0.0):
    return base + amp * np.sin(2 * np.pi * np.arange(n) / period + phase)
