import pytest

from lara.config import RunConfig, load_config, parse_config
from lara.errors import ConfigError


def test_defaults():
    cfg = parse_config("")
    assert cfg == RunConfig()
    assert cfg.train.batch_size == 64 and cfg.model.input_scale == 1 / 200


def test_parse_values_and_comments(tmp_path):
    text = """
    # quick run
    stage_blocks = 1, 1, 1, 1, 1
    epochs = 5        # short
    learning_rate = 3e-4
    operator = rs
    """
    path = tmp_path / "run.cfg"
    path.write_text(text)
    cfg = load_config(path)
    assert cfg.model.stage_blocks == (1, 1, 1, 1, 1)
    assert cfg.train.epochs == 5 and cfg.train.learning_rate == 3e-4
    assert cfg.operator == "rs"


def test_overrides_skip_none():
    cfg = RunConfig().with_overrides(epochs=3, seed=None, max_loss=0.4)
    assert cfg.train.epochs == 3 and cfg.train.seed == 0 and cfg.max_loss == 0.4


@pytest.mark.parametrize(
    "text",
    [
        "bogus = 1",
        "epochs = many",
        "epochs = 2\nepochs = 3",
        "just words",
        "operator = max",
        "test_ratio = 1.5",
        "stage_channels = 1, 2, 3, 4, 5",
        "batch_size = 0",
    ],
)
def test_rejects(text):
    with pytest.raises(ConfigError):
        parse_config(text)
