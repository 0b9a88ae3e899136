import io
import struct

import numpy as np
import pytest

from lara.errors import CorruptWeights, FormatError, VersionError
from lara.nn import build_model, forward, load_weights, save_weights
from lara.nn.serialize import dumps, loads

from conftest import TINY, sine_window


def test_round_trip_bit_exact(tmp_path, tiny_model):
    tiny_model.buffers["stem.bn.running_mean"][:] = 0.25
    path = tmp_path / "w.lara"
    save_weights(tiny_model, path)
    back = load_weights(path)
    assert back.config == tiny_model.config
    for k, v in tiny_model.arrays().items():
        assert back.arrays()[k].tobytes() == v.tobytes()
    x = sine_window()
    assert forward(back, x)[0] == forward(tiny_model, x)[0]
    assert dumps(back) == path.read_bytes()


def test_file_objects(tiny_model):
    buf = io.BytesIO()
    save_weights(tiny_model, buf)
    buf.seek(0)
    assert dumps(load_weights(buf)) == dumps(tiny_model)


def test_bad_magic(tiny_model):
    data = b"XXXX" + dumps(tiny_model)[4:]
    with pytest.raises(FormatError):
        loads(data)


def test_version(tiny_model):
    data = bytearray(dumps(tiny_model))
    data[4:8] = struct.pack("<I", 2)
    with pytest.raises(VersionError):
        loads(bytes(data))


@pytest.mark.parametrize("cut", [6, 20, -4])
def test_truncated(tiny_model, cut):
    data = dumps(tiny_model)
    with pytest.raises(CorruptWeights):
        loads(data[:cut])


def test_trailing_bytes(tiny_model):
    with pytest.raises(CorruptWeights):
        loads(dumps(tiny_model) + b"\0\0\0\0")


def test_shape_mismatch(tiny_model):
    data = dumps(tiny_model)
    (mlen,) = struct.unpack("<I", data[8:12])
    manifest = data[12:12 + mlen].replace(b"stem.conv.weight float32 4x1x7", b"stem.conv.weight float32 4x1x5")
    bad = data[:8] + struct.pack("<I", len(manifest)) + manifest + data[12 + mlen:]
    with pytest.raises(CorruptWeights):
        loads(bad)


def test_default_model_size():
    m = build_model(seed=0)
    assert len(dumps(m)) > 4 * m.n_parameters()
    assert 25e6 < m.n_parameters() < 30e6
