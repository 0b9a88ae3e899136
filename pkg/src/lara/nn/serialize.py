"""Weight file format.

::

    b"LARA" | u32 version | u32 manifest_bytes | manifest (UTF-8) | arrays

The manifest's first line is ``config <json>``; every following line is
``<name> <dtype> <d0>x<d1>...`` in storage order. Arrays follow as
little-endian float32, C order, concatenated in manifest order.
"""

from __future__ import annotations

import io
import json
import struct

import numpy as np

from .._io import atomic_write_bytes
from ..errors import ConfigError, CorruptWeights, FormatError, VersionError
from .model import Model, ModelConfig, parameter_shapes

MAGIC = b"LARA"
VERSION = 1


def dumps(model):
    arrays = model.arrays()
    lines = ["config " + model.config.to_json()]
    for name, a in arrays.items():
        lines.append(f"{name} float32 {'x'.join(str(d) for d in a.shape)}")
    manifest = "\n".join(lines).encode("utf-8")
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<II", VERSION, len(manifest)))
    buf.write(manifest)
    for a in arrays.values():
        buf.write(np.ascontiguousarray(a, dtype="<f4").tobytes())
    return buf.getvalue()


def loads(data):
    if len(data) < 4 or data[:4] != MAGIC:
        raise FormatError("not a LARA weight file")
    if len(data) < 12:
        raise CorruptWeights("truncated header")
    version, mlen = struct.unpack("<II", data[4:12])
    if version != VERSION:
        raise VersionError(f"weight file version {version}, expected {VERSION}")
    if len(data) < 12 + mlen:
        raise CorruptWeights("truncated manifest")
    try:
        lines = data[12:12 + mlen].decode("utf-8").split("\n")
        tag, _, cfg_json = lines[0].partition(" ")
        if tag != "config":
            raise ValueError("missing config line")
        cfg = json.loads(cfg_json)
        for key in ("stage_blocks", "stage_channels"):
            cfg[key] = tuple(cfg[key])
        config = ModelConfig.from_dict(cfg)
        entries = []
        for line in lines[1:]:
            name, dtype, dims = line.split(" ")
            if dtype != "float32":
                raise ValueError(f"unsupported dtype {dtype}")
            entries.append((name, tuple(int(d) for d in dims.split("x"))))
    except (ValueError, KeyError, TypeError, ConfigError) as err:
        raise CorruptWeights(f"bad manifest: {err}") from None

    expected = [(n, s) for n, s, _ in parameter_shapes(config)]
    if entries != expected:
        raise CorruptWeights("manifest does not match the architecture in its config")

    kinds = {n: k for n, _, k in parameter_shapes(config)}
    offset = 12 + mlen
    params, buffers = {}, {}
    for name, shape in entries:
        nbytes = 4 * int(np.prod(shape))
        if offset + nbytes > len(data):
            raise CorruptWeights(f"truncated data at {name}")
        a = np.frombuffer(data, dtype="<f4", count=nbytes // 4, offset=offset).reshape(shape)
        (params if kinds[name] == "param" else buffers)[name] = a.astype(np.float32)
        offset += nbytes
    if offset != len(data):
        raise CorruptWeights(f"{len(data) - offset} trailing bytes")
    return Model(config, params, buffers, "eval")


def save_weights(model, sink):
    """Write to a path or a binary file object."""
    data = dumps(model)
    if hasattr(sink, "write"):
        sink.write(data)
    else:
        atomic_write_bytes(sink, data)


def load_weights(source):
    if hasattr(source, "read"):
        return loads(source.read())
    with open(source, "rb") as fh:
        return loads(fh.read())
