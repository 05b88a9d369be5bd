"""The ``.ttwn`` weights file.

Layout (little-endian): ``b"TTWN"``, u8 version (1), eight u32 config fields
(layers, dilation cycle, kernel, residual, skip, gate, cond channels, quant
levels), u8 has_ema, then every tensor of :func:`param_shapes` in order as
f32, then the EMA tensors in the same order when present, then a CRC32 of
everything before it.
"""
from __future__ import annotations

import struct
import zlib
from pathlib import Path
from typing import Optional

import numpy as np

from ..errors import CorruptFile, ShapeMismatch
from .model import WaveNetConfig, WaveNetWeights, param_shapes

MAGIC = b"TTWN"
VERSION = 1
_HEADER = struct.Struct("<4sB8IB")


def dumps_weights(weights: WaveNetWeights) -> bytes:
    cfg = weights.config
    weights.check()
    header = _HEADER.pack(
        MAGIC, VERSION, cfg.n_layers, cfg.dilation_cycle, cfg.kernel_size, cfg.residual_width,
        cfg.skip_width, cfg.gate_width, cfg.cond_channels, cfg.quant_levels,
        int(weights.ema is not None),
    )
    chunks = [header]
    for payload in (weights.params, weights.ema):
        if payload is None:
            continue
        for name, _ in param_shapes(cfg):
            chunks.append(np.ascontiguousarray(payload[name], dtype="<f4").tobytes())
    body = b"".join(chunks)
    return body + struct.pack("<I", zlib.crc32(body))


def loads_weights(blob: bytes, cfg: Optional[WaveNetConfig] = None) -> WaveNetWeights:
    if len(blob) < _HEADER.size + 4:
        raise CorruptFile("weights file is truncated")
    body, (crc,) = blob[:-4], struct.unpack("<I", blob[-4:])
    magic, version, *dims, has_ema = _HEADER.unpack_from(body)
    if magic != MAGIC:
        raise CorruptFile("not a TTWN weights file")
    if version != VERSION:
        raise CorruptFile(f"unsupported TTWN version {version}")
    if zlib.crc32(body) != crc:
        raise CorruptFile("weights file checksum mismatch")
    try:
        file_cfg = WaveNetConfig(*dims)
    except ValueError as exc:
        raise CorruptFile(f"invalid config block: {exc}") from exc
    if cfg is not None and cfg != file_cfg:
        raise ShapeMismatch(f"file holds weights for {file_cfg}, requested {cfg}")
    shapes = param_shapes(file_cfg)
    n_floats = sum(int(np.prod(s)) for _, s in shapes)
    expected = _HEADER.size + 4 * n_floats * (2 if has_ema else 1)
    if len(body) != expected:
        raise CorruptFile(f"payload is {len(body)} bytes, expected {expected}")
    flat = np.frombuffer(body, dtype="<f4", offset=_HEADER.size).astype(np.float32)
    payloads = []
    pos = 0
    for _ in range(2 if has_ema else 1):
        tensors = {}
        for name, shape in shapes:
            size = int(np.prod(shape))
            tensors[name] = flat[pos : pos + size].reshape(shape).copy()
            pos += size
        payloads.append(tensors)
    weights = WaveNetWeights(file_cfg, payloads[0], payloads[1] if has_ema else None)
    weights.check()
    return weights


def save_weights(path, weights: WaveNetWeights) -> None:
    Path(path).write_bytes(dumps_weights(weights))


def load_weights(path, cfg: Optional[WaveNetConfig] = None) -> WaveNetWeights:
    return loads_weights(Path(path).read_bytes(), cfg)
