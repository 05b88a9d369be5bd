"""WAV (PCM16 mono 16 kHz only) and .ttsg spectrogram files."""
from __future__ import annotations

import struct
import wave as _wave
import zlib
from pathlib import Path
from typing import Union

import numpy as np

from .analysis import (DEFAULT_EPS, DEFAULT_SAMPLE_RATE, ComplexSpectrogram, CqtParams,
                       LogMagSpectrogram, StftParams, Waveform)
from .errors import CorruptFile, InvalidArgument

# ---------------------------------------------------------------- WAV

PCM_SCALE = 32768.0


def _check_wav(r: _wave.Wave_read, source) -> None:
    if r.getnchannels() != 1:
        raise CorruptFile(f"{source}: channels={r.getnchannels()}, only mono is supported")
    if r.getsampwidth() != 2:
        raise CorruptFile(f"{source}: sample width={8 * r.getsampwidth()} bits, only PCM16 is supported")
    if r.getframerate() != DEFAULT_SAMPLE_RATE:
        raise CorruptFile(f"{source}: sample rate={r.getframerate()} Hz, only 16000 Hz is supported")
    if r.getcomptype() != "NONE":
        raise CorruptFile(f"{source}: compression={r.getcomptype()}, only uncompressed PCM is supported")


def pcm16_from_float(x: np.ndarray) -> np.ndarray:
    return np.clip(np.round(np.asarray(x) * PCM_SCALE), -32768, 32767).astype("<i2")


def read_wav(path) -> Waveform:
    try:
        with _wave.open(str(path), "rb") as r:
            _check_wav(r, path)
            raw = r.readframes(r.getnframes())
    except (_wave.Error, EOFError) as exc:
        raise CorruptFile(f"{path}: not a readable WAV file ({exc})") from exc
    pcm = np.frombuffer(raw, dtype="<i2")
    return Waveform(pcm.astype(np.float64) / PCM_SCALE, DEFAULT_SAMPLE_RATE)


def write_wav(path, wave: Waveform) -> None:
    if wave.sample_rate != DEFAULT_SAMPLE_RATE:
        raise InvalidArgument(f"can only write 16000 Hz audio, got {wave.sample_rate}")
    with _wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(DEFAULT_SAMPLE_RATE)
        w.writeframes(pcm16_from_float(wave.samples).tobytes())


# ---------------------------------------------------------------- .ttsg

TTSG_MAGIC = b"TTSG"
TTSG_VERSION = 1
_TTSG_HEADER = struct.Struct("<4sBBHIIIIdddB")
_REPR_CODES = {("stft", "logmag"): 0, ("cqt", "logmag"): 1, ("cqt", "complex"): 2, ("stft", "complex"): 3}
_CODE_REPRS = {v: k for k, v in _REPR_CODES.items()}
_STATES = ("raw", "domain_normalized", "conditioning_shifted")

Spectrogram = Union[LogMagSpectrogram, ComplexSpectrogram]


def dumps_spectrogram(spec: Spectrogram) -> bytes:
    kind = "logmag" if isinstance(spec, LogMagSpectrogram) else "complex"
    p = spec.params
    if isinstance(p, CqtParams):
        f_min, bpo, gamma = p.f_min, float(p.bins_per_octave), p.gamma
        if p.sample_rate != spec.sample_rate:
            raise InvalidArgument("CQT params and spectrogram disagree on the sample rate")
    else:
        # CQT fields unused; the window length follows from the bin count
        f_min, bpo, gamma = 0.0, 0.0, 0.0
    state = spec.normalization_state if kind == "logmag" else "raw"
    header = _TTSG_HEADER.pack(
        TTSG_MAGIC, TTSG_VERSION, _REPR_CODES[(spec.repr, kind)], 0,
        spec.data.shape[0], spec.data.shape[1], spec.sample_rate, spec.hop,
        f_min, bpo, gamma, _STATES.index(state),
    )
    if kind == "complex":
        payload = np.stack([spec.data.real, spec.data.imag], axis=-1).astype("<f4").tobytes()
    else:
        payload = spec.data.astype("<f4").tobytes()
    return header + payload + struct.pack("<I", zlib.crc32(payload))


def loads_spectrogram(blob: bytes, eps: float = DEFAULT_EPS) -> Spectrogram:
    if len(blob) < _TTSG_HEADER.size + 4:
        raise CorruptFile("spectrogram file is truncated")
    (magic, version, code, _reserved, frames, bins, sr, hop,
     f_min, bpo, gamma, state) = _TTSG_HEADER.unpack_from(blob)
    if magic != TTSG_MAGIC:
        raise CorruptFile(f"bad magic {magic!r}, expected {TTSG_MAGIC!r}")
    if version != TTSG_VERSION:
        raise CorruptFile(f"unsupported .ttsg version {version}")
    if code not in _CODE_REPRS or state >= len(_STATES):
        raise CorruptFile("unknown representation or normalization state")
    repr_, kind = _CODE_REPRS[code]
    width = 2 if kind == "complex" else 1
    size = frames * bins * width * 4
    body = blob[_TTSG_HEADER.size :]
    if len(body) != size + 4:
        raise CorruptFile(f"payload is {len(body) - 4} bytes, header implies {size}")
    payload = body[:size]
    (crc,) = struct.unpack("<I", body[size:])
    if zlib.crc32(payload) != crc:
        raise CorruptFile("CRC mismatch in spectrogram payload")
    data = np.frombuffer(payload, dtype="<f4").astype(np.float64)
    try:
        if repr_ == "cqt":
            params = CqtParams(f_min=f_min, bins_per_octave=int(bpo), n_bins=bins, hop=hop,
                               gamma=gamma, sample_rate=sr)
        else:
            params = StftParams(window_len=2 * (bins - 1), hop=hop)
    except InvalidArgument as exc:
        raise CorruptFile(f"invalid transform parameters in header: {exc}") from exc
    if kind == "complex":
        pairs = data.reshape(frames, bins, 2)
        return ComplexSpectrogram(pairs[..., 0] + 1j * pairs[..., 1], params, sr)
    return LogMagSpectrogram(data.reshape(frames, bins), params, sr, _STATES[state], eps)


def save_spectrogram(path, spec: Spectrogram) -> None:
    Path(path).write_bytes(dumps_spectrogram(spec))


def load_spectrogram(path, eps: float = DEFAULT_EPS) -> Spectrogram:
    return loads_spectrogram(Path(path).read_bytes(), eps)
