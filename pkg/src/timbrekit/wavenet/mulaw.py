"""8-bit mu-law companding."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidArgument


@dataclass(frozen=True)
class MuLawParams:
    mu: float = 255.0
    levels: int = 256


DEFAULT_MULAW = MuLawParams()


def mulaw_encode(x, p: MuLawParams = DEFAULT_MULAW):
    """Compand and quantise amplitudes to integer codes in ``[0, levels)``.

    Inputs outside [-1, 1] saturate. Rounding is half-up, so 0 maps to the
    upper of the two middle codes (128 for 8 bits).
    """
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise InvalidArgument("mu-law input contains non-finite values")
    arr = np.clip(arr, -1.0, 1.0)
    companded = np.sign(arr) * np.log1p(p.mu * np.abs(arr)) / np.log1p(p.mu)
    codes = np.floor((companded + 1.0) / 2.0 * (p.levels - 1) + 0.5).astype(np.int64)
    if codes.ndim == 0:
        return int(codes)
    return codes


def mulaw_decode(code, p: MuLawParams = DEFAULT_MULAW):
    codes = np.asarray(code)
    if codes.dtype.kind not in "iu":
        if not np.all(codes == np.floor(codes)):
            raise InvalidArgument("mu-law codes must be integers")
        codes = codes.astype(np.int64)
    if np.any(codes < 0) or np.any(codes >= p.levels):
        raise InvalidArgument(f"mu-law code outside [0, {p.levels})")
    y = codes * (2.0 / (p.levels - 1)) - 1.0
    x = np.sign(y) * np.expm1(np.abs(y) * np.log1p(p.mu)) / p.mu
    if x.ndim == 0:
        return float(x)
    return x
