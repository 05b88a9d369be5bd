"""Rainbowgram images: brightness from log magnitude, hue from instantaneous frequency."""
from __future__ import annotations

import numpy as np
from PIL import Image

from .analysis import ComplexSpectrogram, instantaneous_frequency, log_magnitude


def rainbowgram_rgb(spec: ComplexSpectrogram, eps: float = 1e-5) -> np.ndarray:
    """(bins, frames, 3) uint8 image, lowest bin on the bottom row.

    Hue maps [-pi, pi) linearly onto the colour circle; value is the log
    magnitude min-max scaled over the image; saturation is full.
    """
    logmag = log_magnitude(spec, eps).data
    inst = instantaneous_frequency(spec)
    lo, hi = logmag.min(), logmag.max()
    value = (logmag - lo) / (hi - lo) if hi > lo else np.zeros_like(logmag)
    hue = (inst + np.pi) / (2 * np.pi)
    hsv = np.stack([
        np.clip(np.floor(hue * 256), 0, 255),
        np.full_like(hue, 255),
        np.round(value * 255),
    ], axis=-1).astype(np.uint8)
    # frames x bins -> rows are bins, highest frequency on top
    hsv = np.ascontiguousarray(hsv.transpose(1, 0, 2)[::-1])
    return np.asarray(Image.fromarray(hsv, mode="HSV").convert("RGB"))


def save_rainbowgram(path, spec: ComplexSpectrogram, eps: float = 1e-5) -> None:
    Image.fromarray(rainbowgram_rgb(spec, eps), mode="RGB").save(path, format="PNG")
