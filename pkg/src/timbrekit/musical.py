"""Pitch and tempo manipulation in the CQT domain, plus an f0 detector used
to check them."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .analysis import CqtParams, LogMagSpectrogram, Waveform
from .errors import InvalidArgument, NoSignal, UnsupportedRepresentation

STRETCH_RANGE = (0.25, 4.0)


def pitch_shift_cqt(spec: LogMagSpectrogram, semitones: int) -> LogMagSpectrogram:
    """Translate a log-magnitude CQT along the frequency axis by whole semitones.

    Bins shifted in from outside the grid are filled with the silence value ``ln(eps)``.
    """
    if not isinstance(spec, LogMagSpectrogram) or not isinstance(spec.params, CqtParams):
        raise UnsupportedRepresentation("pitch shifting needs a log-magnitude CQT")
    if int(semitones) != semitones:
        raise InvalidArgument("only whole-semitone shifts are supported")
    semitones = int(semitones)
    b = spec.params.bins_per_octave
    if b % 12:
        raise InvalidArgument(f"bins_per_octave={b} is not a multiple of 12")
    shift = semitones * (b // 12)
    n_bins = spec.params.n_bins
    if abs(shift) >= n_bins:
        raise InvalidArgument(f"shift of {shift} bins exceeds the {n_bins}-bin grid")
    out = np.full_like(spec.data, spec.silence)
    if shift >= 0:
        out[:, shift:] = spec.data[:, : n_bins - shift]
    else:
        out[:, :shift] = spec.data[:, -shift:]
    return spec.replace(data=out)


@dataclass(frozen=True)
class ConditioningSchedule:
    """Spectrogram frames paired with the number of samples to generate per frame."""

    frames: np.ndarray
    samples_per_frame: int

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def total_samples(self) -> int:
        return self.n_frames * self.samples_per_frame


def retime_conditioning(spec: LogMagSpectrogram, stretch: float = 1.0) -> ConditioningSchedule:
    """Change tempo by changing how many samples are generated per frame."""
    lo, hi = STRETCH_RANGE
    if not lo <= stretch <= hi:
        raise InvalidArgument(f"stretch {stretch} outside [{lo}, {hi}]")
    spf = int(np.floor(spec.hop * stretch + 0.5))
    return ConditioningSchedule(spec.data, spf)


def detect_f0(
    wave,
    search_range: tuple[float, float] = (50.0, 2000.0),
    *,
    sample_rate: int | None = None,
    threshold: float = 0.9,
) -> float:
    """Fundamental frequency from the normalised autocorrelation.

    Picks the first local maximum whose height is within ``threshold`` of the
    best peak in the lag range (avoids locking onto period multiples), then
    refines it with a parabola through the neighbouring lags.
    """
    if isinstance(wave, Waveform):
        x, sr = wave.samples, wave.sample_rate
    else:
        x, sr = np.asarray(wave, dtype=np.float64), sample_rate or 16000
    f_lo, f_hi = search_range
    if not 0 < f_lo < f_hi:
        raise InvalidArgument("search range must satisfy 0 < f_lo < f_hi")
    if x.size == 0 or np.max(np.abs(x)) <= 1e-4:
        raise NoSignal("waveform is silent")
    if x.size < 4 * sr / f_lo:
        raise InvalidArgument(f"need at least four periods of {f_lo} Hz")
    x = x - x.mean()
    lag_lo = max(1, int(np.floor(sr / f_hi)))
    lag_hi = min(x.size - 2, int(np.ceil(sr / f_lo)))
    n_fft = 1 << int(np.ceil(np.log2(2 * x.size)))
    spec = np.fft.rfft(x, n_fft)
    acf = np.fft.irfft(spec * np.conj(spec), n_fft)[: lag_hi + 2]
    # squared-difference normalisation: m(tau) = sum_j x[j]^2 + x[j + tau]^2
    prefix = np.concatenate(([0.0], np.cumsum(x * x)))
    lags = np.arange(lag_hi + 2)
    energy = np.maximum(prefix[x.size - lags] + prefix[-1] - prefix[lags], 1e-12)
    nsdf = 2 * acf / energy

    peaks = [
        i
        for i in range(lag_lo, lag_hi + 1)
        if nsdf[i] >= nsdf[i - 1] and nsdf[i] > nsdf[i + 1]
    ]
    if not peaks:
        raise NoSignal("no periodicity found in the search range")
    best = max(nsdf[i] for i in peaks)
    if best <= 0:
        raise NoSignal("no periodicity found in the search range")
    lag = next(i for i in peaks if nsdf[i] >= threshold * best)
    a, b, c = nsdf[lag - 1], nsdf[lag], nsdf[lag + 1]
    denom = a - 2 * b + c
    offset = 0.5 * (a - c) / denom if denom != 0 else 0.0
    return sr / (lag + offset)
