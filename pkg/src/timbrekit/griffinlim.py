"""Griffin-Lim phase reconstruction for STFT magnitudes."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Optional, Union

import numpy as np

from .analysis import (
    DEFAULT_SAMPLE_RATE,
    ComplexSpectrogram,
    LogMagSpectrogram,
    StftParams,
    Waveform,
    istft_ls,
    n_frames_for,
    stft,
)
from .errors import InvalidArgument, UnsupportedRepresentation


@dataclass(frozen=True)
class GriffinLimConfig:
    iterations: int = 100
    phase_init: Literal["random", "zero", "provided"] = "random"
    seed: int = 0
    phase: Optional[np.ndarray] = None  # frames x bins, used with phase_init="provided"

    def __post_init__(self):
        if self.iterations < 0:
            raise InvalidArgument("iterations must be non-negative")
        if self.phase_init not in ("random", "zero", "provided"):
            raise InvalidArgument(f"unknown phase_init {self.phase_init!r}")
        if self.phase_init == "provided" and self.phase is None:
            raise InvalidArgument("phase_init='provided' needs a phase array")


def _bin_weights(params: StftParams) -> np.ndarray:
    # multiplicity of each one-sided bin in the two-sided spectrum
    w = np.full(params.n_bins, 2.0)
    w[0] = 1.0
    w[-1] = 1.0  # window_len is even, so the last bin is Nyquist
    return w


def spectral_mse(target: np.ndarray, estimate: np.ndarray, params: StftParams) -> float:
    """Mean squared magnitude error over the two-sided spectrum.

    This is the norm the least-squares inverse STFT minimises, which is what
    makes every Griffin-Lim iteration non-increasing in it.
    """
    w = _bin_weights(params)
    diff = np.abs(estimate) - target
    return float(np.sum(w * diff * diff) / (target.shape[0] * params.window_len))


def _linear_magnitude(mag, params, log_input):
    if isinstance(mag, LogMagSpectrogram):
        if mag.repr != "stft":
            raise UnsupportedRepresentation("Griffin-Lim needs an STFT magnitude")
        if mag.normalization_state != "raw":
            raise InvalidArgument("denormalize the spectrogram before phase reconstruction")
        linear = np.maximum(np.exp(mag.data) - mag.eps, 0.0)
        return linear, mag.params, mag.sample_rate, mag.length
    if isinstance(mag, ComplexSpectrogram):
        raise InvalidArgument("pass a magnitude, not a complex spectrogram")
    if params is None:
        raise UnsupportedRepresentation("a bare magnitude grid needs StftParams")
    if not isinstance(params, StftParams):
        raise UnsupportedRepresentation("Griffin-Lim needs STFT parameters")
    grid = np.asarray(mag, dtype=np.float64)
    if log_input:
        grid = np.maximum(np.exp(grid) - 1e-5, 0.0)
    return grid, params, None, None


def griffin_lim(
    mag: Union[LogMagSpectrogram, np.ndarray],
    cfg: GriffinLimConfig = GriffinLimConfig(),
    params: Optional[StftParams] = None,
    *,
    log_input: bool = False,
    sample_rate: Optional[int] = None,
    length: Optional[int] = None,
) -> tuple[Waveform, list[float]]:
    """Recover a waveform whose STFT magnitude matches ``mag``.

    Returns the waveform after ``cfg.iterations`` refinements and the objective
    sequence ``[mse_0, ..., mse_N]`` where ``mse_i`` is measured on the i-th
    waveform estimate (``mse_0`` is the initial phase guess).
    """
    target, params, sr, src_len = _linear_magnitude(mag, params, log_input)
    sr = sample_rate or sr or DEFAULT_SAMPLE_RATE
    if target.ndim != 2 or target.shape[1] != params.n_bins:
        raise InvalidArgument(f"magnitude shape {target.shape} does not match STFT params")
    if not np.all(np.isfinite(target)):
        raise InvalidArgument("magnitude contains non-finite values")
    if np.any(target < 0):
        raise InvalidArgument("magnitudes must be non-negative")
    n_frames = target.shape[0]
    if length is None:
        length = src_len if src_len is not None else n_frames * params.hop
    if n_frames_for(length, params.hop) != n_frames:
        raise InvalidArgument(f"length {length} is inconsistent with {n_frames} frames")

    if cfg.phase_init == "random":
        rng = np.random.default_rng(cfg.seed)
        phase = rng.uniform(-np.pi, np.pi, size=target.shape)
    elif cfg.phase_init == "zero":
        phase = np.zeros(target.shape)
    else:
        phase = np.asarray(cfg.phase, dtype=np.float64)
        if phase.shape != target.shape:
            raise InvalidArgument("provided phase must match the magnitude shape")

    def synthesize(ph):
        spec = ComplexSpectrogram(target * np.exp(1j * ph), params, sr, length)
        return istft_ls(spec, length)

    wave = synthesize(phase)
    estimate = stft(wave, params).data
    objective = [spectral_mse(target, estimate, params)]
    for _ in range(cfg.iterations):
        wave = synthesize(np.angle(estimate))
        estimate = stft(wave, params).data
        objective.append(spectral_mse(target, estimate, params))
    return wave, objective
