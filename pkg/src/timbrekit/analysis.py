"""Time-frequency analysis: STFT, least-squares inverse STFT, CQT, log
magnitude and instantaneous frequency.

All transforms use frames centred at ``t * hop`` on a reflect-padded signal,
giving ``ceil(len / hop)`` frames, so STFT and CQT frame grids coincide.
Spectrogram arrays are laid out frames x bins.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Optional, Union

import numpy as np
import scipy.fft

from .errors import InvalidArgument, UnsupportedRepresentation

DEFAULT_SAMPLE_RATE = 16000
DEFAULT_EPS = 1e-5

NormalizationState = Literal["raw", "domain_normalized", "conditioning_shifted"]


@dataclass(frozen=True)
class Waveform:
    samples: np.ndarray
    sample_rate: int = DEFAULT_SAMPLE_RATE

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=np.float64)
        if x.ndim != 1:
            raise InvalidArgument(f"waveform must be 1-D, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise InvalidArgument("waveform contains non-finite samples")
        if self.sample_rate <= 0:
            raise InvalidArgument("sample_rate must be positive")
        object.__setattr__(self, "samples", x)

    def __len__(self):
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate


@dataclass(frozen=True)
class StftParams:
    window_len: int = 672
    hop: int = 256
    window_kind: str = "hann_periodic"

    def __post_init__(self):
        if self.window_len < 2 or self.window_len % 2:
            raise InvalidArgument("window_len must be an even integer >= 2")
        if not 0 < self.hop <= self.window_len:
            raise InvalidArgument("hop must satisfy 0 < hop <= window_len")
        if self.window_kind != "hann_periodic":
            raise InvalidArgument(f"unknown window kind {self.window_kind!r}")

    @property
    def n_bins(self) -> int:
        return self.window_len // 2 + 1


@dataclass(frozen=True)
class CqtParams:
    f_min: float = 32.70
    bins_per_octave: int = 48
    n_bins: int = 336
    hop: int = 256
    gamma: float = 0.8
    sample_rate: int = DEFAULT_SAMPLE_RATE

    def __post_init__(self):
        if self.f_min <= 0 or self.bins_per_octave <= 0 or self.n_bins <= 0:
            raise InvalidArgument("f_min, bins_per_octave and n_bins must be positive")
        if self.hop <= 0 or self.sample_rate <= 0:
            raise InvalidArgument("hop and sample_rate must be positive")
        if not 0 < self.gamma <= 1:
            raise InvalidArgument(f"gamma must lie in (0, 1], got {self.gamma}")
        top = self.f_min * 2.0 ** ((self.n_bins - 1) / self.bins_per_octave)
        if top >= self.sample_rate / 2:
            raise InvalidArgument(
                f"top CQT bin {top:.1f} Hz is not below Nyquist ({self.sample_rate / 2} Hz)"
            )

    @property
    def q_factor(self) -> float:
        """Effective quality factor ``gamma / (2**(1/b) - 1)``."""
        return self.gamma / (2.0 ** (1.0 / self.bins_per_octave) - 1.0)

    @property
    def frequencies(self) -> np.ndarray:
        k = np.arange(self.n_bins)
        return self.f_min * 2.0 ** (k / self.bins_per_octave)

    @property
    def kernel_lengths(self) -> np.ndarray:
        """Odd kernel lengths spanning ``q_factor`` cycles of each bin's centre frequency."""
        cycles = self.q_factor * self.sample_rate / self.frequencies
        return 2 * np.ceil(cycles / 2).astype(np.int64) + 1


Params = Union[StftParams, CqtParams]


def _repr_of(params) -> str:
    if isinstance(params, StftParams):
        return "stft"
    if isinstance(params, CqtParams):
        return "cqt"
    raise UnsupportedRepresentation(f"unknown transform parameters {type(params).__name__}")


@dataclass(frozen=True)
class ComplexSpectrogram:
    data: np.ndarray
    params: Params
    sample_rate: int = DEFAULT_SAMPLE_RATE
    length: Optional[int] = None  # source waveform length, when known

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.complex128)
        if data.ndim != 2 or data.shape[0] < 1:
            raise InvalidArgument(f"spectrogram must be frames x bins, got {data.shape}")
        if data.shape[1] != self.params.n_bins:
            raise InvalidArgument(
                f"spectrogram has {data.shape[1]} bins, params expect {self.params.n_bins}"
            )
        if not np.all(np.isfinite(data)):
            raise InvalidArgument("spectrogram contains non-finite values")
        object.__setattr__(self, "data", data)

    @property
    def repr(self) -> str:
        return _repr_of(self.params)

    @property
    def hop(self) -> int:
        return self.params.hop

    @property
    def n_frames(self) -> int:
        return self.data.shape[0]


@dataclass(frozen=True)
class LogMagSpectrogram:
    data: np.ndarray
    params: Params
    sample_rate: int = DEFAULT_SAMPLE_RATE
    normalization_state: NormalizationState = "raw"
    eps: float = DEFAULT_EPS
    length: Optional[int] = None

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2 or data.shape[0] < 1:
            raise InvalidArgument(f"spectrogram must be frames x bins, got {data.shape}")
        if data.shape[1] != self.params.n_bins:
            raise InvalidArgument(
                f"spectrogram has {data.shape[1]} bins, params expect {self.params.n_bins}"
            )
        if not np.all(np.isfinite(data)):
            raise InvalidArgument("spectrogram contains non-finite values")
        if self.normalization_state not in ("raw", "domain_normalized", "conditioning_shifted"):
            raise InvalidArgument(f"unknown normalization state {self.normalization_state!r}")
        object.__setattr__(self, "data", data)

    @property
    def repr(self) -> str:
        return _repr_of(self.params)

    @property
    def hop(self) -> int:
        return self.params.hop

    @property
    def n_frames(self) -> int:
        return self.data.shape[0]

    @property
    def silence(self) -> float:
        return math.log(self.eps)

    def replace(self, **changes) -> "LogMagSpectrogram":
        fields = dict(
            data=self.data,
            params=self.params,
            sample_rate=self.sample_rate,
            normalization_state=self.normalization_state,
            eps=self.eps,
            length=self.length,
        )
        fields.update(changes)
        return LogMagSpectrogram(**fields)


def hann_window(length: int) -> np.ndarray:
    """Periodic Hann window ``0.5 * (1 - cos(2 pi n / length))``."""
    if length < 2:
        raise InvalidArgument(f"window length must be >= 2, got {length}")
    n = np.arange(length)
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * n / length)


def n_frames_for(n_samples: int, hop: int) -> int:
    return -(-n_samples // hop)


def _as_samples(wave) -> tuple[np.ndarray, int]:
    if isinstance(wave, Waveform):
        return wave.samples, wave.sample_rate
    return Waveform(wave).samples, DEFAULT_SAMPLE_RATE


def _reflect_pad(x: np.ndarray, left: int, right: int) -> np.ndarray:
    if x.shape[0] < 2:
        # reflection is undefined for a single sample; edge repetition is its limit
        return np.pad(x, (left, right), mode="edge")
    return np.pad(x, (left, right), mode="reflect")


def stft(wave, params: StftParams = StftParams()) -> ComplexSpectrogram:
    x, sr = _as_samples(wave)
    if x.shape[0] == 0:
        raise InvalidArgument("cannot transform an empty waveform")
    n_win, hop = params.window_len, params.hop
    n_frames = n_frames_for(x.shape[0], hop)
    half = n_win // 2
    xp = _reflect_pad(x, half, half)
    frames = np.lib.stride_tricks.sliding_window_view(xp, n_win)[::hop][:n_frames]
    data = np.fft.rfft(frames * hann_window(n_win), axis=-1)
    return ComplexSpectrogram(data, params, sr, length=x.shape[0])


def istft_ls(spec: ComplexSpectrogram, length: Optional[int] = None) -> Waveform:
    """Least-squares inverse of :func:`stft`.

    Solves ``min_x ||stft(x) - spec||`` exactly, including the reflect padding:
    overlap-added windowed frames are folded back onto the samples they were
    reflected from and divided by the folded window-square sum.
    """
    if not isinstance(spec.params, StftParams):
        raise UnsupportedRepresentation("istft_ls needs an STFT spectrogram")
    params = spec.params
    n_win, hop = params.window_len, params.hop
    n_frames = spec.n_frames
    if length is None:
        length = spec.length if spec.length is not None else n_frames * hop
    if n_frames_for(length, hop) != n_frames:
        raise InvalidArgument(f"length {length} is inconsistent with {n_frames} frames")
    half = n_win // 2
    window = hann_window(n_win)
    frames = np.fft.irfft(spec.data, n=n_win, axis=-1) * window
    padded_len = length + 2 * half
    ola = np.zeros(padded_len)
    wsum = np.zeros(padded_len)
    for t in range(n_frames):
        s = t * hop
        ola[s : s + n_win] += frames[t]
        wsum[s : s + n_win] += window * window
    source = _reflect_pad(np.arange(length), half, half)
    num = np.bincount(source, weights=ola, minlength=length)
    den = np.bincount(source, weights=wsum, minlength=length)
    return Waveform(num / np.maximum(den, 1e-8), spec.sample_rate)


def _cqt_kernel(params: CqtParams, k: int) -> np.ndarray:
    """Normalised, conjugated kernel for bin ``k``; phase referenced to its centre."""
    n = int(params.kernel_lengths[k])
    j = np.arange(n)
    centre = (n - 1) // 2
    window = 0.5 - 0.5 * np.cos(2.0 * np.pi * j / (n - 1))
    freq = params.frequencies[k]
    phase = np.exp(-2j * np.pi * freq * (j - centre) / params.sample_rate)
    return window * phase / window.sum()


def cqt(wave, params: CqtParams = CqtParams(), *, block: int = 16) -> ComplexSpectrogram:
    """Constant-Q transform by FFT correlation with per-bin kernels.

    Bin ``k`` correlates the signal with a Hann-windowed complex exponential at
    ``f_min * 2**(k / b)`` spanning ``q_factor`` cycles, centred on each frame.
    The correlation is evaluated in the frequency domain and decimated to the
    frame grid by spectral folding, which is exact (no kernel truncation).
    """
    x, sr = _as_samples(wave)
    if x.shape[0] == 0:
        raise InvalidArgument("cannot transform an empty waveform")
    if sr != params.sample_rate:
        raise InvalidArgument(f"waveform rate {sr} Hz != CQT rate {params.sample_rate} Hz")
    return ComplexSpectrogram(cqt_batch(x[None, :], params, block=block)[0], params, sr, x.shape[0])


def cqt_batch(signals: np.ndarray, params: CqtParams, *, block: int = 16) -> np.ndarray:
    """CQT of equal-length signals stacked along axis 0; returns (batch, frames, bins)."""
    signals = np.asarray(signals, dtype=np.float64)
    batch, n = signals.shape
    hop = params.hop
    n_frames = n_frames_for(n, hop)
    lengths = params.kernel_lengths
    pad = int(lengths.max()) // 2
    xp = np.stack([_reflect_pad(s, pad, pad) for s in signals])
    n_fft = hop * scipy.fft.next_fast_len(n_frames_for(xp.shape[1], hop))
    n_dec = n_fft // hop
    spec_x = scipy.fft.fft(xp, n=n_fft, axis=-1)
    out = np.empty((batch, n_frames, params.n_bins), dtype=np.complex128)
    for lo in range(0, params.n_bins, block):
        bins = range(lo, min(lo + block, params.n_bins))
        kernels = np.zeros((len(bins), n_fft), dtype=np.complex128)
        for row, k in enumerate(bins):
            g = _cqt_kernel(params, k)
            offset = pad - (g.shape[0] - 1) // 2
            kernels[row, offset : offset + g.shape[0]] = g
        # correlation y[s] = sum_j x[s + j] g[j]  <=>  Y = X * n_fft * ifft(g)
        spec_g = scipy.fft.ifft(kernels, axis=-1) * n_fft
        prod = spec_x[:, None, :] * spec_g[None, :, :]
        folded = prod.reshape(batch, len(bins), hop, n_dec).sum(axis=2) / hop
        frames = scipy.fft.ifft(folded, axis=-1)[..., :n_frames]
        out[:, :, lo : lo + len(bins)] = frames.transpose(0, 2, 1)
    return out


def log_magnitude(spec: ComplexSpectrogram, eps: float = DEFAULT_EPS) -> LogMagSpectrogram:
    if eps <= 0:
        raise InvalidArgument(f"magnitude floor must be positive, got {eps}")
    data = np.log(np.abs(spec.data) + eps)
    return LogMagSpectrogram(data, spec.params, spec.sample_rate, "raw", eps, spec.length)


def instantaneous_frequency(spec: ComplexSpectrogram) -> np.ndarray:
    """Per-bin phase advance between consecutive frames, wrapped to [-pi, pi).

    Row 0 is zero. Together with :func:`log_magnitude` this is rainbowgram data.
    """
    data = spec.data if isinstance(spec, ComplexSpectrogram) else np.asarray(spec)
    if data.shape[0] < 2:
        raise InvalidArgument("instantaneous frequency needs at least two frames")
    out = np.zeros(data.shape)
    dphi = np.angle(data[1:]) - np.angle(data[:-1])
    wrapped = np.mod(dphi + np.pi, 2.0 * np.pi) - np.pi
    out[1:] = np.where(wrapped >= np.pi, wrapped - 2.0 * np.pi, wrapped)
    return out
