"""Training driver: random crops, peak-rescale augmentation and the step loop.

The CQT of each source clip is computed once. Rescaling a waveform by s scales
its complex CQT by s, so augmented conditioning is ``ln(s|C| + eps)`` without
re-running the transform.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from ..analysis import DEFAULT_EPS, CqtParams, Waveform, cqt
from ..errors import InvalidArgument, NoSignal
from .model import WaveNetConfig, WaveNetWeights, init_weights
from .train import AdamState, TrainConfig, init_adam, train_step


@dataclass
class TrainingClip:
    samples: np.ndarray
    cqt_data: np.ndarray       # frames x bins, complex
    hop: int

    @classmethod
    def from_wave(cls, wave: Waveform, params: CqtParams = CqtParams()) -> "TrainingClip":
        if np.max(np.abs(wave.samples)) <= 0:
            raise NoSignal("training clip is silent")
        return cls(wave.samples, cqt(wave, params).data, params.hop)


def sample_example(clip: TrainingClip, tc: TrainConfig, rng: np.random.Generator, *,
                   reverse: bool = False, eps: float = DEFAULT_EPS) -> tuple[np.ndarray, np.ndarray]:
    """One (waveform crop, per-sample conditioning) pair."""
    n = clip.samples.shape[0]
    length = min(tc.sample_length, n)
    start = int(rng.integers(0, n - length + 1))
    scale = 1.0
    if tc.augment:
        peak = np.max(np.abs(clip.samples))
        scale = rng.uniform(*tc.augment_peak_range) / peak
    frames = np.log(np.abs(clip.cqt_data) * scale + eps) + tc.cond_shift
    rows = np.arange(start, start + length) // clip.hop
    wave = clip.samples[start : start + length] * scale
    cond = frames[rows]
    if reverse:
        wave, cond = wave[::-1], cond[::-1]
    return np.ascontiguousarray(wave), np.ascontiguousarray(cond)


def fit(clips: Sequence[TrainingClip], cfg: WaveNetConfig, tc: TrainConfig, steps: int, *,
        weights: Optional[WaveNetWeights] = None, reverse: bool = False,
        log: Optional[Callable[[int, float], None]] = None
        ) -> tuple[WaveNetWeights, AdamState, list[float]]:
    """Run ``steps`` training steps; each batch draws ``batch_size`` clips with replacement
    (or takes them in order when there are exactly ``batch_size`` clips)."""
    if not clips:
        raise InvalidArgument("no training clips")
    if steps < 0:
        raise InvalidArgument("steps must be non-negative")
    rng = np.random.default_rng(tc.seed)
    if weights is None:
        weights = init_weights(cfg, tc.seed)
    opt = init_adam(weights)
    lengths = {min(tc.sample_length, c.samples.shape[0]) for c in clips}
    if len(lengths) != 1:
        raise InvalidArgument("clips shorter than sample_length must all have the same length")
    history = []
    for step in range(steps):
        if len(clips) == tc.batch_size:
            chosen = range(len(clips))
        else:
            chosen = rng.integers(0, len(clips), tc.batch_size)
        batch = [sample_example(clips[i], tc, rng, reverse=reverse) for i in chosen]
        weights, opt, nll = train_step(batch, cfg, weights, opt, tc)
        history.append(nll)
        if log is not None:
            log(step, nll)
    return weights, opt, history
