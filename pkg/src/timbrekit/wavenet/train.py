"""Teacher-forced training: cross-entropy, Adam, and an EMA shadow of the weights."""
from __future__ import annotations

from dataclasses import dataclass, field, fields
from typing import Sequence

import numpy as np

from ..errors import InvalidArgument, NumericFailure
from .model import WaveNetConfig, WaveNetWeights, nll_and_grads
from .mulaw import mulaw_decode, mulaw_encode


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    batch_size: int = 4
    sample_length: int = 8196
    ema_decay: float = 0.999
    augment_peak_range: tuple[float, float] = (0.1, 1.0)
    augment: bool = True
    cond_shift: float = 2.0
    seed: int = 0

    def __post_init__(self):
        for name in ("learning_rate", "batch_size", "sample_length", "ema_decay"):
            if getattr(self, name) <= 0:
                raise InvalidArgument(f"{name} must be positive")
        lo, hi = self.augment_peak_range
        if not 0 < lo <= hi:
            raise InvalidArgument("augment_peak_range must satisfy 0 < lo <= hi")

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


@dataclass
class AdamState:
    step: int
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]


def init_adam(weights: WaveNetWeights) -> AdamState:
    zeros = {k: np.zeros_like(v) for k, v in weights.params.items()}
    return AdamState(0, zeros, {k: np.zeros_like(v) for k, v in weights.params.items()})


def teacher_forcing_pair(wave: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(inputs, targets): targets are the mu-law codes of ``wave``; inputs are
    the decoded codes delayed by one step, starting from 0."""
    codes = mulaw_encode(np.asarray(wave, dtype=np.float64))
    inputs = np.zeros(codes.shape)
    inputs[..., 1:] = mulaw_decode(codes[..., :-1])
    return inputs, codes


def ema_update(ema: dict[str, np.ndarray], params: dict[str, np.ndarray],
               decay: float) -> dict[str, np.ndarray]:
    return {k: (decay * ema[k] + (1.0 - decay) * params[k]).astype(params[k].dtype)
            for k in params}


def batch_nll(batch: Sequence[tuple[np.ndarray, np.ndarray]], cfg: WaveNetConfig,
              params: dict[str, np.ndarray]):
    waves = np.stack([np.asarray(w, dtype=np.float64) for w, _ in batch])
    conds = np.stack([np.asarray(c) for _, c in batch])
    if conds.shape[:2] != waves.shape:
        raise InvalidArgument("each batch item needs one conditioning row per sample")
    dtype = params["init.w"].dtype
    inputs, targets = teacher_forcing_pair(waves)
    return nll_and_grads(inputs.astype(dtype), conds.astype(dtype), targets, cfg, params)


def train_step(batch, cfg: WaveNetConfig, weights: WaveNetWeights, opt_state: AdamState,
               tc: TrainConfig = TrainConfig()) -> tuple[WaveNetWeights, AdamState, float]:
    """One Adam step on the mean NLL of ``batch`` (pairs of waveform, conditioning).

    Returns new weights (with the EMA shadow advanced), new optimiser state and
    the pre-update NLL in nats/sample. Inputs are not modified.
    """
    weights.check(cfg)
    nll, grads = batch_nll(batch, cfg, weights.params)
    if not np.isfinite(nll):
        raise NumericFailure("training loss is not finite", position=opt_state.step)
    step = opt_state.step + 1
    b1, b2 = tc.beta1, tc.beta2
    new_params, new_m, new_v = {}, {}, {}
    for name, p in weights.params.items():
        g = grads[name]
        m = b1 * opt_state.m[name] + (1 - b1) * g
        v = b2 * opt_state.v[name] + (1 - b2) * g * g
        m_hat = m / (1 - b1 ** step)
        v_hat = v / (1 - b2 ** step)
        new_params[name] = (p - tc.learning_rate * m_hat / (np.sqrt(v_hat) + tc.adam_eps)).astype(p.dtype)
        new_m[name], new_v[name] = m, v
    ema = weights.ema if weights.ema is not None else {k: v.copy() for k, v in weights.params.items()}
    ema = ema_update(ema, new_params, tc.ema_decay)
    return WaveNetWeights(cfg, new_params, ema), AdamState(step, new_m, new_v), nll
