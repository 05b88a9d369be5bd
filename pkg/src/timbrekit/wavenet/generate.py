"""Autoregressive generation with per-layer ring buffers.

Sampling noise is counter based: the uniform draw for absolute position t
under seed s is fixed regardless of where a run starts, so regenerating a
span from a saved state reproduces it exactly. Beam search relies on this.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Optional, Sequence

import numpy as np

from ..analysis import DEFAULT_SAMPLE_RATE, Waveform
from ..errors import InvalidArgument, NumericFailure
from .model import WaveNetConfig, WaveNetWeights, _sigmoid, cond_scale
from .mulaw import mulaw_decode

NOISE_BLOCK = 4096


@dataclass
class GenState:
    """Generator state for a batch of streams, all at the same position."""

    position: int
    prev: np.ndarray          # (m,) last emitted amplitude, 0 before the first sample
    inputs: np.ndarray        # (m, K) ring of recent inputs for the initial conv
    rings: list[np.ndarray]   # per layer (m, (K-1)*d + 1, R)

    @property
    def batch(self) -> int:
        return self.prev.shape[0]

    def copy(self) -> "GenState":
        return GenState(self.position, self.prev.copy(), self.inputs.copy(),
                        [r.copy() for r in self.rings])

    def take(self, index: int) -> "GenState":
        sl = slice(index, index + 1)
        return GenState(self.position, self.prev[sl].copy(), self.inputs[sl].copy(),
                        [r[sl].copy() for r in self.rings])

    def broadcast(self, m: int) -> "GenState":
        if self.batch == m:
            return self.copy()
        if self.batch != 1:
            raise InvalidArgument(f"cannot broadcast a batch of {self.batch} to {m}")
        return GenState(self.position, np.repeat(self.prev, m), np.repeat(self.inputs, m, 0),
                        [np.repeat(r, m, 0) for r in self.rings])


def uniform_noise(seed: int, start: int, count: int) -> np.ndarray:
    """Uniform [0, 1) draws for absolute positions ``start .. start+count-1``."""
    out = np.empty(count)
    pos = start
    while pos < start + count:
        block = pos // NOISE_BLOCK
        draws = np.random.default_rng([seed, block]).random(NOISE_BLOCK)
        lo = pos - block * NOISE_BLOCK
        hi = min(NOISE_BLOCK, lo + start + count - pos)
        out[pos - start : pos - start + hi - lo] = draws[lo:hi]
        pos += hi - lo
    return out


class WaveNetSampler:
    """Step-by-step sampler over a fixed per-sample conditioning matrix.

    Implements the synthesizer interface used by beam search:
    ``initial_state``, ``run`` and ``select``.
    """

    def __init__(self, cfg: WaveNetConfig, weights: WaveNetWeights, cond: np.ndarray, *,
                 greedy: bool = False, use_ema: bool = True, cond_block: int = 1024):
        weights.check(cfg)
        params = weights.generation_params(use_ema)
        self.cfg = cfg
        self.greedy = greedy
        self.dtype = params["init.w"].dtype
        cond = np.asarray(cond, dtype=self.dtype)
        if cond.ndim != 2 or cond.shape[1] != cfg.cond_channels:
            raise InvalidArgument(f"conditioning must be (T, {cfg.cond_channels}), got {cond.shape}")
        if cond.shape[0] == 0:
            raise InvalidArgument("conditioning is empty")
        if not np.all(np.isfinite(cond)):
            raise InvalidArgument("conditioning contains non-finite values")
        self.cond = cond
        self.length = cond.shape[0]
        K, R = cfg.kernel_size, cfg.residual_width
        self._init_w = params["init.w"].reshape(K, R)
        self._init_b = params["init.b"]
        self._dil_w = [params[f"layer{i}.dil_w"].reshape(K * R, -1) for i in range(cfg.n_layers)]
        self._cond_w = np.stack([params[f"layer{i}.cond_w"] for i in range(cfg.n_layers)])
        self._cond_w = self._cond_w * self.dtype.type(cond_scale(cfg))
        self._dil_b = np.stack([params[f"layer{i}.dil_b"] for i in range(cfg.n_layers)])
        self._rs_w = [np.concatenate([params[f"layer{i}.res_w"], params[f"layer{i}.skip_w"]], 1)
                      for i in range(cfg.n_layers)]
        self._rs_b = [np.concatenate([params[f"layer{i}.res_b"], params[f"layer{i}.skip_b"]])
                      for i in range(cfg.n_layers)]
        self._out = [params[k] for k in ("out1.w", "out1.b", "out2.w", "out2.b")]
        self._sizes = [(K - 1) * d + 1 for d in cfg.dilations]
        self._offsets = [np.array([(K - 1 - j) * d for j in range(K)]) for d in cfg.dilations]
        self._cond_block = cond_block
        self._cond_cache: dict[int, np.ndarray] = {}

    def initial_state(self, batch: int = 1) -> GenState:
        R = self.cfg.residual_width
        return GenState(
            0,
            np.zeros(batch, dtype=self.dtype),
            np.zeros((batch, self.cfg.kernel_size), dtype=self.dtype),
            [np.zeros((batch, size, R), dtype=self.dtype) for size in self._sizes],
        )

    def _cond_rows(self, t: int) -> np.ndarray:
        """Per-layer conditioning projection plus bias at position t: (layers, G)."""
        block = t // self._cond_block
        proj = self._cond_cache.get(block)
        if proj is None:
            if len(self._cond_cache) > 8:
                self._cond_cache.clear()
            rows = self.cond[block * self._cond_block : (block + 1) * self._cond_block]
            proj = np.einsum("tc,lcg->ltg", rows, self._cond_w) + self._dil_b[:, None, :]
            self._cond_cache[block] = proj
        return proj[:, t - block * self._cond_block]

    def _step_logits(self, state: GenState) -> np.ndarray:
        """Advance the buffers by one input (``state.prev``) and return logits for that position."""
        t = state.position
        K, R = self.cfg.kernel_size, self.cfg.residual_width
        state.inputs[:, t % K] = state.prev
        idx0 = (t - np.arange(K - 1, -1, -1)) % K
        h = state.inputs[:, idx0] @ self._init_w + self._init_b
        cond = self._cond_rows(t)
        skip = 0.0
        for i, ring in enumerate(state.rings):
            size = self._sizes[i]
            ring[:, t % size] = h
            taps = ring[:, (t - self._offsets[i]) % size].reshape(h.shape[0], K * R)
            a = taps @ self._dil_w[i] + cond[i]
            z = np.tanh(a[:, :R]) * _sigmoid(a[:, R:])
            rs = z @ self._rs_w[i] + self._rs_b[i]
            h = h + rs[:, :R]
            skip = skip + rs[:, R:]
        w1, b1, w2, b2 = self._out
        o1 = np.maximum(np.maximum(skip, 0) @ w1 + b1, 0)
        return o1 @ w2 + b2

    def run(self, state: GenState, count: int, seeds: Sequence[int],
            probe_ids: Optional[Sequence[int]] = None,
            keep_at: Optional[int] = None) -> tuple[np.ndarray, Optional[GenState]]:
        """Emit ``count`` samples for each seed, starting from ``state``.

        Returns (samples of shape (len(seeds), count), batched state after
        ``keep_at`` samples or None). ``state`` itself is not modified.
        """
        m = len(seeds)
        if state.position + count > self.length:
            raise InvalidArgument("run extends past the end of the conditioning")
        st = state.broadcast(m)
        start = st.position
        noise = None if self.greedy else np.stack([uniform_noise(s, start, count) for s in seeds])
        out = np.empty((m, count))
        kept = st.copy() if keep_at == 0 else None
        for s in range(count):
            logits = self._step_logits(st)
            finite = np.isfinite(logits).all(axis=1)
            if not finite.all():
                bad = int(np.argmin(finite))
                probe = bad if probe_ids is None else probe_ids[bad]
                raise NumericFailure("non-finite logits during generation",
                                     position=st.position, probe=probe)
            if self.greedy:
                codes = np.argmax(logits, axis=1)
            else:
                shifted = np.exp(logits - logits.max(axis=1, keepdims=True))
                cdf = np.cumsum(shifted, axis=1)
                target = noise[:, s] * cdf[:, -1]
                codes = np.minimum((cdf <= target[:, None]).sum(axis=1), logits.shape[1] - 1)
            samples = mulaw_decode(codes)
            out[:, s] = samples
            st.prev = samples.astype(self.dtype)
            st.position += 1
            if keep_at is not None and s + 1 == keep_at:
                kept = st.copy()
        return out, kept

    @staticmethod
    def select(state: GenState, index: int) -> GenState:
        return state.take(index)


def generate(cond: np.ndarray, cfg: WaveNetConfig, weights: WaveNetWeights, *,
             mode: Literal["sample", "greedy"] = "sample", seed: int = 0,
             direction: Literal["forward", "reverse"] = "forward", use_ema: bool = True,
             sample_rate: int = DEFAULT_SAMPLE_RATE) -> Waveform:
    """Generate one sample per conditioning row, starting from an input of 0.

    ``direction="reverse"`` expects weights trained on time-reversed audio and
    conditioning: the conditioning is reversed, generated, and the output
    reversed back.
    """
    if mode not in ("sample", "greedy"):
        raise InvalidArgument(f"unknown mode {mode!r}")
    if direction not in ("forward", "reverse"):
        raise InvalidArgument(f"unknown direction {direction!r}")
    cond = np.asarray(cond)
    if direction == "reverse":
        cond = cond[::-1]
    sampler = WaveNetSampler(cfg, weights, cond, greedy=(mode == "greedy"), use_ema=use_ema)
    samples, _ = sampler.run(sampler.initial_state(), sampler.length, [seed])
    out = samples[0]
    if direction == "reverse":
        out = out[::-1]
    return Waveform(np.ascontiguousarray(out), sample_rate)
