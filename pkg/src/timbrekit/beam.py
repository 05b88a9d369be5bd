"""Beam search over autoregressive synthesis, scored by CQT discrepancy.

Each iteration advances ``beam_width`` probes by ``step + lookahead`` samples
from the committed prefix, scores every probe by the squared error between the
log-magnitude CQT of its extension and the aligned target frames, and commits
the first ``step`` samples of the best probe. All probes then restart from the
new prefix. When a probe reaches the end of the target there is nothing left to
look ahead to, so the whole extension is committed.
"""
from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Protocol, Sequence

import numpy as np

from .analysis import CqtParams, LogMagSpectrogram, Waveform, cqt_batch, n_frames_for
from .errors import InvalidArgument, NumericFailure, UnsupportedRepresentation

_U64 = (1 << 64) - 1


class Synthesizer(Protocol):
    """Anything that can extend a prefix stochastically, e.g. ``WaveNetSampler``."""

    length: int

    def initial_state(self) -> Any: ...

    def run(self, state: Any, count: int, seeds: Sequence[int],
            probe_ids: Optional[Sequence[int]] = None,
            keep_at: Optional[int] = None) -> tuple[np.ndarray, Any]: ...

    def select(self, state: Any, index: int) -> Any: ...


@dataclass(frozen=True)
class BeamConfig:
    beam_width: int = 8
    step: int = 2048
    lookahead: Optional[int] = None  # defaults to ``step``
    seed: int = 0

    def __post_init__(self):
        if self.beam_width < 1:
            raise InvalidArgument("beam_width must be >= 1")
        if self.step < 1:
            raise InvalidArgument("step must be >= 1")
        if self.lookahead is not None and self.lookahead < 0:
            raise InvalidArgument("lookahead must be >= 0")

    @property
    def extension(self) -> int:
        return self.step + (self.step if self.lookahead is None else self.lookahead)


def probe_seed(seed: int, iteration: int, probe: int) -> int:
    """Seed for one probe. Probe 0 follows the base stream, so a width-1 beam
    reproduces plain generation; the others XOR in a hash of (iteration, probe)."""
    if probe == 0:
        return seed & _U64
    digest = hashlib.blake2b(struct.pack("<QQ", iteration, probe), digest_size=8).digest()
    return (seed ^ int.from_bytes(digest, "little")) & _U64


def segment_scores(segments: np.ndarray, start: int, target: LogMagSpectrogram) -> np.ndarray:
    """Squared log-CQT error of each row of ``segments`` (placed at sample ``start``)
    against the overlapping target frames."""
    params = target.params
    segments = np.atleast_2d(segments)
    spec = np.log(np.abs(cqt_batch(segments, params)) + target.eps)
    first = start // params.hop
    n = min(spec.shape[1], target.n_frames - first)
    if n <= 0:
        return np.zeros(segments.shape[0])
    diff = spec[:, :n] - target.data[first : first + n][None]
    return np.sum(diff * diff, axis=(1, 2))


@dataclass
class BeamResult:
    wave: Waveform
    commits: list[tuple[int, int]] = field(default_factory=list)   # (start, count)
    chosen: list[int] = field(default_factory=list)
    probe_scores: list[list[float]] = field(default_factory=list)
    committed_scores: list[float] = field(default_factory=list)

    @property
    def final_score(self) -> float:
        return float(sum(self.committed_scores))


def rescore(wave, target: LogMagSpectrogram, commits: Sequence[tuple[int, int]]) -> float:
    """Recompute the committed score of a finished waveform from scratch."""
    x = wave.samples if isinstance(wave, Waveform) else np.asarray(wave, dtype=np.float64)
    return float(sum(segment_scores(x[None, s : s + n], s, target)[0] for s, n in commits))


def beam_synthesize(target: LogMagSpectrogram, synth: Synthesizer, cfg: BeamConfig = BeamConfig(),
                    *, log: Optional[Callable[[dict], None]] = None) -> BeamResult:
    if not isinstance(target, LogMagSpectrogram) or not isinstance(target.params, CqtParams):
        raise UnsupportedRepresentation("beam search scores against a log-magnitude CQT")
    if target.normalization_state != "raw":
        raise InvalidArgument("beam search needs the raw (denormalized) target spectrogram")
    total = target.n_frames * target.hop
    if synth.length < total:
        raise InvalidArgument(f"synthesizer covers {synth.length} samples, target needs {total}")

    result = BeamResult(Waveform(np.zeros(0), target.sample_rate))
    pieces = []
    state = synth.initial_state()
    k = 0
    iteration = 0
    while k < total:
        ext = min(cfg.extension, total - k)
        short = total < cfg.step
        # final iteration: keep everything generated, there is nothing left to look ahead to
        commit = ext if (k + ext >= total or short) else cfg.step
        # a target shorter than one step is plain generation
        width = 1 if short else cfg.beam_width
        seeds = [probe_seed(cfg.seed, iteration, i) for i in range(width)]
        try:
            samples, kept = synth.run(state, ext, seeds, probe_ids=list(range(width)),
                                      keep_at=commit)
        except NumericFailure as exc:
            probe = getattr(exc, "probe", None)
            raise NumericFailure(
                f"probe {probe} failed in beam iteration {iteration}: {exc}",
                position=exc.position, probe=probe,
            ) from exc
        scores = segment_scores(samples, k, target)
        best = int(np.argmin(scores))  # ties go to the lowest probe index
        piece = np.array(samples[best, :commit], dtype=np.float64)
        pieces.append(piece)
        committed = float(segment_scores(piece[None], k, target)[0])
        result.commits.append((k, commit))
        result.chosen.append(best)
        result.probe_scores.append([float(s) for s in scores])
        result.committed_scores.append(committed)
        if log is not None:
            log({
                "iteration": iteration,
                "start": k,
                "commit": commit,
                "beam_width": width,
                "step": cfg.step,
                "scores": result.probe_scores[-1],
                "chosen": best,
                "committed_score": committed,
            })
        if k + commit < total:
            state = synth.select(kept, best)
        k += commit
        iteration += 1
    result.wave = Waveform(np.concatenate(pieces), target.sample_rate)
    return result
