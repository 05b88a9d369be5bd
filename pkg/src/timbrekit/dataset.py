"""Corpus preparation: chunking, piece-level splits, peak-rescale augmentation
and per-domain normalisation of log-magnitude spectrograms."""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .analysis import LogMagSpectrogram, Waveform
from .errors import (CannotSplit, CorruptFile, DegenerateStats, InvalidArgument, NoSignal,
                     WrongNormalizationState)

NORMALIZATION_SIGMAS = 3.0
PEAK_RANGE = (0.1, 1.0)


@dataclass(frozen=True)
class ManifestEntry:
    piece_id: str
    path: str
    domain: str


@dataclass(frozen=True)
class PieceManifest:
    """One record per audio file. A piece may span several files."""

    entries: tuple[ManifestEntry, ...]

    def __post_init__(self):
        if not self.entries:
            raise InvalidArgument("manifest is empty")
        seen = set()
        for e in self.entries:
            if e.path in seen:
                raise InvalidArgument(f"duplicate path {e.path!r} in manifest")
            seen.add(e.path)

    @classmethod
    def from_records(cls, records: Iterable[tuple[str, str, str]]) -> "PieceManifest":
        return cls(tuple(ManifestEntry(*r) for r in records))

    @property
    def piece_ids(self) -> list[str]:
        """Distinct piece ids in first-seen order."""
        return list(dict.fromkeys(e.piece_id for e in self.entries))

    def subset(self, pieces) -> "PieceManifest":
        keep = set(pieces)
        return PieceManifest(tuple(e for e in self.entries if e.piece_id in keep))

    def dumps(self) -> str:
        return "".join(f"{e.piece_id}\t{e.path}\t{e.domain}\n" for e in self.entries)

    @classmethod
    def loads(cls, text: str) -> "PieceManifest":
        records = []
        for lineno, line in enumerate(text.splitlines(), 1):
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 3 or not all(parts):
                raise CorruptFile(f"manifest line {lineno}: expected piece_id<TAB>path<TAB>domain")
            records.append(parts)
        return cls.from_records(records)

    def save(self, path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def load(cls, path) -> "PieceManifest":
        return cls.loads(Path(path).read_text())


def chunk_waveform(wave: Waveform, seconds: float = 4.0) -> list[Waveform]:
    """Consecutive non-overlapping chunks of round(seconds * sr) samples; the
    remainder is dropped."""
    if not seconds > 0:
        raise InvalidArgument("seconds must be positive")
    size = int(np.floor(seconds * wave.sample_rate + 0.5))
    if size < 1:
        raise InvalidArgument("chunk length rounds to zero samples")
    n = len(wave.samples) // size
    if n == 0:
        warnings.warn(f"waveform of {len(wave.samples)} samples is shorter than one "
                      f"{size}-sample chunk", stacklevel=2)
    return [Waveform(wave.samples[i * size : (i + 1) * size].copy(), wave.sample_rate)
            for i in range(n)]


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def split_by_piece(manifest: PieceManifest, test_fraction: float = 0.2,
                   seed: int = 0) -> tuple[PieceManifest, PieceManifest]:
    """Partition pieces into (train, test) manifests.

    The train count is round_half_up((1 - f) * n) and test takes the rest,
    clamped so both sides keep at least one piece.
    """
    pieces = sorted(manifest.piece_ids)
    n = len(pieces)
    if n < 2:
        raise CannotSplit(f"need at least 2 pieces to split, got {n}")
    if not 0 < test_fraction < 1:
        raise InvalidArgument("test_fraction must be in (0, 1)")
    n_test = n - _round_half_up((1 - test_fraction) * n)
    n_test = min(max(n_test, 1), n - 1)
    order = np.random.default_rng(seed).permutation(n)
    test = {pieces[i] for i in order[:n_test]}
    return manifest.subset(p for p in pieces if p not in test), manifest.subset(test)


def augment_rescale(wave: Waveform, rng: np.random.Generator,
                    peak_range: tuple[float, float] = PEAK_RANGE) -> Waveform:
    """Rescale so the peak becomes s ~ U(peak_range)."""
    x = wave.samples
    peak = float(np.max(np.abs(x))) if x.size else 0.0
    if peak <= 0:
        raise NoSignal("cannot rescale a silent waveform")
    s = rng.uniform(*peak_range)
    return Waveform(x * (s / peak), wave.sample_rate)


@dataclass(frozen=True)
class DomainStats:
    domain: str
    mean: float
    std: float
    scale_rule: str = "3sigma"

    def __post_init__(self):
        if not (np.isfinite(self.std) and self.std > 0):
            raise DegenerateStats(f"std must be positive, got {self.std}")
        if self.scale_rule != "3sigma":
            raise InvalidArgument(f"unknown scale rule {self.scale_rule!r}")

    def to_json(self) -> str:
        return json.dumps({"domain": self.domain, "mean": self.mean, "std": self.std,
                           "scale_rule": self.scale_rule})

    @classmethod
    def from_json(cls, text: str) -> "DomainStats":
        try:
            d = json.loads(text)
            return cls(str(d["domain"]), float(d["mean"]), float(d["std"]), d.get("scale_rule", "3sigma"))
        except (ValueError, KeyError, TypeError) as exc:
            raise CorruptFile(f"bad stats file: {exc}") from exc


def _grid(spec) -> np.ndarray:
    if isinstance(spec, LogMagSpectrogram):
        if spec.normalization_state != "raw":
            raise WrongNormalizationState("stats must be computed on raw spectrograms")
        return spec.data
    return np.asarray(spec, dtype=np.float64)


def compute_domain_stats(specs: Sequence, domain: str = "") -> DomainStats:
    """Mean and population std over every cell of every spectrogram.

    Two passes (sum, then squared deviations), each summed per spectrogram
    with the totals accumulated in sorted order so the result does not depend
    on the order of ``specs``.
    """
    grids = [_grid(s) for s in specs]
    if not grids or sum(g.size for g in grids) == 0:
        raise DegenerateStats("no data to compute statistics from")
    count = sum(g.size for g in grids)
    mean = float(np.sum(np.sort([np.sum(g, dtype=np.float64) for g in grids]))) / count
    ss = float(np.sum(np.sort([np.sum((g - mean) ** 2) for g in grids])))
    std = float(np.sqrt(ss / count))
    if not std > 0:
        raise DegenerateStats("spectrograms have zero variance")
    return DomainStats(domain, mean, std)


def normalize(spec: LogMagSpectrogram, stats: DomainStats) -> LogMagSpectrogram:
    """(x - mean) / (3 std); moves the state from raw to domain_normalized."""
    if spec.normalization_state != "raw":
        raise WrongNormalizationState(f"expected a raw spectrogram, got {spec.normalization_state}")
    scale = NORMALIZATION_SIGMAS * stats.std
    return spec.replace(data=(spec.data - stats.mean) / scale, normalization_state="domain_normalized")


def denormalize(spec: LogMagSpectrogram, stats: DomainStats) -> LogMagSpectrogram:
    if spec.normalization_state != "domain_normalized":
        raise WrongNormalizationState(
            f"expected a domain_normalized spectrogram, got {spec.normalization_state}")
    scale = NORMALIZATION_SIGMAS * stats.std
    return spec.replace(data=spec.data * scale + stats.mean, normalization_state="raw")
