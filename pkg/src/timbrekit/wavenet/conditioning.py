"""Turn a log-magnitude CQT into per-sample WaveNet conditioning."""
from __future__ import annotations

from typing import Optional

import numpy as np

from ..analysis import LogMagSpectrogram
from ..errors import WrongNormalizationState
from ..musical import ConditioningSchedule, retime_conditioning

COND_SHIFT = 2.0


def prepare_conditioning(spec: LogMagSpectrogram, shift: float = COND_SHIFT,
                         schedule: Optional[ConditioningSchedule] = None) -> np.ndarray:
    """Shift by ``shift`` and repeat each frame for its scheduled number of samples.

    Returns a (total_samples, bins) matrix; row t carries frame
    ``t // samples_per_frame`` (nearest-neighbour upsampling).
    """
    if spec.normalization_state != "raw":
        raise WrongNormalizationState(
            f"conditioning needs a raw spectrogram, got {spec.normalization_state}"
        )
    if schedule is None:
        schedule = retime_conditioning(spec, 1.0)
    frames = np.asarray(schedule.frames, dtype=np.float64) + shift
    return np.repeat(frames, schedule.samples_per_frame, axis=0)


def frame_of_sample(t: int, samples_per_frame: int) -> int:
    return t // samples_per_frame
