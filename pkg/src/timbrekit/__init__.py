"""Time-frequency analysis, phase reconstruction and conditional WaveNet synthesis
for timbre-transfer experiments."""
from .analysis import (ComplexSpectrogram, CqtParams, LogMagSpectrogram, StftParams, Waveform,
                       cqt, hann_window, instantaneous_frequency, istft_ls, log_magnitude, stft)
from .griffinlim import GriffinLimConfig, griffin_lim
from .musical import detect_f0, pitch_shift_cqt, retime_conditioning

__version__ = "0.1.0"

__all__ = [
    "ComplexSpectrogram", "CqtParams", "GriffinLimConfig", "LogMagSpectrogram", "StftParams",
    "Waveform", "cqt", "detect_f0", "griffin_lim", "hann_window", "instantaneous_frequency",
    "istft_ls", "log_magnitude", "pitch_shift_cqt", "retime_conditioning", "stft",
]
