"""Conditional WaveNet synthesizer."""
from .checkpoint import load_weights, save_weights
from .conditioning import COND_SHIFT, prepare_conditioning
from .generate import GenState, WaveNetSampler, generate
from .model import WaveNetConfig, WaveNetWeights, forward, init_weights, param_shapes
from .mulaw import MuLawParams, mulaw_decode, mulaw_encode
from .train import AdamState, TrainConfig, init_adam, train_step

__all__ = [
    "AdamState", "COND_SHIFT", "GenState", "MuLawParams", "TrainConfig", "WaveNetConfig",
    "WaveNetSampler", "WaveNetWeights", "forward", "generate", "init_adam", "init_weights",
    "load_weights", "mulaw_decode", "mulaw_encode", "param_shapes", "prepare_conditioning",
    "save_weights", "train_step",
]
