"""CycleGAN loss terms and training schedules, evaluated over plain callables.

Generators are any ``DifferentiableMap`` (only ``value`` is needed);
discriminators additionally expose ``input_gradient`` so the gradient
penalty can be computed without an autodiff framework.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional, Protocol, runtime_checkable

import numpy as np

from .errors import InvalidArgument, NumericFailure

LOG_CLAMP = 1e-7


@runtime_checkable
class DifferentiableMap(Protocol):
    def value(self, x: np.ndarray) -> np.ndarray: ...


@runtime_checkable
class Discriminator(DifferentiableMap, Protocol):
    def input_gradient(self, x: np.ndarray) -> np.ndarray:
        """d value / d x for each batch element, same shape as ``x``."""
        ...


class FunctionMap:
    """Wrap plain functions as a map; ``grad`` is optional."""

    def __init__(self, fn: Callable[[np.ndarray], np.ndarray],
                 grad: Optional[Callable[[np.ndarray], np.ndarray]] = None):
        self._fn = fn
        self._grad = grad

    def value(self, x):
        return self._fn(np.asarray(x, dtype=np.float64))

    def input_gradient(self, x):
        if self._grad is None:
            raise InvalidArgument("this map has no input gradient")
        return self._grad(np.asarray(x, dtype=np.float64))


def _apply(f, x):
    return f.value(x) if hasattr(f, "value") else f(x)


def adversarial_losses(d_real, d_fake, *, non_saturating: bool = False) -> tuple[float, float]:
    """(discriminator loss, generator loss) from discriminator probabilities.

    The generator loss is ``mean log(1 - D(fake))`` (minimised by the generator).
    With ``non_saturating`` it is ``-mean log D(fake)`` instead.
    """
    d_real = np.asarray(d_real, dtype=np.float64)
    d_fake = np.asarray(d_fake, dtype=np.float64)
    for name, d in (("d_real", d_real), ("d_fake", d_fake)):
        if d.size == 0:
            raise InvalidArgument(f"{name} is empty")
        if not np.all(np.isfinite(d)) or d.min() < 0 or d.max() > 1:
            raise InvalidArgument(f"{name} must lie in [0, 1]")
    real = np.clip(d_real, LOG_CLAMP, 1 - LOG_CLAMP)
    fake = np.clip(d_fake, LOG_CLAMP, 1 - LOG_CLAMP)
    disc = -np.mean(np.log(real)) - np.mean(np.log1p(-fake))
    gen = -np.mean(np.log(fake)) if non_saturating else np.mean(np.log1p(-fake))
    return float(disc), float(gen)


def _l1(a, b) -> float:
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise InvalidArgument(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.mean(np.abs(a - b)))


def cycle_consistency_loss(x, y, F, G) -> float:
    """mean|G(F(x)) - x| + mean|F(G(y)) - y|; F maps X to Y, G maps Y to X."""
    return _l1(_apply(G, _apply(F, x)), x) + _l1(_apply(F, _apply(G, y)), y)


def identity_loss(x, y, F, G) -> float:
    """mean|F(y) - y| + mean|G(x) - x|: each generator fed its own target domain."""
    return _l1(_apply(F, y), y) + _l1(_apply(G, x), x)


def gradient_penalty(D, x_real, x_fake, alpha: float = 10.0, seed: int = 0) -> float:
    """alpha * mean over the batch of (||grad D(x_hat)||_2 - 1)^2.

    x_hat interpolates each real/fake pair with one epsilon ~ U(0, 1) per
    batch element (axis 0).
    """
    x_real = np.asarray(x_real, dtype=np.float64)
    x_fake = np.asarray(x_fake, dtype=np.float64)
    if x_real.shape != x_fake.shape:
        raise InvalidArgument(f"shape mismatch: {x_real.shape} vs {x_fake.shape}")
    if x_real.ndim < 2:
        raise InvalidArgument("expected a batch of shape (B, ...)")
    eps = np.random.default_rng(seed).random(x_real.shape[0])
    eps = eps.reshape((-1,) + (1,) * (x_real.ndim - 1))
    x_hat = eps * x_real + (1 - eps) * x_fake
    grad = np.asarray(D.input_gradient(x_hat), dtype=np.float64)
    if grad.shape != x_hat.shape:
        raise InvalidArgument(f"input_gradient returned {grad.shape}, expected {x_hat.shape}")
    if not np.all(np.isfinite(grad)):
        raise NumericFailure("discriminator gradient is not finite")
    norms = np.sqrt(np.sum(grad.reshape(grad.shape[0], -1) ** 2, axis=1))
    return float(alpha * np.mean((norms - 1.0) ** 2))


@dataclass(frozen=True)
class ObjectiveConfig:
    cycle_weight: float = 10.0
    identity_weight_base: float = 5.0
    gp_alpha: float = 10.0
    identity_constant_steps: int = 100_000
    total_steps: int = 1_500_000
    warmup_steps: int = 2500
    lr_peak: float = 1e-4
    lr_start: float = 1e-6
    lr_decay_start: int = 100_000

    def __post_init__(self):
        for name in ("cycle_weight", "identity_weight_base", "gp_alpha", "identity_constant_steps",
                     "total_steps", "warmup_steps", "lr_peak", "lr_start", "lr_decay_start"):
            if getattr(self, name) < 0:
                raise InvalidArgument(f"{name} must be non-negative")
        if self.lr_decay_start > self.total_steps or self.identity_constant_steps > self.total_steps:
            raise InvalidArgument("decay must start before total_steps")
        if self.warmup_steps > self.lr_decay_start:
            raise InvalidArgument("warmup must end before the decay starts")


def _past_end(step, cfg: ObjectiveConfig, what: str) -> bool:
    if step < 0:
        raise InvalidArgument("step must be non-negative")
    if step > cfg.total_steps:
        warnings.warn(f"{what}: step {step} is past total_steps={cfg.total_steps}, using 0",
                      stacklevel=3)
        return True
    return False


def _linear_decay(step, start, end) -> float:
    if end <= start:
        return 0.0
    return (end - step) / (end - start)


def identity_weight(step, cfg: ObjectiveConfig = ObjectiveConfig()) -> float:
    if _past_end(step, cfg, "identity_weight"):
        return 0.0
    if step <= cfg.identity_constant_steps:
        return cfg.identity_weight_base
    return cfg.identity_weight_base * _linear_decay(step, cfg.identity_constant_steps, cfg.total_steps)


def lr(step, cfg: ObjectiveConfig = ObjectiveConfig()) -> float:
    """Exponential warm-up from lr_start to lr_peak, flat, then linear decay to 0."""
    if _past_end(step, cfg, "lr"):
        return 0.0
    if step < cfg.warmup_steps:
        ratio = cfg.lr_peak / cfg.lr_start
        return cfg.lr_start * math.exp(math.log(ratio) * step / cfg.warmup_steps)
    if step <= cfg.lr_decay_start:
        return cfg.lr_peak
    return cfg.lr_peak * _linear_decay(step, cfg.lr_decay_start, cfg.total_steps)


@dataclass(frozen=True)
class ObjectiveParts:
    """Unweighted loss terms. ``gradient_penalty`` excludes alpha; the total applies it."""

    adversarial: float = 0.0
    cycle: float = 0.0
    identity: float = 0.0
    gradient_penalty: float = 0.0


def total_objective(parts: ObjectiveParts, cfg: ObjectiveConfig = ObjectiveConfig(),
                    step: int = 0) -> float:
    values = (parts.adversarial, parts.cycle, parts.identity, parts.gradient_penalty)
    if not all(math.isfinite(v) for v in values):
        raise NumericFailure("objective parts must be finite")
    return (parts.adversarial
            + cfg.cycle_weight * parts.cycle
            + identity_weight(step, cfg) * parts.identity
            + cfg.gp_alpha * parts.gradient_penalty)
