"""Conditional WaveNet: configuration, parameters, teacher-forced forward pass
and its analytic gradient.

Network layout (per position t, all convolutions causal with zero left padding)::

    h   = causal_conv_k(x)                                 # 1 -> R channels
    for each layer l with dilation d_l = 2**(l mod cycle):
        a     = dilated_conv_k(h, d_l) + cond @ W_cond_l   # R -> 2R
        z     = tanh(a[:R]) * sigmoid(a[R:])
        h     = h + z @ W_res_l + b_res_l
        skip += z @ W_skip_l + b_skip_l
    logits = relu(relu(skip) @ W_out1 + b_out1) @ W_out2 + b_out2

The input ``x[t]`` is the previous (mu-law decoded) sample, so logits at t only
see samples strictly before t. The conditioning projection is applied with a
fixed runtime scale of ``1/sqrt(cond_channels)`` (equalised learning rate):
log-magnitude inputs sit far from zero, and without it every Adam step on
``W_cond`` moves the gate pre-activations by roughly ``lr * sum|cond|``.

Parameter tensors are kept in a fixed order (see :func:`param_shapes`), which
is also the on-disk order.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..errors import InvalidArgument, InvalidWeights, ShapeMismatch


@dataclass(frozen=True)
class WaveNetConfig:
    n_layers: int = 40
    dilation_cycle: int = 10
    kernel_size: int = 3
    residual_width: int = 256
    skip_width: int = 256
    gate_width: int = 512
    cond_channels: int = 336
    quant_levels: int = 256
    input_channels: int = 1

    def __post_init__(self):
        for name in ("n_layers", "dilation_cycle", "kernel_size", "residual_width",
                     "skip_width", "gate_width", "cond_channels"):
            if getattr(self, name) < 1:
                raise InvalidArgument(f"{name} must be positive")
        if self.gate_width != 2 * self.residual_width:
            raise InvalidArgument("gate_width must equal 2 * residual_width")
        if self.quant_levels != 256:
            raise InvalidArgument("quant_levels must be 256 (8-bit mu-law)")
        if self.input_channels != 1:
            raise InvalidArgument("the input is a single amplitude channel")

    @classmethod
    def small(cls, n_layers: int, width: int, cond_channels: int = 336,
              dilation_cycle: int = 10) -> "WaveNetConfig":
        return cls(n_layers=n_layers, dilation_cycle=dilation_cycle, residual_width=width,
                   skip_width=width, gate_width=2 * width, cond_channels=cond_channels)

    @property
    def dilations(self) -> list[int]:
        return [2 ** (k % self.dilation_cycle) for k in range(self.n_layers)]

    @property
    def receptive_field(self) -> int:
        return 1 + (self.kernel_size - 1) * (1 + sum(self.dilations))


def param_shapes(cfg: WaveNetConfig) -> list[tuple[str, tuple[int, ...]]]:
    K, R, S, G = cfg.kernel_size, cfg.residual_width, cfg.skip_width, cfg.gate_width
    shapes = [("init.w", (K, 1, R)), ("init.b", (R,))]
    for i in range(cfg.n_layers):
        shapes += [
            (f"layer{i}.dil_w", (K, R, G)),
            (f"layer{i}.dil_b", (G,)),
            (f"layer{i}.cond_w", (cfg.cond_channels, G)),
            (f"layer{i}.res_w", (R, R)),
            (f"layer{i}.res_b", (R,)),
            (f"layer{i}.skip_w", (R, S)),
            (f"layer{i}.skip_b", (S,)),
        ]
    shapes += [
        ("out1.w", (S, S)),
        ("out1.b", (S,)),
        ("out2.w", (S, cfg.quant_levels)),
        ("out2.b", (cfg.quant_levels,)),
    ]
    return shapes


@dataclass
class WaveNetWeights:
    config: WaveNetConfig
    params: dict[str, np.ndarray]
    ema: Optional[dict[str, np.ndarray]] = None

    @property
    def dtype(self):
        return self.params["init.w"].dtype

    def check(self, cfg: Optional[WaveNetConfig] = None) -> None:
        if cfg is not None and cfg != self.config:
            raise ShapeMismatch(f"weights were built for {self.config}, not {cfg}")
        for payload in (self.params, self.ema):
            if payload is None:
                continue
            for name, shape in param_shapes(self.config):
                arr = payload.get(name)
                if arr is None or arr.shape != shape:
                    got = None if arr is None else arr.shape
                    raise ShapeMismatch(f"{name}: expected {shape}, got {got}")
                if not np.all(np.isfinite(arr)):
                    raise InvalidWeights(f"{name} contains non-finite values")

    def copy(self) -> "WaveNetWeights":
        ema = None if self.ema is None else {k: v.copy() for k, v in self.ema.items()}
        return WaveNetWeights(self.config, {k: v.copy() for k, v in self.params.items()}, ema)

    def generation_params(self, use_ema: bool = True) -> dict[str, np.ndarray]:
        """The averaged weights when present, since those are used for generation."""
        if use_ema and self.ema is not None:
            return self.ema
        return self.params

    def astype(self, dtype) -> "WaveNetWeights":
        ema = None if self.ema is None else {k: v.astype(dtype) for k, v in self.ema.items()}
        return WaveNetWeights(self.config, {k: v.astype(dtype) for k, v in self.params.items()}, ema)


def init_weights(cfg: WaveNetConfig, seed: int = 0, dtype=np.float32,
                 with_ema: bool = True) -> WaveNetWeights:
    rng = np.random.default_rng(seed)
    params = {}
    for name, shape in param_shapes(cfg):
        if name.endswith("_b") or name.endswith(".b"):
            arr = np.zeros(shape)
        else:
            fan_in = int(np.prod(shape[:-1]))
            scale = 1.0 / np.sqrt(fan_in)
            if name.endswith("cond_w"):
                scale = 0.1  # effective std 0.1 / sqrt(C) after cond_scale
            elif name == "out2.w":
                scale *= 0.1
            arr = rng.normal(0.0, scale, size=shape)
        params[name] = arr.astype(dtype)
    ema = {k: v.copy() for k, v in params.items()} if with_ema else None
    return WaveNetWeights(cfg, params, ema)


def cond_scale(cfg: WaveNetConfig) -> float:
    return 1.0 / np.sqrt(cfg.cond_channels)


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _causal_taps(h: np.ndarray, kernel: int, dilation: int) -> np.ndarray:
    """(B, T, C) -> (B, T, kernel*C); tap j holds h[t - (kernel-1-j)*dilation]."""
    T = h.shape[1]
    span = (kernel - 1) * dilation
    hp = np.pad(h, ((0, 0), (span, 0), (0, 0)))
    return np.concatenate([hp[:, j * dilation : j * dilation + T] for j in range(kernel)], axis=-1)


def _untap(dtaps: np.ndarray, kernel: int, dilation: int, channels: int) -> np.ndarray:
    B, T, _ = dtaps.shape
    span = (kernel - 1) * dilation
    dhp = np.zeros((B, T + span, channels), dtype=dtaps.dtype)
    for j in range(kernel):
        dhp[:, j * dilation : j * dilation + T] += dtaps[..., j * channels : (j + 1) * channels]
    return dhp[:, span:]


def _as_batch(x, cond, cfg, dtype):
    x = np.asarray(x, dtype=dtype)
    cond = np.asarray(cond, dtype=dtype)
    single = x.ndim == 1
    if single:
        x, cond = x[None], cond[None]
    if x.ndim != 2 or cond.ndim != 3:
        raise InvalidArgument("expected x of shape (B, T) and cond of shape (B, T, C)")
    if cond.shape[:2] != x.shape:
        raise InvalidArgument(
            f"waveform length {x.shape[1]} and conditioning length {cond.shape[1]} differ"
        )
    if cond.shape[2] != cfg.cond_channels:
        raise InvalidArgument(f"conditioning has {cond.shape[2]} channels, expected {cfg.cond_channels}")
    return x, cond, single


def forward(x, cond, cfg: WaveNetConfig, weights: WaveNetWeights | dict, *,
            keep: bool = False):
    """Teacher-forced logits, shape (T, Q) for 1-D input or (B, T, Q) for batches.

    ``x[t]`` is the input amplitude at step t (the previous sample). With
    ``keep=True`` also returns the activations needed by :func:`backward`.
    """
    if isinstance(weights, WaveNetWeights):
        weights.check(cfg)
        params = weights.params
    else:
        params = weights
        for name, arr in params.items():
            if not np.all(np.isfinite(arr)):
                raise InvalidWeights(f"{name} contains non-finite values")
    dtype = params["init.w"].dtype
    x, cond, single = _as_batch(x, cond, cfg, dtype)
    K, R = cfg.kernel_size, cfg.residual_width

    taps0 = _causal_taps(x[..., None], K, 1)
    h = taps0 @ params["init.w"].reshape(K, R) + params["init.b"]
    skip = np.zeros(x.shape + (cfg.skip_width,), dtype=dtype)
    G = cfg.gate_width
    cond_w = np.concatenate([params[f"layer{i}.cond_w"] for i in range(cfg.n_layers)], axis=1)
    cond_all = (cond * dtype.type(cond_scale(cfg))) @ cond_w
    layers = []
    for i, d in enumerate(cfg.dilations):
        p = f"layer{i}."
        taps = _causal_taps(h, K, d)
        a = taps @ params[p + "dil_w"].reshape(K * R, -1) + params[p + "dil_b"]
        a += cond_all[..., i * G : (i + 1) * G]
        ta = np.tanh(a[..., :R])
        sg = _sigmoid(a[..., R:])
        z = ta * sg
        h = h + z @ params[p + "res_w"] + params[p + "res_b"]
        skip += z @ params[p + "skip_w"] + params[p + "skip_b"]
        if keep:
            layers.append((taps, ta, sg, z))
    s1 = np.maximum(skip, 0)
    o1 = s1 @ params["out1.w"] + params["out1.b"]
    s2 = np.maximum(o1, 0)
    logits = s2 @ params["out2.w"] + params["out2.b"]
    out = logits[0] if single else logits
    if not keep:
        return out
    cache = dict(x=x, cond=cond, taps0=taps0, layers=layers, skip=skip, s1=s1, o1=o1, s2=s2)
    return out, cache


def backward(dlogits: np.ndarray, cache: dict, cfg: WaveNetConfig,
             params: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    """Gradient of a scalar loss w.r.t. every parameter, given d loss / d logits."""
    if dlogits.ndim == 2:
        dlogits = dlogits[None]
    K, R, S = cfg.kernel_size, cfg.residual_width, cfg.skip_width

    def flat(a):
        return a.reshape(-1, a.shape[-1])

    grads = {}
    grads["out2.w"] = flat(cache["s2"]).T @ flat(dlogits)
    grads["out2.b"] = dlogits.sum(axis=(0, 1))
    do1 = (dlogits @ params["out2.w"].T) * (cache["o1"] > 0)
    grads["out1.w"] = flat(cache["s1"]).T @ flat(do1)
    grads["out1.b"] = do1.sum(axis=(0, 1))
    dskip = (do1 @ params["out1.w"].T) * (cache["skip"] > 0)
    dskip_flat = flat(dskip)

    da_all = []
    dh = np.zeros(dskip.shape[:2] + (R,), dtype=dskip.dtype)
    for i in reversed(range(cfg.n_layers)):
        d = cfg.dilations[i]
        p = f"layer{i}."
        taps, ta, sg, z = cache["layers"][i]
        z_flat = flat(z)
        grads[p + "skip_w"] = z_flat.T @ dskip_flat
        grads[p + "skip_b"] = dskip_flat.sum(axis=0)
        grads[p + "res_w"] = z_flat.T @ flat(dh)
        grads[p + "res_b"] = dh.sum(axis=(0, 1))
        dz = dskip @ params[p + "skip_w"].T + dh @ params[p + "res_w"].T
        da = np.concatenate([dz * sg * (1.0 - ta * ta), dz * ta * sg * (1.0 - sg)], axis=-1)
        da_flat = flat(da)
        grads[p + "dil_w"] = (flat(taps).T @ da_flat).reshape(K, R, -1)
        grads[p + "dil_b"] = da_flat.sum(axis=0)
        da_all.append(da_flat)
        dtaps = da @ params[p + "dil_w"].reshape(K * R, -1).T
        dh = dh + _untap(dtaps, K, d, R)
    G = cfg.gate_width
    dcond = (flat(cache["cond"]) * cond_scale(cfg)).T @ np.concatenate(da_all[::-1], axis=1)
    for i in range(cfg.n_layers):
        grads[f"layer{i}.cond_w"] = dcond[:, i * G : (i + 1) * G]
    grads["init.w"] = (flat(cache["taps0"]).T @ flat(dh)).reshape(K, 1, R)
    grads["init.b"] = dh.sum(axis=(0, 1))
    return grads


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax(logits))


def nll_and_grads(x, cond, targets, cfg: WaveNetConfig, params: dict[str, np.ndarray]):
    """Mean cross-entropy (nats/sample) of ``targets`` and its parameter gradients."""
    logits, cache = forward(x, cond, cfg, params, keep=True)
    if logits.ndim == 2:
        logits = logits[None]
    targets = np.asarray(targets).reshape(logits.shape[:2])
    logp = log_softmax(logits)
    n = targets.size
    picked = np.take_along_axis(logp, targets[..., None], axis=-1)[..., 0]
    nll = float(-picked.sum() / n)
    dlogits = np.exp(logp)
    np.put_along_axis(dlogits, targets[..., None],
                      np.take_along_axis(dlogits, targets[..., None], axis=-1) - 1.0, axis=-1)
    dlogits /= n
    return nll, backward(dlogits, cache, cfg, params)
