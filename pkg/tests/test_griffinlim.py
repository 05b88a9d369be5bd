import numpy as np
import pytest

from timbrekit.analysis import (ComplexSpectrogram, CqtParams, StftParams, Waveform, cqt, istft_ls,
                                log_magnitude, stft)
from timbrekit.errors import InvalidArgument, UnsupportedRepresentation
from timbrekit.griffinlim import GriffinLimConfig, griffin_lim, spectral_mse

SR = 16000


def harmonic(f0, n=SR // 2):
    t = np.arange(n) / SR
    return sum(0.6 ** k * np.sin(2 * np.pi * f0 * (k + 1) * t) for k in range(5)) * 0.3


def test_true_phase_zero_iterations_recovers_signal():
    x = harmonic(330.0)
    spec = stft(Waveform(x))
    cfg = GriffinLimConfig(iterations=0, phase_init="provided", phase=np.angle(spec.data))
    y, mse = griffin_lim(np.abs(spec.data), cfg, spec.params, length=len(x))
    edge = 672
    err = np.linalg.norm((y.samples - x)[edge:-edge]) / np.linalg.norm(x[edge:-edge])
    assert err < 1e-3
    assert len(mse) == 1 and mse[0] < 1e-8


def test_fixed_point_stays_below_threshold():
    x = harmonic(220.0)
    spec = stft(Waveform(x))
    cfg = GriffinLimConfig(iterations=5, phase_init="provided", phase=np.angle(spec.data))
    _, mse = griffin_lim(np.abs(spec.data), cfg, spec.params, length=len(x))
    assert max(mse) < 1e-8


def test_zero_phase_baseline_is_istft_of_magnitude():
    mag = np.abs(stft(Waveform(harmonic(440.0))).data)
    y, mse = griffin_lim(mag, GriffinLimConfig(iterations=0, phase_init="zero"), StftParams())
    ref = istft_ls(ComplexSpectrogram(mag.astype(complex), StftParams()))
    assert np.array_equal(y.samples, ref.samples)
    assert len(mse) == 1


def test_fifty_iterations_reduce_objective_monotonically():
    mag = np.abs(stft(Waveform(harmonic(261.63, SR))).data)
    _, mse = griffin_lim(mag, GriffinLimConfig(iterations=50, seed=0), StftParams())
    mse = np.array(mse)
    assert mse[-1] < mse[0]
    assert np.all(mse[1:] <= mse[:-1] * (1 + 1e-7))


def test_deterministic_per_seed():
    mag = np.abs(np.random.default_rng(0).normal(size=(12, 337)))
    a = griffin_lim(mag, GriffinLimConfig(iterations=5, seed=9), StftParams())
    b = griffin_lim(mag, GriffinLimConfig(iterations=5, seed=9), StftParams())
    c = griffin_lim(mag, GriffinLimConfig(iterations=5, seed=10), StftParams())
    assert np.array_equal(a[0].samples, b[0].samples) and a[1] == b[1]
    assert not np.array_equal(a[0].samples, c[0].samples)


def test_log_input_is_exponentiated_minus_floor():
    spec = stft(Waveform(harmonic(440.0)))
    lm = log_magnitude(spec)
    y1, m1 = griffin_lim(lm, GriffinLimConfig(iterations=3))
    y2, m2 = griffin_lim(lm.data, GriffinLimConfig(iterations=3), StftParams(), log_input=True,
                         length=lm.length)
    assert np.array_equal(y1.samples, y2.samples)
    lin = np.maximum(np.exp(lm.data) - 1e-5, 0)
    y3, _ = griffin_lim(lin, GriffinLimConfig(iterations=3), StftParams(), length=lm.length)
    assert np.array_equal(y1.samples, y3.samples)


def test_spectral_mse_matches_time_domain_norm():
    # with consistent spectra the weighted MSE equals the framewise energy error
    rng = np.random.default_rng(1)
    a = stft(Waveform(rng.normal(size=2000)))
    b = stft(Waveform(rng.normal(size=2000)))
    w = np.full(337, 2.0)
    w[[0, -1]] = 1
    direct = np.sum(w * (np.abs(b.data) - np.abs(a.data)) ** 2) / (a.n_frames * 672)
    assert spectral_mse(np.abs(a.data), b.data, StftParams()) == pytest.approx(direct)


def test_errors():
    with pytest.raises(UnsupportedRepresentation):
        griffin_lim(np.ones((4, 337)), GriffinLimConfig())
    with pytest.raises(InvalidArgument):
        griffin_lim(-np.ones((4, 337)), GriffinLimConfig(), StftParams())
    with pytest.raises(UnsupportedRepresentation):
        griffin_lim(log_magnitude(cqt(Waveform(harmonic(440.0, 2000)))), GriffinLimConfig())
    with pytest.raises(UnsupportedRepresentation):
        griffin_lim(np.ones((4, 336)), GriffinLimConfig(), CqtParams())
    with pytest.raises(InvalidArgument):
        GriffinLimConfig(iterations=-1)
