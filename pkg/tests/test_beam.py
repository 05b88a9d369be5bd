import numpy as np
import pytest

from branching import BranchingSynth
from timbrekit.analysis import CqtParams, LogMagSpectrogram, StftParams, Waveform, cqt, log_magnitude, stft
from timbrekit.beam import BeamConfig, beam_synthesize, probe_seed, rescore, segment_scores
from timbrekit.errors import InvalidArgument, NumericFailure, UnsupportedRepresentation
from timbrekit.wavenet import WaveNetConfig, WaveNetSampler, generate, init_weights, prepare_conditioning

STEP = 512


def target_for(synth, code, n_steps, noise=0.0, seed=0):
    x = synth.run(0, n_steps * synth.step, [0], probe_ids=[code])[0][0]
    if noise:
        x = x + np.random.default_rng(seed).normal(0, noise, x.size)
    return log_magnitude(cqt(Waveform(x)))


def exhaustive_best(synth, target, n_steps):
    seqs = synth.all_sequences(n_steps)
    scores = [segment_scores(s[None], 0, target)[0] for s in seqs]
    return seqs[int(np.argmin(scores))], min(scores)


@pytest.mark.parametrize("code", range(4))
@pytest.mark.parametrize("noise", [0.0, 0.02])
def test_two_step_beam_equals_brute_force(code, noise):
    synth = BranchingSynth(2 * STEP, STEP)
    target = target_for(synth, code, 2, noise=noise, seed=code)
    result = beam_synthesize(target, synth, BeamConfig(beam_width=4, step=STEP))
    best, _ = exhaustive_best(synth, target, 2)
    assert np.array_equal(result.wave.samples, best)
    if noise == 0:
        # a noise floor lifts every silent bin, so only the clean target pins the branch
        assert result.chosen == [code]


def test_widening_never_hurts_in_exhaustive_regime():
    synth = BranchingSynth(2 * STEP, STEP)
    target = target_for(synth, 3, 2, noise=0.05)
    scores = [beam_synthesize(target, synth, BeamConfig(beam_width=m, step=STEP)).final_score
              for m in (1, 2, 4)]
    assert scores[2] <= scores[1] <= scores[0]


def test_multi_iteration_commits_and_bookkeeping():
    synth = BranchingSynth(6 * STEP, STEP)
    target = target_for(synth, 0b101101, 6)
    log = []
    result = beam_synthesize(target, synth, BeamConfig(beam_width=4, step=STEP), log=log.append)
    # every iteration commits one step except the last, which takes its lookahead too
    assert result.commits == [(0, STEP), (STEP, STEP), (2 * STEP, STEP), (3 * STEP, STEP), (4 * STEP, 2 * STEP)]
    assert len(result.wave.samples) == 6 * STEP
    assert [r["iteration"] for r in log] == list(range(5))
    assert all(r["beam_width"] == 4 and r["step"] == STEP for r in log)
    again = rescore(result.wave, target, result.commits)
    assert again == pytest.approx(result.final_score, rel=1e-5)
    # each committed piece is the head of the chosen probe's extension
    for (start, count), chosen in zip(result.commits, result.chosen):
        probe = synth.run(start, count, [0], probe_ids=[chosen])[0][0]
        assert np.array_equal(result.wave.samples[start : start + count], probe)


def test_prefix_is_never_modified():
    synth = BranchingSynth(4 * STEP, STEP)
    target = target_for(synth, 0b0110, 4, noise=0.05)
    prefixes = []
    full = beam_synthesize(target, synth, BeamConfig(beam_width=2, step=STEP))
    for start, count in full.commits:
        prefixes.append(full.wave.samples[: start + count].copy())
    for a, b in zip(prefixes, prefixes[1:]):
        assert np.array_equal(b[: len(a)], a)


def test_deterministic():
    synth = BranchingSynth(4 * STEP, STEP)
    target = target_for(synth, 5, 4, noise=0.1)
    a = beam_synthesize(target, synth, BeamConfig(beam_width=3, step=STEP, seed=4))
    b = beam_synthesize(target, synth, BeamConfig(beam_width=3, step=STEP, seed=4))
    assert np.array_equal(a.wave.samples, b.wave.samples) and a.probe_scores == b.probe_scores


def _wavenet_setup(frames=8):
    cfg = WaveNetConfig.small(3, 8)
    weights = init_weights(cfg, seed=2)
    t = np.arange(frames * 256) / 16000
    target = log_magnitude(cqt(Waveform(0.3 * np.sin(2 * np.pi * 330 * t))))
    return cfg, weights, target, prepare_conditioning(target)


def test_width_one_matches_plain_generation():
    cfg, weights, target, cond = _wavenet_setup()
    for step in (256, 700):
        beam = beam_synthesize(target, WaveNetSampler(cfg, weights, cond), BeamConfig(1, step, seed=3))
        assert np.array_equal(beam.wave.samples, generate(cond, cfg, weights, seed=3).samples)


def test_wavenet_beam_runs_and_scores_consistently():
    cfg, weights, target, cond = _wavenet_setup()
    result = beam_synthesize(target, WaveNetSampler(cfg, weights, cond), BeamConfig(4, 512, seed=1))
    assert len(result.wave.samples) == 8 * 256
    assert result.final_score == pytest.approx(rescore(result.wave, target, result.commits), rel=1e-5)
    for scores, chosen in zip(result.probe_scores, result.chosen):
        assert chosen == int(np.argmin(scores))


def test_short_target_is_plain_generation():
    cfg, weights, target, cond = _wavenet_setup(frames=4)
    result = beam_synthesize(target, WaveNetSampler(cfg, weights, cond), BeamConfig(8, 2048, seed=6))
    assert np.array_equal(result.wave.samples, generate(cond, cfg, weights, seed=6).samples)
    assert len(result.probe_scores[0]) == 1


def test_probe_seeds():
    assert probe_seed(7, 0, 0) == 7 and probe_seed(7, 5, 0) == 7
    seeds = {probe_seed(7, it, p) for it in range(4) for p in range(1, 8)}
    assert len(seeds) == 28
    assert probe_seed(7, 1, 2) == probe_seed(7, 1, 2)


def test_defaults():
    cfg = BeamConfig()
    assert (cfg.beam_width, cfg.step, cfg.extension) == (8, 2048, 4096)
    with pytest.raises(InvalidArgument):
        BeamConfig(beam_width=0)


class FailingSynth(BranchingSynth):
    def run(self, state, count, seeds, probe_ids=None, keep_at=None):
        raise NumericFailure("boom", position=state + 3, probe=2)


def test_failure_propagates_probe_index():
    synth = FailingSynth(2 * STEP, STEP)
    target = target_for(BranchingSynth(2 * STEP, STEP), 0, 2)
    with pytest.raises(NumericFailure) as info:
        beam_synthesize(target, synth, BeamConfig(beam_width=4, step=STEP))
    assert info.value.probe == 2 and info.value.position == 3
    assert "probe 2" in str(info.value)


def test_input_errors():
    synth = BranchingSynth(2 * STEP, STEP)
    stft_target = log_magnitude(stft(Waveform(np.ones(1024))))
    with pytest.raises(UnsupportedRepresentation):
        beam_synthesize(stft_target, synth)
    target = target_for(synth, 0, 2)
    with pytest.raises(InvalidArgument):
        beam_synthesize(target.replace(normalization_state="domain_normalized"), synth)
    with pytest.raises(InvalidArgument):
        beam_synthesize(target, BranchingSynth(STEP, STEP))
