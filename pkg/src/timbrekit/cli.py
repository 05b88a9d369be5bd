"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 bad input data, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (ComplexSpectrogram, CqtParams, LogMagSpectrogram, StftParams, cqt,
                       log_magnitude, stft)
from .beam import BeamConfig, beam_synthesize
from .dataset import (DomainStats, PieceManifest, chunk_waveform, compute_domain_stats,
                      split_by_piece)
from .errors import NumericFailure, TimbreKitError
from .fileio import load_spectrogram, read_wav, save_spectrogram, write_wav
from .griffinlim import GriffinLimConfig, griffin_lim
from .musical import pitch_shift_cqt, retime_conditioning
from .objectives import ObjectiveConfig, identity_weight, lr
from .rainbowgram import save_rainbowgram
from .wavenet import (TrainConfig, WaveNetConfig, WaveNetSampler, generate, load_weights,
                      prepare_conditioning, save_weights)
from .wavenet.fit import TrainingClip, fit

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_help(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _existing(path) -> Path:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"no such file: {p}")
    return p


def _writable(path) -> Path:
    p = Path(path)
    if not p.parent.exists():
        raise FileNotFoundError(f"output directory does not exist: {p.parent}")
    return p


# ------------------------------------------------------------------ commands

def cmd_analyze(args) -> int:
    src, out = _existing(args.input), _writable(args.out)
    png = _writable(args.png) if args.png else None
    wave = read_wav(src)
    spec = cqt(wave, CqtParams()) if args.repr == "cqt" else stft(wave, StftParams())
    save_spectrogram(out, spec if args.complex else log_magnitude(spec))
    if png is not None:
        save_rainbowgram(png, spec)
    print(f"{out}: {spec.n_frames} frames x {spec.data.shape[1]} bins ({args.repr})")
    return EXIT_OK


def cmd_griffinlim(args) -> int:
    src, out = _existing(args.input), _writable(args.out)
    spec = load_spectrogram(src)
    if isinstance(spec, ComplexSpectrogram):
        if spec.repr != "stft":
            raise UsageError("griffinlim needs an STFT spectrogram")
        mag, log_input, params = np.abs(spec.data), False, spec.params
    else:
        mag, log_input, params = spec, True, None
    cfg = GriffinLimConfig(iterations=args.iterations, phase_init=args.phase_init, seed=args.seed)
    wave, mse = griffin_lim(mag, cfg, params, log_input=log_input)
    write_wav(out, wave)
    print(f"{out}: {len(wave.samples)} samples, mse {mse[0]:.6g} -> {mse[-1]:.6g}")
    return EXIT_OK


def cmd_pitchshift(args) -> int:
    src, out = _existing(args.input), _writable(args.out)
    spec = load_spectrogram(src)
    if not isinstance(spec, LogMagSpectrogram):
        raise UsageError("pitchshift needs a log-magnitude CQT (analyze without --complex)")
    save_spectrogram(out, pitch_shift_cqt(spec, args.semitones))
    return EXIT_OK


def cmd_synth(args) -> int:
    spec_path, weights_path, out = _existing(args.spec), _existing(args.weights), _writable(args.out)
    beam_log = _writable(args.beam_log) if args.beam_log else None
    use_beam = args.beam_width is not None or args.beam_step is not None
    if use_beam and args.stretch != 1.0:
        raise UsageError("beam search scores against the target at its own tempo; drop --stretch")
    spec = load_spectrogram(spec_path)
    if not isinstance(spec, LogMagSpectrogram) or spec.repr != "cqt":
        raise UsageError("synth needs a log-magnitude CQT spectrogram")
    weights = load_weights(weights_path)
    cfg = weights.config
    if spec.params.n_bins != cfg.cond_channels:
        raise UsageError(f"spectrogram has {spec.params.n_bins} bins, weights expect {cfg.cond_channels}")
    cond = prepare_conditioning(spec, schedule=retime_conditioning(spec, args.stretch))
    mode = "greedy" if args.greedy else "sample"

    if not use_beam:
        wave = generate(cond, cfg, weights, mode=mode, seed=args.seed,
                        direction="reverse" if args.reverse else "forward")
        write_wav(out, wave)
        print(f"{out}: {len(wave.samples)} samples")
        return EXIT_OK

    bc = BeamConfig(beam_width=args.beam_width or 8, step=args.beam_step or 2048, seed=args.seed)
    target = spec
    if args.reverse:
        cond = cond[::-1]
        target = spec.replace(data=spec.data[::-1])
    sampler = WaveNetSampler(cfg, weights, cond, greedy=args.greedy)
    records = [{"beam_width": bc.beam_width, "step": bc.step, "lookahead": bc.extension - bc.step,
                "seed": args.seed, "greedy": bool(args.greedy), "reverse": bool(args.reverse)}]
    result = beam_synthesize(target, sampler, bc, log=records.append)
    samples = result.wave.samples[::-1] if args.reverse else result.wave.samples
    write_wav(out, type(result.wave)(np.ascontiguousarray(samples), result.wave.sample_rate))
    if beam_log is not None:
        records.append({"final_score": result.final_score})
        beam_log.write_text("".join(json.dumps(r) + "\n" for r in records))
    print(f"{out}: {len(samples)} samples, beam score {result.final_score:.6g}")
    return EXIT_OK


def _parse_train_config(path) -> TrainConfig:
    types = {f.name: f.type for f in fields(TrainConfig)}
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in types:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        kind = types[key]
        try:
            if "tuple" in str(kind):
                lo, hi = val.split(",")
                values[key] = (float(lo), float(hi))
            elif kind in (bool, "bool"):
                if val.lower() not in ("true", "false", "1", "0"):
                    raise ValueError(val)
                values[key] = val.lower() in ("true", "1")
            elif kind in (int, "int"):
                values[key] = int(val)
            else:
                values[key] = float(val)
        except ValueError:
            raise UsageError(f"{path}:{lineno}: bad value for {key}: {val!r}") from None
    return TrainConfig(**values)


def cmd_train_wavenet(args) -> int:
    inputs = [_existing(p) for p in args.input]
    out = _writable(args.out)
    tc = _parse_train_config(_existing(args.config)) if args.config else TrainConfig()
    cfg = WaveNetConfig.small(args.layers, args.width, dilation_cycle=args.cycle)
    clips = [TrainingClip.from_wave(read_wav(p)) for p in inputs]
    t0 = time.time()

    def report(step, nll):
        if args.log_every and (step % args.log_every == 0 or step == args.steps - 1):
            print(f"step {step} nll {nll:.4f}", file=sys.stderr)

    weights, _, history = fit(clips, cfg, tc, args.steps, reverse=args.reverse, log=report)
    if args.no_ema:
        weights.ema = None
    save_weights(out, weights)
    last = f"{history[-1]:.4f}" if history else "n/a"
    print(f"{out}: {args.steps} steps in {time.time() - t0:.1f}s, final nll {last}")
    return EXIT_OK


def cmd_chunk(args) -> int:
    src = _existing(args.input)
    out_dir = Path(args.out_dir)
    if not out_dir.is_dir():
        raise FileNotFoundError(f"output directory does not exist: {out_dir}")
    for i, chunk in enumerate(chunk_waveform(read_wav(src), args.seconds)):
        write_wav(out_dir / f"{src.stem}_{i:04d}.wav", chunk)
    return EXIT_OK


def cmd_split(args) -> int:
    manifest = PieceManifest.load(_existing(args.manifest))
    train_out, test_out = _writable(args.train_out), _writable(args.test_out)
    train, test = split_by_piece(manifest, args.test_fraction, args.seed)
    train.save(train_out)
    test.save(test_out)
    print(f"{len(train.piece_ids)} train pieces, {len(test.piece_ids)} test pieces")
    return EXIT_OK


def cmd_stats(args) -> int:
    specs = [load_spectrogram(_existing(p)) for p in args.input]
    out = _writable(args.out)
    if not all(isinstance(s, LogMagSpectrogram) for s in specs):
        raise UsageError("stats needs log-magnitude spectrograms")
    stats: DomainStats = compute_domain_stats(specs, args.domain)
    out.write_text(stats.to_json() + "\n")
    return EXIT_OK


def cmd_schedules(args) -> int:
    out = _writable(args.out)
    cfg = ObjectiveConfig()
    if args.every < 1:
        raise UsageError("--every must be positive")
    steps = list(range(0, cfg.total_steps + 1, args.every))
    if steps[-1] != cfg.total_steps:
        steps.append(cfg.total_steps)
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "identity_weight", "lr"])
        for s in steps:
            writer.writerow([s, repr(identity_weight(s, cfg)), repr(lr(s, cfg))])
    return EXIT_OK


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="timbrekit", description="Spectrogram analysis and WaveNet synthesis tools.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("analyze", help="WAV -> .ttsg (log-magnitude by default)")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--repr", choices=["cqt", "stft"], default="cqt")
    p.add_argument("--complex", action="store_true", help="store the complex spectrogram")
    p.add_argument("--png", help="also write a rainbowgram PNG")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("griffinlim", help="STFT .ttsg -> WAV")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--iterations", type=int, default=100)
    p.add_argument("--phase-init", choices=["random", "zero"], default="random")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_griffinlim)

    p = sub.add_parser("pitchshift", help="translate a CQT by whole semitones")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--semitones", type=int, required=True)
    p.set_defaults(func=cmd_pitchshift)

    p = sub.add_parser("synth", help="CQT .ttsg + .ttwn weights -> WAV")
    p.add_argument("--spec", required=True)
    p.add_argument("--weights", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--greedy", action="store_true")
    p.add_argument("--reverse", action="store_true", help="weights were trained on reversed audio")
    p.add_argument("--stretch", type=float, default=1.0)
    p.add_argument("--beam-width", type=int)
    p.add_argument("--beam-step", type=int)
    p.add_argument("--beam-log", help="write per-iteration beam scores as JSON lines")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train-wavenet", help="train a WaveNet on WAV clips")
    p.add_argument("--in", dest="input", nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="key=value file with TrainConfig fields")
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--layers", type=int, default=40)
    p.add_argument("--width", type=int, default=256)
    p.add_argument("--cycle", type=int, default=10)
    p.add_argument("--reverse", action="store_true")
    p.add_argument("--no-ema", action="store_true", help="save raw weights only")
    p.add_argument("--log-every", type=int, default=100)
    p.set_defaults(func=cmd_train_wavenet)

    p = sub.add_parser("chunk", help="split a WAV into fixed-length chunks")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seconds", type=float, default=4.0)
    p.set_defaults(func=cmd_chunk)

    p = sub.add_parser("split", help="piece-disjoint train/test split of a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--train-out", required=True)
    p.add_argument("--test-out", required=True)
    p.add_argument("--test-fraction", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("stats", help="domain mean/std of log-magnitude spectrograms")
    p.add_argument("--in", dest="input", nargs="+", required=True)
    p.add_argument("--domain", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("schedules", help="identity-weight and learning-rate schedules as CSV")
    p.add_argument("--out", required=True)
    p.add_argument("--every", type=int, default=1000)
    p.set_defaults(func=cmd_schedules)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"timbrekit {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericFailure as exc:
        print(f"timbrekit {args.command}: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (TimbreKitError, OSError) as exc:
        print(f"timbrekit {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
