"""Command-line entry point: ``vocgan <command> ...``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import dsp, metrics
from .autodiff import CheckpointError
from .autodiff.functional import ShapeError
from .corpus import make_corpus, synthetic_utterance
from .generator import ConfigError, load_generator
from .trainer import ABLATION_PRESETS, Ablation, DatasetError, NumericalError, TrainConfig, run_training

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

log = logging.getLogger("vocgan")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad flags; 2 is reserved for data errors here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# --- prepare -------------------------------------------------------------------------

def cmd_prepare(args):
    data_dir, out_dir = Path(args.data_dir), Path(args.out_dir)
    if not data_dir.is_dir():
        raise UsageError(f"{data_dir} is not a directory")
    mel_dir = out_dir / "mels"
    mel_dir.mkdir(parents=True, exist_ok=True)
    rows, rejected = [], []
    for path in sorted(data_dir.glob("*.wav")):
        try:
            w = dsp.read_wav(path, sample_rate=None)
            if w.sample_rate != dsp.SAMPLE_RATE:
                if not args.resample:
                    raise dsp.SampleRateError(
                        f"{path}: sample rate {w.sample_rate} Hz (use --resample)")
                w = dsp.resample(w, dsp.SAMPLE_RATE)
        except (dsp.AudioFormatError, dsp.SampleRateError) as exc:
            rejected.append((str(path), str(exc)))
            log.warning("rejected %s", exc)
            continue
        mel = dsp.mel_spectrogram(w)
        mel_path = mel_dir / (path.stem + ".vocm")
        dsp.save_mel(mel_path, mel)
        rows.append((str(path), str(mel_path), mel.n_frames))

    with open(out_dir / "manifest.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["wav_path", "mel_path", "n_frames"])
        writer.writerows(rows)
    with open(out_dir / "rejected.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["wav_path", "reason"])
        writer.writerows(rejected)
    print(f"prepared {len(rows)} files, rejected {len(rejected)}")
    if not rows:
        raise DatasetError(f"{data_dir}: no usable WAV files")
    return EXIT_OK


def read_manifest(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# --- train ---------------------------------------------------------------------------

def cmd_train(args):
    if args.config:
        try:
            cfg = TrainConfig.load(args.config)
        except (OSError, ValueError, TypeError) as exc:
            raise UsageError(f"bad config {args.config}: {exc}") from exc
    else:
        cfg = TrainConfig.toy() if args.preset == "toy" else TrainConfig.full()
    overrides = {}
    if args.ablation:
        overrides["ablation"] = Ablation.preset(args.ablation)
    for name in ("steps", "seed", "batch_size"):
        value = getattr(args, name)
        if value is not None:
            overrides[name] = value
    cfg = replace(cfg, **overrides)
    trainer = run_training(cfg, dataset_dir=args.data, out_dir=args.out, resume=args.resume)
    print(f"trained to step {trainer.step}; outputs in {args.out}")
    return EXIT_OK


# --- synth ---------------------------------------------------------------------------

def cmd_synth(args):
    G = load_generator(args.checkpoint)
    if args.mel:
        mel = dsp.load_mel(args.mel)
    else:
        mel = dsp.mel_spectrogram(dsp.read_wav(args.wav))
    mel = dsp.MelSpectrogram(mel.values.astype(G.parameters()[0].dtype))
    audio = generate_checked(G, mel)
    dsp.write_wav(args.out, dsp.Waveform(audio, dsp.SAMPLE_RATE))
    print(f"wrote {len(audio)} samples to {args.out}")
    return EXIT_OK


def generate_checked(G, mel):
    from .generator import generate_full

    audio = np.asarray(generate_full(G, mel), dtype=np.float64)
    if not np.all(np.isfinite(audio)):
        raise NumericalError("generator produced non-finite samples")
    return audio


# --- eval ----------------------------------------------------------------------------

def cmd_eval(args):
    paths = sorted(Path(args.data).glob("*.wav"))
    if not paths:
        raise DatasetError(f"{args.data}: no WAV files found")
    G = load_generator(args.checkpoint) if args.checkpoint else None
    traj_dir = Path(args.trajectories) if args.trajectories else None
    if traj_dir:
        traj_dir.mkdir(parents=True, exist_ok=True)
    per_utt = []
    for path in paths:
        x = dsp.read_wav(path)
        if G is None:
            # ground truth scored against itself
            x_hat = dsp.Waveform(x.samples.copy(), x.sample_rate)
        else:
            mel = dsp.mel_spectrogram(x)
            mel = dsp.MelSpectrogram(mel.values.astype(G.parameters()[0].dtype))
            x_hat = dsp.Waveform(generate_checked(G, mel), dsp.SAMPLE_RATE)
        entry = {"file": path.name, **metrics.evaluate_pair(x, x_hat)}
        per_utt.append(entry)
        if traj_dir:
            metrics.dump_f0_trajectory(x, x_hat, traj_dir / f"{path.stem}_f0.csv")
    report = {
        "system": str(args.checkpoint) if args.checkpoint else "ground_truth",
        "per_utterance": [_json_safe(u) for u in per_utt],
        "mean": _json_safe(metrics.summarize(per_utt)),
    }
    _write_json(args.report, report)
    mean = report["mean"]
    print(f"MCD {mean['mcd_db']} dB, F0 RMSE {mean['f0_rmse_hz']} Hz over {len(per_utt)} files")
    return EXIT_OK


# --- bench ---------------------------------------------------------------------------

def cmd_bench(args):
    G = load_generator(args.checkpoint)
    dtype = G.parameters()[0].dtype
    if args.data:
        paths = sorted(Path(args.data).glob("*.wav"))
        if not paths:
            raise DatasetError(f"{args.data}: no WAV files found")
        mels = [dsp.mel_spectrogram(dsp.read_wav(p)) for p in paths]
    else:
        mels = [dsp.mel_spectrogram(synthetic_utterance(i, args.seconds)) for i in range(args.clips)]
    mels = [dsp.MelSpectrogram(m.values.astype(dtype)) for m in mels]
    report = metrics.benchmark_rtf(G, mels, threads=args.threads, repeats=args.repeats,
                                   warmup=args.warmup)
    _write_json(args.report, report)
    print(f"RTF median {report['rtf_median']:.3f} (variance {report['rtf_variance']:.3g}) "
          f"over {report['repeats']} runs, {report['threads']} thread(s)")
    return EXIT_OK


# --- corpus --------------------------------------------------------------------------

def cmd_corpus(args):
    paths = make_corpus(args.out, n_clips=args.clips, seconds=args.seconds, seed=args.seed)
    print(f"wrote {len(paths)} WAVs to {args.out}")
    return EXIT_OK


def _json_safe(d):
    # JSON has no NaN; undefined metrics become null
    return {k: (None if isinstance(v, float) and not np.isfinite(v) else v) for k, v in d.items()}


def _write_json(path, obj):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def build_parser():
    p = _Parser(prog="vocgan", description="Multi-scale GAN vocoder toolkit.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("prepare", help="validate WAVs, cache mels, write a manifest")
    s.add_argument("--data-dir", required=True)
    s.add_argument("--out-dir", required=True)
    s.add_argument("--resample", action="store_true", help="resample other rates to 22050 Hz")
    s.set_defaults(func=cmd_prepare)

    s = sub.add_parser("train", help="train generator and discriminators")
    s.add_argument("--config", help="TrainConfig JSON file")
    s.add_argument("--preset", choices=("toy", "full"), default="toy")
    s.add_argument("--data", required=True, help="directory of 22050 Hz WAVs")
    s.add_argument("--out", required=True)
    s.add_argument("--ablation", choices=sorted(ABLATION_PRESETS))
    s.add_argument("--steps", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--batch-size", type=int)
    s.add_argument("--resume", action="store_true")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("synth", help="mel (or WAV, via its mel) to waveform")
    s.add_argument("--checkpoint", required=True, help="generator .vocg file")
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("--mel", help="VOCM mel cache")
    src.add_argument("--wav", help="WAV for copy-synthesis")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("eval", help="MCD and F0 RMSE by copy-synthesis")
    s.add_argument("--checkpoint", help="generator .vocg; omit to score ground truth")
    s.add_argument("--data", required=True)
    s.add_argument("--report", required=True)
    s.add_argument("--trajectories", help="directory for per-file F0 CSVs")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("bench", help="real-time factor of CPU synthesis")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--threads", type=int, default=1)
    s.add_argument("--report", required=True)
    s.add_argument("--data", help="WAVs whose mels are synthesised (default: synthetic)")
    s.add_argument("--clips", type=int, default=2)
    s.add_argument("--seconds", type=float, default=1.0)
    s.add_argument("--repeats", type=int, default=5)
    s.add_argument("--warmup", type=int, default=1)
    s.set_defaults(func=cmd_bench)

    s = sub.add_parser("corpus", help="write the bundled synthetic corpus")
    s.add_argument("--out", required=True)
    s.add_argument("--clips", type=int, default=4)
    s.add_argument("--seconds", type=float, default=1.5)
    s.add_argument("--seed", type=int, default=1234)
    s.set_defaults(func=cmd_corpus)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DatasetError, CheckpointError, dsp.AudioFormatError, dsp.SampleRateError,
            ShapeError, FileNotFoundError, KeyError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
