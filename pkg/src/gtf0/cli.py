"""Command-line entry point: ``gtf0 <subcommand> ...``.

Exit codes: 0 success, 1 usage error, 2 I/O error, 3 processing error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

from . import __version__
from .dsp import WavFormatError, read_wav, stft_spectrogram, write_wav
from .enhancer import EnhanceConfig, enhance_signal
from .experiment import ExperimentManifest, ResultsTable, run_experiment
from .ins import DEFAULT_SCALES, DEFAULT_SURROGATES, ins_profile
from .metrics import evaluate
from .mixer import NoiseKind, gen_noise, gen_sentence, mix_at_snr

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_PROCESSING = 0, 1, 2, 3

log = logging.getLogger("gtf0")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _load_config(args) -> EnhanceConfig:
    cfg = EnhanceConfig()
    if args.config:
        with open(args.config) as fh:
            cfg = EnhanceConfig.from_dict(json.load(fh))
    if getattr(args, "normalize", None):
        cfg = EnhanceConfig.from_dict({**cfg.to_dict(), "normalize": args.normalize})
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


def _emit(text: str, out) -> None:
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_enhance(args):
    cfg = _load_config(args)
    x = read_wav(args.input)
    y, report = enhance_signal(x, cfg)
    write_wav(args.output, y)
    if args.report:
        Path(args.report).write_text(report.to_json(indent=2))
    log.info("enhanced %d of %d frames", len(report.enhanced_frames), len(report.frames))


def cmd_estimate_f0(args):
    cfg = _load_config(args)
    x = read_wav(args.input)
    _, report = enhance_signal(x, cfg)
    lines = [["frame_index", "time_s", "voiced", "f0_hz", "confidence", "chosen_mode"]]
    for f in report.frames:
        lines.append([f.index, f"{f.time_s:.6f}", int(f.voiced),
                      "" if f.f0_hz is None else f"{f.f0_hz:.4f}",
                      "" if f.confidence is None else f"{f.confidence:.6f}",
                      "" if f.chosen_mode is None else f.chosen_mode])
    _emit(_rows_csv(lines), args.output)


def _rows_csv(rows) -> str:
    import io
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def _noise_for(clean, kind, path, seed):
    if path:
        return read_wav(path)
    return gen_noise(NoiseKind(kind), clean.duration + 1.0, clean.sample_rate, seed)


def cmd_mix(args):
    seed = args.seed or 0
    if args.manifest:
        with open(args.manifest) as fh:
            items = json.load(fh)
        for it in items:
            clean = read_wav(it["clean_path"])
            kind = it.get("noise_kind", "speech_shaped")
            noise = _noise_for(clean, kind, it.get("noise_path"), int(it.get("seed", seed)))
            mix = mix_at_snr(clean, noise, float(it["snr_db"]), seed=int(it.get("seed", seed)))
            write_wav(it["out_path"], mix)
        return
    if not (args.clean and args.output and args.snr is not None):
        raise UsageError("mix needs --clean, --snr and --out (or --manifest)")
    clean = read_wav(args.clean)
    noise = _noise_for(clean, args.noise_kind, args.noise, seed)
    write_wav(args.output, mix_at_snr(clean, noise, args.snr, seed=seed))


def cmd_evaluate(args):
    if args.manifest:
        with open(args.manifest) as fh:
            pairs = json.load(fh)
        rows = [["clean_path", "test_path", "estoi", "llr", "wss", "seg_snr_db"]]
        for p in pairs:
            r = evaluate(read_wav(p["clean_path"]), read_wav(p["test_path"]))
            rows.append([p["clean_path"], p["test_path"],
                         *(f"{v:.10g}" for v in r.to_dict().values())])
        _emit(_rows_csv(rows), args.output)
        return
    if not (args.clean and args.test):
        raise UsageError("evaluate needs --clean and --test (or --manifest)")
    r = evaluate(read_wav(args.clean), read_wav(args.test))
    if args.json:
        _emit(json.dumps(r.to_dict(), indent=2) + "\n", args.output)
    else:
        _emit("".join(f"{k}: {v:.6f}\n" for k, v in r.to_dict().items()), args.output)


def cmd_ins(args):
    x = read_wav(args.input)
    scales = [float(s) for s in args.scales.split(",")] if args.scales else DEFAULT_SCALES
    res = ins_profile(x, scales, args.surrogates, args.seed or 0)
    if args.csv:
        if not args.output:
            raise UsageError("--csv needs --out")
        res.to_csv(args.output)
    else:
        _emit(res.to_json(indent=2) + "\n", args.output)


def cmd_spectrogram(args):
    x = read_wav(args.input)
    stft_spectrogram(x, args.frame_len, args.hop).to_csv(args.output)


def cmd_experiment(args):
    manifest = ExperimentManifest.load(args.manifest)
    if args.config:
        manifest.config = _load_config(args)
    if args.seed is not None:
        manifest.seed = args.seed
    if args.out_dir:
        manifest.output_dir = args.out_dir
    table: ResultsTable = run_experiment(manifest, threads=args.threads)
    if not manifest.output_dir:
        sys.stdout.write(table.to_csv())
    if table.rows and table.failed == len(table.rows):
        raise RuntimeError("every experiment row failed")
    log.info("mean delta ESTOI %.4f over %d rows", table.mean_delta("estoi"), len(table.rows))


def cmd_gen_corpus(args):
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    seed = args.seed or 0
    fs = args.sample_rate
    signals = []
    for i in range(args.count):
        path = out / f"clean_{i:03d}.wav"
        write_wav(path, gen_sentence(seed + i, fs, args.duration))
        signals.append(str(path))
    noises = []
    for kind in args.noise_kinds.split(","):
        path = out / f"noise_{kind}.wav"
        write_wav(path, _scale_for_pcm(gen_noise(NoiseKind(kind), args.duration + 1.0, fs, seed)))
        noises.append({"kind": "file", "path": str(path)})
    manifest = {"signals": signals, "noises": noises, "snrs": list(args.snrs),
                "config": EnhanceConfig().to_dict(), "output_dir": str(out / "results"),
                "seed": seed}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    mix_items = [{"clean_path": s, "noise_kind": n["path"].split("noise_")[-1][:-4],
                  "noise_path": n["path"], "snr_db": snr, "seed": seed,
                  "out_path": str(out / "noisy" / f"{Path(s).stem}_{Path(n['path']).stem}_{snr:+g}dB.wav")}
                 for s in signals for n in noises for snr in args.snrs]
    (out / "mix_manifest.json").write_text(json.dumps(mix_items, indent=2) + "\n")


def _scale_for_pcm(w):
    # unit-power Gaussian noise clips in PCM16; store it at a quarter amplitude
    from .dsp import Waveform
    return Waveform(w.samples * 0.25, w.sample_rate)


def _snr_list(text):
    try:
        return [float(s) for s in text.split(",")]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="random seed")
    common.add_argument("--config", default=argparse.SUPPRESS, help="EnhanceConfig JSON")
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS,
                        help="worker processes for batch work")
    common.add_argument("-v", "--verbose", action="count", default=argparse.SUPPRESS)

    p = _Parser(prog="gtf0", description="F0-based Gammatone harmonic emphasis toolkit",
                parents=[common])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("enhance", parents=[common], help="enhance a noisy WAV")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--out", dest="output", required=True)
    s.add_argument("--report")
    s.add_argument("--normalize", choices=["rms"])
    s.set_defaults(func=cmd_enhance)

    s = sub.add_parser("estimate-f0", parents=[common], help="per-frame F0 CSV")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--out", dest="output")
    s.set_defaults(func=cmd_estimate_f0)

    s = sub.add_parser("mix", parents=[common], help="mix clean speech with noise")
    s.add_argument("--clean")
    s.add_argument("--noise", help="noise WAV (otherwise synthetic)")
    s.add_argument("--noise-kind", default="speech_shaped",
                   choices=[k.value for k in NoiseKind if k is not NoiseKind.FILE])
    s.add_argument("--snr", type=float)
    s.add_argument("--out", dest="output")
    s.add_argument("--manifest", help="JSON list of {clean_path, noise_kind, snr_db, seed, out_path}")
    s.set_defaults(func=cmd_mix)

    s = sub.add_parser("evaluate", parents=[common], help="ESTOI/LLR/WSS/segSNR")
    s.add_argument("--clean")
    s.add_argument("--test")
    s.add_argument("--json", action="store_true")
    s.add_argument("--manifest", help="JSON list of {clean_path, test_path}; emits CSV")
    s.add_argument("--out", dest="output")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("ins", parents=[common], help="index of non-stationarity")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--scales", help="comma-separated Th/T fractions")
    s.add_argument("--surrogates", type=int, default=DEFAULT_SURROGATES)
    fmt = s.add_mutually_exclusive_group()
    fmt.add_argument("--json", action="store_true")
    fmt.add_argument("--csv", action="store_true")
    s.add_argument("--out", dest="output")
    s.set_defaults(func=cmd_ins)

    s = sub.add_parser("spectrogram", parents=[common], help="magnitude STFT as CSV")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--out", dest="output", required=True)
    s.add_argument("--frame-len", type=int, default=512)
    s.add_argument("--hop", type=int, default=256)
    s.set_defaults(func=cmd_spectrogram)

    s = sub.add_parser("experiment", parents=[common], help="run an experiment manifest")
    s.add_argument("--manifest", required=True)
    s.add_argument("--out-dir")
    s.set_defaults(func=cmd_experiment)

    s = sub.add_parser("gen-corpus", parents=[common], help="write a synthetic corpus")
    s.add_argument("--out-dir", required=True)
    s.add_argument("--count", type=int, default=20)
    s.add_argument("--duration", type=float, default=2.0)
    s.add_argument("--sample-rate", type=int, default=16000)
    s.add_argument("--noise-kinds", default="speech_shaped,amplitude_modulated")
    s.add_argument("--snrs", type=_snr_list, default=[-5.0, -3.0, 0.0, 3.0, 5.0])
    s.set_defaults(func=cmd_gen_corpus)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    for name, default in (("seed", None), ("config", None), ("threads", 1), ("verbose", 0)):
        if not hasattr(args, name):
            setattr(args, name, default)
    logging.basicConfig(level=logging.DEBUG if args.verbose > 1 else
                        logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        parser.error("--threads must be >= 1")
    try:
        args.func(args)
    except UsageError as exc:
        print(f"gtf0: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, WavFormatError, json.JSONDecodeError) as exc:
        print(f"gtf0: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except Exception as exc:
        print(f"gtf0: processing error: {exc}", file=sys.stderr)
        return EXIT_PROCESSING
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
