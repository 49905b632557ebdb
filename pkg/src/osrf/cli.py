"""Command-line entry point: ``osrf <command> [options]``.

Exit codes: 0 success, 2 configuration or usage error, 3 I/O failure,
4 internal invariant violation.
"""

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import _accel
from .config import load_config
from .dataset_io import build_dataset, load_arrays, load_manifest, read_sidecar
from .errors import (
    ChecksumMismatch,
    InvalidConfig,
    InvariantViolation,
    IoError,
    NonFiniteError,
    OsrfError,
    ShapeMismatch,
    VersionMismatch,
)
from .evaluation import (
    _features,
    closed_set_eval,
    eval_set_from_split,
    export_report,
    open_set_eval,
)
from .features import SliceConfig, preprocess
from .nn.model import Model, load_model, model_checksum, save_model, train
from .openset import decide, sweep_from_activations, tune_threshold
from .waveform.resample import resample
from .waveform.types import IqSignal

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_INVARIANT = 0, 2, 3, 4
RESOLVED_NAME = "resolved_config.yaml"


def _global_flags(parser, suppress):
    d = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", default=d, help="YAML run configuration")
    parser.add_argument("--preset", default=d, help="named base configuration (desk, paper-scale)")
    parser.add_argument("--seed", type=int, default=d, help="root seed for every random draw")
    parser.add_argument("--threads", type=int, default=d, help="cap on worker threads")
    parser.add_argument("--deterministic", action="store_true", default=d,
                        help="single-threaded reference mode")
    parser.add_argument("--out-dir", default=d, help="directory for outputs")


def build_parser():
    p = argparse.ArgumentParser(prog="osrf", description="Open-set wireless signal classification.")
    _global_flags(p, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, suppress=True)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", parents=[common], help="build a dataset")
    g.add_argument("--dataset", help="output dataset directory (default OUT/dataset)")

    t = sub.add_parser("train", parents=[common], help="train a classifier on a dataset")
    t.add_argument("--dataset", help="dataset directory (default OUT/dataset)")
    t.add_argument("--model", help="model output path (default OUT/model/model.osrfm)")

    for name, hlp in (("eval-closed", "closed-set accuracy vs SNR"),
                      ("eval-open", "open-set accuracy vs SNR"),
                      ("sweep-threshold", "known accuracy / unknown detection vs threshold")):
        e = sub.add_parser(name, parents=[common], help=hlp)
        e.add_argument("--dataset", help="dataset directory (default OUT/dataset)")
        e.add_argument("--model", help="model path (default OUT/model/model.osrfm)")
        e.add_argument("--split", default="test" if name != "sweep-threshold" else "val")
        if name != "sweep-threshold":
            e.add_argument("--snr-grid", help="comma-separated SNRs in dB (default from config)")
        else:
            e.add_argument("--snr", type=float, help="re-impair at this SNR instead of using stored features")
        if name == "eval-open":
            e.add_argument("--threshold", help="threshold in [0, 1], or 'tune' to tune on the val split")

    c = sub.add_parser("classify", parents=[common], help="classify one raw I/Q file")
    c.add_argument("--model", required=True)
    c.add_argument("--iq", required=True, help="interleaved little-endian float32 I/Q pairs")
    c.add_argument("--rate-hz", type=float, required=True, help="sample rate of the I/Q file")
    c.add_argument("--threshold", type=float, help="default from config")
    c.add_argument("--offset", type=int, default=0, help="first sample of the classified slice")
    return p


def _resolve(args):
    over = {"seed": args.seed, "threads": args.threads, "out_dir": args.out_dir}
    if args.deterministic:
        over["deterministic"] = True
    cfg = load_config(args.config, args.preset, over)
    _accel.set_threads(cfg.effective_threads)
    return cfg


def _write_resolved(cfg, directory):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    (directory / RESOLVED_NAME).write_text(cfg.to_yaml())


def _dataset_dir(args, cfg):
    return Path(args.dataset) if getattr(args, "dataset", None) else Path(cfg.out_dir) / "dataset"


def _model_path(args, cfg):
    return Path(args.model) if getattr(args, "model", None) else Path(cfg.out_dir) / "model" / "model.osrfm"


def _check_dataset(root):
    if not (Path(root) / "manifest.json").exists():
        raise IoError(f"no dataset at {root}")


def _check_compatible(model: Model, manifest):
    shape = manifest.slice_config.feature_shape
    if tuple(model.input_shape) != tuple(shape):
        raise ShapeMismatch(f"model input {model.input_shape} does not match dataset features {shape}")
    if model.num_classes != len(manifest.known_classes):
        raise ShapeMismatch(f"model has {model.num_classes} outputs, dataset has "
                            f"{len(manifest.known_classes)} known classes")
    if model.class_names is not None and model.class_names != manifest.known_classes:
        raise ShapeMismatch("model class names differ from the dataset's known classes")


def cmd_generate(args, cfg):
    out = _dataset_dir(args, cfg)
    manifest = cfg.manifest()
    sidecar = build_dataset(manifest, out, threads=cfg.effective_threads)
    _write_resolved(cfg, out)
    print(f"dataset: {out}")
    for split in ("train", "val", "test"):
        counts = sidecar["counts"][split]
        detail = ", ".join(f"{k}={v}" for k, v in counts.items())
        print(f"{split}: {sidecar['files'][split]['records']} records ({detail})")
    print(f"dataset_hash: {sidecar['dataset_hash']}")
    return EXIT_OK


def cmd_train(args, cfg):
    root = _dataset_dir(args, cfg)
    _check_dataset(root)
    manifest = load_manifest(root)
    data = load_arrays(root, "train", which="known")
    classes = manifest.known_classes
    shape = manifest.slice_config.feature_shape
    if tuple(shape) != (cfg.slice.n_segments, cfg.slice.fft_len):
        raise ShapeMismatch(f"config slice geometry does not match dataset features {shape}")
    model = Model.from_architecture(cfg.architecture_layers(len(classes)), shape,
                                    seed=cfg.sub_seed("init"), class_names=classes)
    result = train(model, data.x, data.labels, cfg.train_config(),
                   on_epoch=lambda e, loss: print(f"epoch {e + 1}: loss {loss:.6f}", flush=True))
    path = _model_path(args, cfg)
    path.parent.mkdir(parents=True, exist_ok=True)
    save_model(result.model, path)
    with open(path.parent / "loss_log.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "loss"])
        for i, loss in enumerate(result.losses, 1):
            w.writerow([i, f"{loss:.6f}"])
    _write_resolved(cfg, path.parent)
    print(f"model: {path}")
    print(f"model_checksum: {model_checksum(result.model)}")
    return EXIT_OK


def _parse_grid(text, default):
    if not text:
        return [float(v) for v in default]
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise InvalidConfig(f"bad SNR grid {text!r}") from None


def _load_for_eval(args, cfg):
    root = _dataset_dir(args, cfg)
    _check_dataset(root)
    manifest = load_manifest(root)
    model = load_model(_model_path(args, cfg))
    _check_compatible(model, manifest)
    return root, manifest, model


def _report_dir(cfg):
    return Path(cfg.out_dir) / "reports"


def _tuned_threshold(model, root, manifest, cfg, split="val", snr=None):
    """Sweep on one split and tune per the configured objective; returns (table, threshold)."""
    o = cfg.openset
    if snr is None:
        known = load_arrays(root, split, which="known")
        unknown = load_arrays(root, split, which="unknown")
        _, ks = model.predict_batch(known.x)
        _, us = model.predict_batch(unknown.x) if len(unknown.x) else (None, np.zeros((0, model.num_classes)))
        labels = known.labels
    else:
        template = manifest.impairment_config(0)
        slice_cfg = manifest.slice_config
        seed = cfg.sub_seed("tune")
        kset = eval_set_from_split(root, split, "known")
        uset = eval_set_from_split(root, split, "unknown")
        _, ks = model.predict_batch(_features(kset, template, snr, slice_cfg, seed, cfg.effective_threads))
        us = (model.predict_batch(_features(uset, template, snr, slice_cfg, seed, cfg.effective_threads))[1]
              if len(uset) else np.zeros((0, model.num_classes)))
        labels = kset.labels
    table = sweep_from_activations(ks, labels, us, o.sweep_grid)
    return table, tune_threshold(table, o.objective, o.accuracy_floor)


def cmd_eval(args, cfg, mode):
    root, manifest, model = _load_for_eval(args, cfg)
    grid = _parse_grid(args.snr_grid, cfg.snr_grid)
    kset = eval_set_from_split(root, args.split, "known")
    template = manifest.impairment_config(0)
    seed = cfg.sub_seed("eval")
    threads = cfg.effective_threads
    if mode == "closed":
        rep = closed_set_eval(model, kset, manifest.known_classes, grid, manifest.slice_config,
                              template, seed, threads)
    else:
        th = args.threshold
        if th is None:
            threshold = cfg.openset.threshold
        elif th == "tune":
            _, threshold = _tuned_threshold(model, root, manifest, cfg, "val", cfg.openset.tune_snr_db)
        else:
            try:
                threshold = float(th)
            except ValueError:
                raise InvalidConfig(f"threshold must be a number or 'tune', got {th!r}") from None
        uset = eval_set_from_split(root, args.split, "unknown")
        rep = open_set_eval(model, kset, uset, manifest.known_classes, threshold, grid,
                            manifest.slice_config, template, seed, threads)
    out = _report_dir(cfg)
    files = export_report(rep, out, ("csv", "json"), model_checksum(model), manifest.hash())
    _write_resolved(cfg, out)
    if rep.threshold is not None:
        print(f"threshold: {rep.threshold:.6f}")
    for snr in rep.snr_grid:
        line = f"snr {snr:+.1f} dB: overall {rep.overall[snr]:.4f}"
        if mode == "open":
            line += f" known {rep.known_overall[snr]:.4f} unknown {rep.unknown_overall[snr]:.4f}"
        print(line)
    for f in files:
        print(f"wrote {f}")
    return EXIT_OK


def cmd_sweep(args, cfg):
    root, manifest, model = _load_for_eval(args, cfg)
    table, tuned = _tuned_threshold(model, root, manifest, cfg, args.split, args.snr)
    if not table.is_monotone():
        raise InvariantViolation("sweep table is not monotone in the threshold")
    t = table.thresholds
    if t[0] == 0.0 and table.unknown_detection_rate[0] != 0.0:
        raise InvariantViolation("threshold 0 rejected an example")
    if t[-1] == 1.0 and (table.known_accuracy[-1] != 0.0 or table.unknown_detection_rate[-1] != 1.0):
        raise InvariantViolation("threshold 1 accepted an example")
    out = _report_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"sweep_m{model_checksum(model)[:12]}_d{manifest.hash()[:12]}.csv"
    path.write_text(table.to_csv())
    _write_resolved(cfg, out)
    sys.stdout.write(table.to_csv())
    print(f"tuned_threshold ({cfg.openset.objective}): {tuned:.6f}")
    print(f"wrote {path}")
    return EXIT_OK


def read_iq_file(path):
    try:
        raw = np.fromfile(path, dtype="<f4")
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    if raw.size % 2:
        raise InvalidConfig("I/Q file must hold an even number of float32 values")
    return raw[0::2].astype(np.float64) + 1j * raw[1::2].astype(np.float64)


def cmd_classify(args, cfg):
    model = load_model(args.model)
    slice_cfg = SliceConfig(cfg.slice.slice_len, 1, cfg.slice.fft_len, cfg.slice.n_segments)
    if tuple(model.input_shape) != slice_cfg.feature_shape:
        raise ShapeMismatch(f"model input {model.input_shape} does not match config slice geometry")
    if not args.rate_hz > 0:
        raise InvalidConfig("--rate-hz must be positive")
    x = read_iq_file(args.iq)
    if x.size == 0:
        raise InvalidConfig("I/Q file is empty")
    sig = IqSignal(x, args.rate_hz)
    if args.rate_hz != cfg.sample_rate_hz:
        sig = resample(sig, cfg.sample_rate_hz)
    start = args.offset
    if start < 0 or sig.samples.size - start < slice_cfg.slice_len:
        raise InvalidConfig(f"need {slice_cfg.slice_len} samples from offset {start} at "
                            f"{cfg.sample_rate_hz:g} Hz, file has {sig.samples.size}")
    piece = sig.replace(sig.samples[start:start + slice_cfg.slice_len])
    act = model.predict(preprocess(piece, slice_cfg))
    threshold = cfg.openset.threshold if args.threshold is None else args.threshold
    d = decide(act.sigmoid, threshold)
    names = model.class_names or [str(i) for i in range(model.num_classes)]
    out = {
        "verdict": "unknown" if d.is_unknown else "known",
        "class": None if d.is_unknown else names[d.class_index],
        "class_index": d.class_index,
        # the statistic compared against the threshold, reported for both verdicts
        "confidence": float(np.max(act.sigmoid)),
        "top_class": names[int(np.argmax(act.sigmoid))],
        "threshold": d.threshold,
        "sigmoid": {n: float(v) for n, v in zip(names, act.sigmoid)},
        "logits": {n: float(v) for n, v in zip(names, act.logits)},
    }
    text = json.dumps(out, indent=2)
    print(text)
    res_dir = Path(cfg.out_dir) / "classify"
    _write_resolved(cfg, res_dir)
    (res_dir / "decision.json").write_text(text + "\n")
    return EXIT_OK


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _resolve(args)
        if args.command == "generate":
            return cmd_generate(args, cfg)
        if args.command == "train":
            return cmd_train(args, cfg)
        if args.command == "eval-closed":
            return cmd_eval(args, cfg, "closed")
        if args.command == "eval-open":
            return cmd_eval(args, cfg, "open")
        if args.command == "sweep-threshold":
            return cmd_sweep(args, cfg)
        if args.command == "classify":
            return cmd_classify(args, cfg)
    except (InvariantViolation, NonFiniteError) as exc:
        print(f"error: invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (IoError, ChecksumMismatch, VersionMismatch, OSError) as exc:
        print(f"error: I/O: {exc}", file=sys.stderr)
        return EXIT_IO
    except (OsrfError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    parser.error(f"unknown command {args.command}")


if __name__ == "__main__":
    sys.exit(main())
