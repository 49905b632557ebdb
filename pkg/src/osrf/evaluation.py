"""Closed-set and open-set accuracy versus SNR, confusion matrices, report export."""

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .channel import ImpairmentConfig, augment
from .dataset_io import load_arrays, load_manifest, regenerate_base, regenerate_slice
from .errors import EmptySet, InvalidConfig, IoError
from .features import SliceConfig, preprocess
from .openset import UNKNOWN, decide_batch
from .rng import derive_seed

DEFAULT_SNR_GRID = tuple(float(v) for v in range(-20, 25, 5))
UNKNOWN_LABEL = "unknown"


@dataclass
class EvalSet:
    """Clean held-out slices to be re-impaired at each evaluation SNR.

    ``labels`` index the model's known classes; ``-1`` marks unknown-class
    examples. ``ids`` feed the per-example, per-SNR seed derivation.
    """

    slices: list
    labels: np.ndarray
    class_names: list
    ids: list

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        n = len(self.slices)
        if not (len(self.labels) == len(self.class_names) == len(self.ids) == n):
            raise InvalidConfig("EvalSet fields must have equal lengths")

    def __len__(self):
        return len(self.slices)


def eval_set_from_split(root, split="test", which="known"):
    """Regenerate the clean slices behind a stored split (no record I/Q needed)."""
    manifest = load_manifest(root)
    arrays = load_arrays(root, split, which=which)
    slices = []
    base, base_key = None, None
    for h in arrays.headers:
        # records of one base signal are stored contiguously
        if (h.class_index, h.base_seed) != base_key:
            base_key = (h.class_index, h.base_seed)
            base = regenerate_base(manifest, h)
        slices.append(regenerate_slice(manifest, h, base))
    ids = [(h.base_seed, h.slice_index) for h in arrays.headers]
    return EvalSet(slices, arrays.labels, arrays.class_names, ids)


@dataclass
class EvalReport:
    mode: str  # closed | open
    snr_grid: list
    known_classes: list  # model output order
    row_classes: list  # evaluated classes, one confusion row each
    threshold: float | None
    accuracy: dict  # snr -> {class: accuracy}
    overall: dict  # snr -> accuracy over every example
    known_overall: dict
    unknown_overall: dict
    confusion: dict  # snr -> (rows x N+1) int counts
    counts: dict  # class -> examples per SNR
    predictions: dict  # snr -> per-example predicted index (UNKNOWN for Unknown)
    config: dict = field(default_factory=dict)

    @property
    def columns(self):
        return list(self.known_classes) + [UNKNOWN_LABEL]

    def to_dict(self):
        r6 = lambda v: None if v is None or (isinstance(v, float) and math.isnan(v)) else round(float(v), 6)
        key = _snr_key
        return {
            "mode": self.mode,
            "snr_grid": [r6(s) for s in self.snr_grid],
            "known_classes": list(self.known_classes),
            "row_classes": list(self.row_classes),
            "columns": self.columns,
            "threshold": r6(self.threshold),
            "accuracy": {key(s): {c: r6(a) for c, a in d.items()} for s, d in self.accuracy.items()},
            "overall": {key(s): r6(v) for s, v in self.overall.items()},
            "known_overall": {key(s): r6(v) for s, v in self.known_overall.items()},
            "unknown_overall": {key(s): r6(v) for s, v in self.unknown_overall.items()},
            "confusion": {key(s): m.tolist() for s, m in self.confusion.items()},
            "counts": dict(self.counts),
            "predictions": {key(s): p.tolist() for s, p in self.predictions.items()},
            "config": self.config,
        }


def _snr_key(snr):
    return "inf" if snr == math.inf else f"{float(snr):.6f}"


def _features(eval_set, template, snr, cfg, seed, threads):
    def one(i):
        sl = eval_set.slices[i]
        base_seed, slice_idx = eval_set.ids[i]
        imp_seed = derive_seed(seed, "eval", base_seed, slice_idx, _snr_key(snr))
        conf = ImpairmentConfig(template.iq_gain_db_range, template.freq_offset_hz_range,
                                snr, template.profile, imp_seed, template.fading_choices)
        return preprocess(augment(sl, conf), cfg).values

    idx = range(len(eval_set))
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=int(threads)) as pool:
            rows = list(pool.map(one, idx))
    else:
        rows = [one(i) for i in idx]
    return np.stack(rows)


def _evaluate(mode, model, sets, known_classes, snr_grid, threshold, cfg, template, seed, threads):
    n_cls = model.num_classes
    if len(known_classes) != n_cls:
        raise InvalidConfig(f"model has {n_cls} outputs but {len(known_classes)} class names were given")
    labels = np.concatenate([s.labels for s in sets])
    names = [c for s in sets for c in s.class_names]
    if len(labels) == 0:
        raise EmptySet("nothing to evaluate")
    rows = [c for c in known_classes if c in names]
    rows += sorted({c for c, l in zip(names, labels) if l < 0}, key=names.index)
    row_of = {c: i for i, c in enumerate(rows)}
    row_idx = np.array([row_of[c] for c in names])
    counts = {c: int(np.sum(row_idx == i)) for c, i in row_of.items()}
    is_unknown = labels < 0
    rep = EvalReport(mode, [float(s) for s in snr_grid], list(known_classes), rows, threshold,
                     {}, {}, {}, {}, {}, counts, {})
    for snr in rep.snr_grid:
        x = np.concatenate([_features(s, template, snr, cfg, seed, threads) for s in sets if len(s)])
        _, sig = model.predict_batch(x)
        if threshold is None:
            pred = np.argmax(sig, axis=1)
        else:
            pred = decide_batch(sig, threshold)
        col = np.where(pred == UNKNOWN, n_cls, pred)
        conf = np.zeros((len(rows), n_cls + 1), dtype=np.int64)
        np.add.at(conf, (row_idx, col), 1)
        correct = np.where(is_unknown, pred == UNKNOWN, pred == labels)
        rep.confusion[snr] = conf
        rep.predictions[snr] = pred.astype(np.int64)
        rep.accuracy[snr] = {c: float(np.mean(correct[row_idx == i])) for c, i in row_of.items()}
        rep.overall[snr] = float(np.mean(correct))
        rep.known_overall[snr] = float(np.mean(correct[~is_unknown])) if (~is_unknown).any() else math.nan
        rep.unknown_overall[snr] = float(np.mean(correct[is_unknown])) if is_unknown.any() else math.nan
    rep.config = {
        "seed": int(seed),
        "slice": {"slice_len": cfg.slice_len, "fft_len": cfg.fft_len, "n_segments": cfg.n_segments},
        "impairment": {
            "iq_gain_db_range": list(template.iq_gain_db_range),
            "freq_offset_hz_range": list(template.freq_offset_hz_range),
            "fading": "drawn" if template.profile is None else template.profile.to_dict(),
            "fading_choices": [f.value for f in template.fading_choices],
        },
    }
    return rep


def closed_set_eval(model, known_set: EvalSet, known_classes, snr_grid=DEFAULT_SNR_GRID,
                    cfg=None, template=None, seed=0, threads=1) -> EvalReport:
    """Argmax-only accuracy per SNR after seeded re-impairment of each slice."""
    if len(known_set) == 0:
        raise EmptySet("known evaluation set is empty")
    if np.any(known_set.labels < 0):
        raise InvalidConfig("closed-set evaluation takes known-class examples only")
    return _evaluate("closed", model, [known_set], known_classes, snr_grid, None,
                     cfg or SliceConfig(), template or ImpairmentConfig(), seed, threads)


def open_set_eval(model, known_set: EvalSet, unknown_set: EvalSet, known_classes, threshold,
                  snr_grid=DEFAULT_SNR_GRID, cfg=None, template=None, seed=0,
                  threads=1) -> EvalReport:
    """Threshold decisions per SNR; unknown examples count as correct when rejected."""
    threshold = float(threshold)
    if not 0 <= threshold <= 1:
        raise InvalidConfig("threshold must lie in [0, 1]")
    if len(known_set) == 0 and len(unknown_set) == 0:
        raise EmptySet("both evaluation sets are empty")
    return _evaluate("open", model, [known_set, unknown_set], known_classes, snr_grid, threshold,
                     cfg or SliceConfig(), template or ImpairmentConfig(), seed, threads)


# ------------------------------------------------------------------ export


def curves_csv(report: EvalReport):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["snr_db", "class", "accuracy"])
    for snr in report.snr_grid:
        for c in report.row_classes:
            w.writerow([f"{snr:.6f}", c, f"{report.accuracy[snr][c]:.6f}"])
        w.writerow([f"{snr:.6f}", "overall", f"{report.overall[snr]:.6f}"])
    return buf.getvalue()


def confusion_csv(report: EvalReport, snr):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["class"] + report.columns)
    for c, row in zip(report.row_classes, report.confusion[snr]):
        w.writerow([c] + [str(int(v)) for v in row])
    return buf.getvalue()


def parse_curves_csv(text):
    rows = list(csv.DictReader(io.StringIO(text)))
    return {(float(r["snr_db"]), r["class"]): float(r["accuracy"]) for r in rows}


def parse_confusion_csv(text):
    rows = list(csv.reader(io.StringIO(text)))
    header = rows[0][1:]
    names = [r[0] for r in rows[1:]]
    m = np.array([[int(v) for v in r[1:]] for r in rows[1:]], dtype=np.int64).reshape(len(names), len(header))
    return header, names, m


def _snr_tag(snr):
    return f"{int(round(snr)):+d}dB" if float(snr).is_integer() else f"{snr:+.2f}dB"


def export_report(report: EvalReport, out_dir, formats=("csv", "json"), model_checksum="model",
                  manifest_hash="data"):
    """Write curve and confusion CSVs and/or the JSON report; returns the written paths.

    File names embed the first 12 hex characters of the model checksum and
    the dataset manifest hash.
    """
    out_dir = Path(out_dir)
    tag = f"{report.mode}_m{str(model_checksum)[:12]}_d{str(manifest_hash)[:12]}"
    written = []
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        for fmt in formats:
            if fmt == "csv":
                p = out_dir / f"{tag}_curves.csv"
                p.write_text(curves_csv(report))
                written.append(p)
                for snr in report.snr_grid:
                    p = out_dir / f"{tag}_confusion_{_snr_tag(snr)}.csv"
                    p.write_text(confusion_csv(report, snr))
                    written.append(p)
            elif fmt == "json":
                p = out_dir / f"{tag}_report.json"
                d = report.to_dict()
                d["provenance"] = {"model_checksum": model_checksum, "manifest_hash": manifest_hash}
                p.write_text(json.dumps(d, indent=1, sort_keys=True) + "\n")
                written.append(p)
            else:
                raise InvalidConfig(f"unknown report format {fmt!r}")
    except OSError as exc:
        raise IoError(f"cannot write report to {out_dir}: {exc}") from exc
    return written
