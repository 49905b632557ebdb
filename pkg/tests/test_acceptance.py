"""End-to-end acceptance criteria, one test per criterion.

Criteria 3 to 8 share two complete CLI runs (generate, train, closed-set and
open-set evaluation) of ``acceptance.yaml``. Every test records its verdict,
and the terminal summary prints one PASS/FAIL line per criterion.
"""

import contextlib
import csv
import io
import json
import math
import time
from pathlib import Path

import numpy as np
import pytest
from scipy import stats

from conftest import ACCEPTANCE
from gradcheck import CHECKS
from oracles import naive_dft, rayleigh_cdf
from osrf.channel import ChannelProfile, Fading, apply_awgn, apply_freq_offset, tap_gains
from osrf.cli import main
from osrf.dataset_io import SPLITS, load_arrays, load_manifest, split_path
from osrf.features import SliceConfig, stft
from osrf.nn import load_model
from osrf.openset import DEFAULT_SWEEP_GRID, sweep_from_activations
from osrf.waveform import DESK_RATE_HZ, IqSignal

CONFIG = Path(__file__).with_name("acceptance.yaml")
FS = DESK_RATE_HZ
KEY = "{:.6f}".format


def record(n, ok, detail):
    ACCEPTANCE[n] = (bool(ok), detail)
    assert ok, f"criterion {n}: {detail}"


def cli(*argv):
    buf = io.StringIO()
    t = time.perf_counter()
    with contextlib.redirect_stdout(buf):
        code = main([str(a) for a in argv])
    return code, buf.getvalue(), time.perf_counter() - t


def pipeline(out):
    """Generate, train and evaluate; returns exit codes, timings and stdout."""
    base = ["--config", CONFIG, "--out-dir", out]
    steps = {
        "generate": ["generate"],
        "train": ["train"],
        "closed": ["eval-closed"],
        "open": ["eval-open", "--threshold", "tune", "--snr-grid", "10"],
    }
    res = {}
    for name, argv in steps.items():
        res[name] = cli(*base, *argv)
        if res[name][0] != 0:
            break
    return res


def report(out, mode):
    (p,) = (Path(out) / "reports").glob(f"{mode}_*_report.json")
    return json.loads(p.read_text())


@pytest.fixture(scope="module")
def runs(tmp_path_factory):
    a, b = tmp_path_factory.mktemp("run_a"), tmp_path_factory.mktemp("run_b")
    return (a, pipeline(a)), (b, pipeline(b))


@pytest.fixture(scope="module")
def run(runs):
    out, res = runs[0]
    for name, (code, _, _) in res.items():
        assert code == 0, f"pipeline step {name} exited {code}"
    return out, res


def test_criterion_1_gradients():
    t = time.perf_counter()
    worst = {name: max(check(seed) for seed in range(5)) for name, check in CHECKS.items()}
    dt = time.perf_counter() - t
    top = max(worst, key=worst.get)
    record(1, max(worst.values()) < 1e-4 and dt < 60,
           f"worst relative error {worst[top]:.2e} ({top}) over 5 seeds x {len(worst)} layers, {dt:.1f}s")


def test_criterion_2_dsp_oracles():
    rng = np.random.default_rng(0)
    fails = []
    # per-segment Parseval at the desk slice geometry
    cfg = SliceConfig()
    x = rng.standard_normal(cfg.slice_len) + 1j * rng.standard_normal(cfg.slice_len)
    m = stft(x, cfg)
    segs = x.reshape(cfg.n_segments, cfg.fft_len)
    parseval = max(abs(np.sum(abs(s) ** 2) - np.sum(abs(r) ** 2) / cfg.fft_len) / np.sum(abs(s) ** 2)
                   for s, r in zip(segs, m))
    if parseval >= 1e-6:
        fails.append(f"Parseval {parseval:.1e}")
    # FFT against the naive DFT
    dft = 0.0
    for n in (16, 256, 1024):
        y = rng.standard_normal(2 * n) + 1j * rng.standard_normal(2 * n)
        for seg, row in zip(y.reshape(2, n), stft(y, SliceConfig(2 * n, 1, n, 2))):
            ref = np.fft.fftshift(naive_dft(seg))
            dft = max(dft, np.max(np.abs(row - ref)) / np.max(np.abs(ref)))
    if dft >= 1e-6:
        fails.append(f"DFT {dft:.1e}")
    # AWGN measured SNR over 1e5 samples
    z = rng.standard_normal(100_000) + 1j * rng.standard_normal(100_000)
    sig = IqSignal(z / np.sqrt(np.mean(abs(z) ** 2)), FS)
    snr_err = 0.0
    for snr in (-10.0, 0.0, 10.0, 20.0):
        noise = apply_awgn(sig, snr, seed=4).samples - sig.samples
        snr_err = max(snr_err, abs(10 * math.log10(sig.mean_power() / np.mean(abs(noise) ** 2)) - snr))
    if snr_err >= 0.3:
        fails.append(f"AWGN {snr_err:.2f} dB")
    # Rayleigh envelope, one independent realization per seed
    env = np.array([abs(tap_gains(ChannelProfile(Fading.RAYLEIGH, None, (0.0,), (0.0,), 50.0, seed=i),
                                  1, FS)[0, 0]) for i in range(5000)])
    p_ks = stats.kstest(env, lambda r: rayleigh_cdf(r, 1.0)).pvalue
    if p_ks <= 0.01:
        fails.append(f"KS p {p_ks:.3f}")
    # frequency-offset round trip
    back = apply_freq_offset(apply_freq_offset(sig, 1234.5), -1234.5)
    rms = float(np.sqrt(np.mean(abs(back.samples - sig.samples) ** 2)))
    if rms >= 1e-9:
        fails.append(f"offset RMS {rms:.1e}")
    record(2, not fails, "; ".join(fails) or
           f"Parseval {parseval:.1e}, DFT {dft:.1e}, AWGN max err {snr_err:.3f} dB, "
           f"KS p {p_ks:.2f}, offset RMS {rms:.1e}")


@pytest.mark.slow
def test_criterion_3_open_set_invariants(run):
    out, _ = run
    t = time.perf_counter()
    model = load_model(out / "model" / "model.osrfm")
    ds = out / "dataset"
    known = load_arrays(ds, "test")
    unknown = load_arrays(ds, "test", which="unknown")
    _, ks = model.predict_batch(known.x)
    _, us = model.predict_batch(unknown.x)
    closed = float(np.mean(ks.argmax(1) == known.labels))
    grid = sorted(set(DEFAULT_SWEEP_GRID) | {i / 100 for i in range(101)})
    table = sweep_from_activations(ks, known.labels, us, grid)
    dt = time.perf_counter() - t
    ok = (table.is_monotone() and table.known_accuracy[0] == closed
          and table.unknown_detection_rate[0] == 0.0
          and table.known_accuracy[-1] == 0.0 and table.unknown_detection_rate[-1] == 1.0 and dt < 60)
    record(3, ok, f"{len(grid)} thresholds monotone={table.is_monotone()}, t=0 known "
                  f"{table.known_accuracy[0]:.4f} vs closed {closed:.4f}, t=1 row "
                  f"({table.known_accuracy[-1]:g}, {table.unknown_detection_rate[-1]:g}), {dt:.1f}s")


def _correct_known(rep, snr):
    """Correct known-class verdicts at one SNR, counted from the confusion matrix."""
    conf = rep["confusion"][KEY(snr)]
    return sum(conf[i][i] for i, c in enumerate(rep["row_classes"]) if c in rep["known_classes"])


@pytest.mark.slow
def test_criterion_4_end_to_end(run):
    out, res = run
    c, o = report(out, "closed"), report(out, "open")
    closed = c["overall"][KEY(10)]
    known, unknown = o["known_overall"][KEY(10)], o["unknown_overall"][KEY(10)]
    n_known = sum(c["counts"].values())
    # the 15-point drop is compared on integer counts so a tie is not lost to rounding
    drop = _correct_known(c, 10) - _correct_known(o, 10)
    train_s = res["train"][2]
    manifest = load_manifest(out / "dataset")
    counts = {e.name: e.count for e in manifest.classes if e.known}
    ok = (closed >= 0.90 and unknown >= 0.80 and 100 * drop <= 15 * n_known and train_s < 900
          and set(counts.values()) == {100})
    record(4, ok, f"closed {closed:.4f} at 10 dB; threshold {o['threshold']:.6f}: known {known:.4f} "
                  f"(drop {drop}/{n_known} = {100 * drop / n_known:.1f} pts), unknown detection "
                  f"{unknown:.4f}; training {train_s:.0f}s")


@pytest.mark.slow
def test_criterion_5_analog_rejected_first(run):
    out, _ = run
    acc = report(out, "open")["accuracy"][KEY(10)]
    generic = acc["GenericSc"]
    ok = acc["Am"] + 0.05 >= generic and acc["Fm"] + 0.05 >= generic
    record(5, ok, f"rejection Am {acc['Am']:.3f}, Fm {acc['Fm']:.3f}, GenericSc {generic:.3f}")


@pytest.mark.slow
def test_criterion_6_snr_trend(run):
    out, _ = run
    ov = report(out, "closed")["overall"]
    a, b, c = ov[KEY(-20)], ov[KEY(0)], ov[KEY(10)]
    record(6, a <= b + 0.02 and b <= c + 0.02, f"closed accuracy -20 dB {a:.4f}, 0 dB {b:.4f}, 10 dB {c:.4f}")


def _outputs(out):
    files = [out / "dataset" / "manifest.json"] + [split_path(out / "dataset", s) for s in SPLITS]
    files.append(out / "model" / "model.osrfm")
    files += sorted((out / "reports").glob("*.csv"))
    return {str(p.relative_to(out)): p.read_bytes() for p in files}


@pytest.mark.slow
def test_criterion_7_determinism(runs):
    (a, ra), (b, rb) = runs
    assert all(r[0] == 0 for r in list(ra.values()) + list(rb.values()))
    fa, fb = _outputs(a), _outputs(b)
    differ = sorted(k for k in fa if fa[k] != fb.get(k))
    ok = set(fa) == set(fb) and not differ and len(fa) > 6
    record(7, ok, f"{len(fa)} files compared, differing: {differ or 'none'}")


@pytest.mark.slow
def test_criterion_8_training_sanity(run):
    out, res = run
    with open(out / "model" / "loss_log.csv") as fh:
        losses = [float(r["loss"]) for r in csv.DictReader(fh)]
    model = load_model(out / "model" / "model.osrfm")
    finite = all(math.isfinite(v) for v in losses) and all(np.isfinite(p).all() for p in model.params)
    ok = finite and len(losses) == 10 and losses[-1] < losses[0]
    record(8, ok, f"loss {losses[0]:.4f} -> {losses[-1]:.4f} over {len(losses)} epochs, finite={finite}")
