"""Objective evaluation: mel cepstral distortion, F0 RMSE, F0 trajectories and
real-time-factor benchmarking."""

import csv
import json
import time
import warnings

import numpy as np
from threadpoolctl import threadpool_limits

from . import dsp
from .generator import generate_full

MCD_COEFFS = 13
MCD_SCALE = 10.0 * np.sqrt(2.0) / np.log(10.0)


def _align(x, x_hat):
    x, x_hat = dsp._samples(x), dsp._samples(x_hat)
    if abs(len(x) - len(x_hat)) > dsp.HOP:
        warnings.warn(f"lengths differ by {abs(len(x) - len(x_hat))} samples; truncating",
                      stacklevel=3)
    n = min(len(x), len(x_hat))
    return x[:n], x_hat[:n]


def _rate(*ws):
    rates = {w.sample_rate for w in ws if isinstance(w, dsp.Waveform)}
    if len(rates) > 1:
        raise dsp.SampleRateError(f"sample rates differ: {sorted(rates)}")
    return rates.pop() if rates else dsp.SAMPLE_RATE


def mcd(x, x_hat, n_coeffs=MCD_COEFFS):
    """Mel cepstral distortion in dB between time-aligned signals.

    Cepstra are the orthonormal DCT-II of each log-mel frame; ``c0`` (overall
    level) is excluded, so the metric ignores global gain.
    """
    _rate(x, x_hat)
    x, x_hat = _align(x, x_hat)
    c = dsp.mel_cepstrum(dsp.log_mel(x), n_coeffs)
    c_hat = dsp.mel_cepstrum(dsp.log_mel(x_hat), n_coeffs)
    dist = np.sqrt(np.sum((c - c_hat) ** 2, axis=0))
    return float(MCD_SCALE * np.mean(dist))


def f0_rmse(x, x_hat):
    """RMSE (Hz) over frames voiced in both signals; ``nan`` if there are none."""
    rate = _rate(x, x_hat)
    x, x_hat = _align(x, x_hat)
    _, f_ref = dsp.estimate_f0(x, sample_rate=rate)
    _, f_syn = dsp.estimate_f0(x_hat, sample_rate=rate)
    both = ~np.isnan(f_ref) & ~np.isnan(f_syn)
    if not both.any():
        return float("nan")
    return float(np.sqrt(np.mean((f_ref[both] - f_syn[both]) ** 2)))


def dump_f0_trajectory(x, x_hat, path):
    """Write ``time,f0_ref,f0_syn`` rows; unvoiced frames are empty fields."""
    rate = _rate(x, x_hat)
    x, x_hat = _align(x, x_hat)
    times, f_ref = dsp.estimate_f0(x, sample_rate=rate)
    _, f_syn = dsp.estimate_f0(x_hat, sample_rate=rate)

    def cell(v):
        return "" if np.isnan(v) else repr(float(v))

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["time", "f0_ref", "f0_syn"])
        for t, a, b in zip(times, f_ref, f_syn):
            writer.writerow([repr(float(t)), cell(a), cell(b)])
    return len(times)


def read_f0_trajectory(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))[1:]

    def val(s):
        return float(s) if s else float("nan")

    arr = np.array([[val(c) for c in r] for r in rows]) if rows else np.zeros((0, 3))
    return arr[:, 0], arr[:, 1], arr[:, 2]


def evaluate_pair(x, x_hat):
    return {"mcd_db": mcd(x, x_hat), "f0_rmse_hz": f0_rmse(x, x_hat)}


def summarize(per_utterance):
    """Mean MCD / F0 RMSE over utterances, skipping undefined F0 values."""
    mcds = [u["mcd_db"] for u in per_utterance]
    f0s = [u["f0_rmse_hz"] for u in per_utterance if not np.isnan(u["f0_rmse_hz"])]
    return {
        "mcd_db": float(np.mean(mcds)) if mcds else float("nan"),
        "f0_rmse_hz": float(np.mean(f0s)) if f0s else float("nan"),
        "n_utterances": len(per_utterance),
    }


def benchmark_rtf(G, mels, threads=1, repeats=5, warmup=1, clock=time.perf_counter):
    """Real-time factor of full-resolution synthesis.

    RTF is synthesised audio seconds divided by wall-clock seconds (>1 is
    faster than real time).  BLAS is pinned to ``threads``; ``warmup`` runs
    are discarded and the median over ``repeats`` timed runs is reported.
    """
    if not mels:
        raise ValueError("benchmark needs at least one mel spectrogram")
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    audio_seconds = sum(dsp.HOP * m.n_frames if isinstance(m, dsp.MelSpectrogram)
                        else dsp.HOP * np.shape(m)[-1] for m in mels) / dsp.SAMPLE_RATE
    rtfs, walls = [], []
    with threadpool_limits(limits=threads):
        for i in range(warmup + repeats):
            start = clock()
            for m in mels:
                generate_full(G, m)
            wall = clock() - start
            if i >= warmup:
                walls.append(wall)
                rtfs.append(rtf_from_times(audio_seconds, wall))
    return {
        "rtf_median": float(np.median(rtfs)),
        "rtf_mean": float(np.mean(rtfs)),
        "rtf_variance": float(np.var(rtfs)),
        "rtf_runs": [float(r) for r in rtfs],
        "wall_seconds": [float(w) for w in walls],
        "audio_seconds": float(audio_seconds),
        "threads": int(threads),
        "repeats": int(repeats),
        "warmup": int(warmup),
        "config_hash": G.cfg.config_hash(),
        "config": json.loads(G.cfg.to_json()),
        "reference_rtf": {"gpu": 416.7, "cpu": 3.24, "note": "published figures, other hardware; not comparable"},
    }


def rtf_from_times(audio_seconds, wall_seconds):
    return audio_seconds / wall_seconds
