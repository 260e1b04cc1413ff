"""Deterministic synthetic speech-like corpus.

Generates harmonic tones with pitch glides and vibrato, formant-ish spectral
tilt and short noise bursts, so every test and demo runs without external
data.
"""

from pathlib import Path

import numpy as np

from .dsp import SAMPLE_RATE, Waveform, peak_normalize, write_wav


def harmonic_tone(f0_start, f0_end, seconds, n_harmonics=8, vibrato_hz=5.0,
                  vibrato_depth=0.01, tilt=0.7, sample_rate=SAMPLE_RATE, phase=0.0):
    """Sum of harmonics following a linear F0 glide with sinusoidal vibrato."""
    n = int(round(seconds * sample_rate))
    t = np.arange(n) / sample_rate
    f0 = np.linspace(f0_start, f0_end, n) * (1 + vibrato_depth * np.sin(2 * np.pi * vibrato_hz * t))
    inst_phase = 2 * np.pi * np.cumsum(f0) / sample_rate + phase
    out = np.zeros(n)
    for h in range(1, n_harmonics + 1):
        out += tilt ** (h - 1) * np.sin(h * inst_phase)
    return out


def noise_burst(seconds, rng, sample_rate=SAMPLE_RATE, smooth=3):
    n = int(round(seconds * sample_rate))
    noise = rng.standard_normal(n)
    if smooth > 1:
        noise = np.convolve(noise, np.ones(smooth) / smooth, mode="same")
    env = np.hanning(n)
    return noise * env


def synthetic_utterance(seed, seconds=1.5, sample_rate=SAMPLE_RATE):
    """One clip: two voiced segments separated by a noise burst."""
    rng = np.random.default_rng(seed)
    n = int(round(seconds * sample_rate))
    out = np.zeros(n)
    split = int(n * rng.uniform(0.4, 0.6))
    burst = int(0.08 * sample_rate)
    f_a = rng.uniform(110, 220)
    f_b = rng.uniform(110, 220)
    seg_a = harmonic_tone(f_a, f_a * rng.uniform(0.85, 1.2), (split - burst // 2) / sample_rate,
                          n_harmonics=int(rng.integers(5, 10)), phase=rng.uniform(0, 2 * np.pi))
    seg_b = harmonic_tone(f_b, f_b * rng.uniform(0.85, 1.2), (n - split - burst // 2) / sample_rate,
                          n_harmonics=int(rng.integers(5, 10)), phase=rng.uniform(0, 2 * np.pi))
    out[:len(seg_a)] += seg_a * np.hanning(len(seg_a)) ** 0.25
    out[n - len(seg_b):] += seg_b * np.hanning(len(seg_b)) ** 0.25
    out[split - burst // 2:split - burst // 2 + burst] += 0.5 * noise_burst(burst / sample_rate, rng)
    out += 0.003 * rng.standard_normal(n)
    return Waveform(peak_normalize(out), sample_rate)


def overfit_clip(sample_rate=SAMPLE_RATE, noise_floor=0.003, seed=42):
    """The single 1-second clip used by the overfitting smoke run.

    A gliding harmonic tone over a fixed white-noise floor about 50 dB down.
    The floor matters: without it most STFT bins of a synthetic tone sit
    near zero and the log-magnitude loss mostly measures inaudible residue.
    """
    tone = harmonic_tone(150.0, 165.0, 1.0, n_harmonics=6, sample_rate=sample_rate)
    noise = np.random.default_rng(seed).standard_normal(tone.size)
    return Waveform(peak_normalize(tone + noise_floor * noise), sample_rate)


def make_corpus(out_dir, n_clips=4, seconds=1.5, seed=1234):
    """Write ``n_clips`` synthetic WAVs plus the overfit clip; returns their paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for i in range(n_clips):
        path = out_dir / f"synth_{i:03d}.wav"
        write_wav(path, synthetic_utterance(seed + i, seconds))
        paths.append(path)
    path = out_dir / "overfit.wav"
    write_wav(path, overfit_clip())
    paths.append(path)
    return paths
