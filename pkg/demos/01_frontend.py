"""
The signal frontend
===================

Log-mel features, the centred STFT behind them, and the pitch tracker used
for evaluation, on a synthetic voiced utterance.
"""

import numpy as np

from vocgan import dsp
from vocgan.corpus import synthetic_utterance

# A one second "utterance": a gliding harmonic source with a vowel-like
# spectral envelope, peak normalized to 0.95.
wave = synthetic_utterance(seed=3, seconds=1.0)
print("samples:", len(wave.samples), "rate:", wave.sample_rate)

# 80-band log-mel with a 1024-point window and hop 256: one frame per hop,
# plus one for the centred first frame.
mel = dsp.mel_spectrogram(wave)
print("mel shape:", mel.values.shape, "expected frames:", 1 + len(wave.samples) // dsp.HOP)
print("log-mel range: %.2f .. %.2f" % (mel.values.min(), mel.values.max()))

# Energy concentrates where the vowel formants sit.
band_energy = mel.values.mean(axis=1)
print("loudest mel bands:", np.argsort(band_energy)[-5:][::-1])

# Pitch: frames are unvoiced (nan) when no period is found.
times, f0 = dsp.estimate_f0(wave)
voiced = ~np.isnan(f0)
print("voiced frames: %d / %d" % (voiced.sum(), len(f0)))
print("F0 median %.1f Hz, range %.1f .. %.1f Hz"
      % (np.median(f0[voiced]), f0[voiced].min(), f0[voiced].max()))

# Lower-rate targets for the hierarchical losses come from repeated
# average pooling by two.
for k in range(5):
    print("scale", k, "length", dsp.downsample_waveform(wave.samples[:22016], k).shape[-1])
