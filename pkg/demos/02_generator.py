"""
One mel, five waveforms
=======================

The generator upsamples a mel spectrogram 256x to audio rate and emits
lower-resolution waveforms from its intermediate blocks.  Each output must
line up exactly with a pooled copy of the target.
"""

import numpy as np

from vocgan import dsp
from vocgan.corpus import synthetic_utterance
from vocgan.generator import GeneratorConfig, build_generator, generate, generate_full

cfg = GeneratorConfig.toy()
G = build_generator(cfg, seed=0)
print("upsampling rates:", cfg.upsample_rates, "product:", int(np.prod(cfg.upsample_rates)))
print("parameters: %d" % sum(p.data.size for p in G.parameters()))

mel = dsp.mel_spectrogram(synthetic_utterance(1, 0.5))
n = mel.values.shape[1]
outs = generate(G, mel)
for k, length in enumerate(outs.lengths()):
    print("x_%d: %6d samples (256 * %d / 2**%d = %d)" % (k, length, n, k, 256 * n // 2 ** k))

# Every output sits strictly inside (-1, 1).
print("peak |x_0|: %.4f" % np.abs(outs[0].data).max())

# Inference skips the side heads but produces the same full-rate waveform.
full = generate_full(G, mel)
print("inference path matches training path:", np.array_equal(full, outs[0].data[0, 0]))
