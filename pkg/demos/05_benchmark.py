"""
Real-time factor on the CPU
===========================

Seconds of audio generated per second of wall clock, with the BLAS thread
pool pinned.  Published GPU and CPU figures come from different hardware
and are printed for reference only.
"""

import json

from vocgan import dsp, metrics
from vocgan.corpus import synthetic_utterance
from vocgan.generator import GeneratorConfig, build_generator

mels = [dsp.mel_spectrogram(synthetic_utterance(i, 2.0)).values for i in range(2)]
for name, cfg in (("toy", GeneratorConfig.toy()), ("full", GeneratorConfig())):
    G = build_generator(cfg, seed=0)
    report = metrics.benchmark_rtf(G, mels, threads=1, repeats=5)
    print("%-4s RTF median %6.2fx  variance %.2e  config %s"
          % (name, report["rtf_median"], report["rtf_variance"], report["config_hash"][:12]))

print(json.dumps(report["reference_rtf"], indent=2))
