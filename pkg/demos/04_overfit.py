"""
Overfitting a single clip
=========================

Train the toy model on one bundled clip and watch the multi-resolution STFT
loss fall.  Pass a step count on the command line (default 200); the full
2000-step run takes about 20 minutes on one core.
"""

import sys
import tempfile
import time

from vocgan import metrics
from vocgan.corpus import overfit_clip
from vocgan.generator import generate_full
from vocgan import dsp
from vocgan.trainer import TrainConfig, run_training

steps = int(sys.argv[1]) if len(sys.argv) > 1 else 200
clip = overfit_clip()
cfg = TrainConfig.toy(batch_size=1, seed=42, steps=steps, checkpoint_interval=0)

history = []
start = time.perf_counter()


def log(trainer, report):
    history.append(report["L_STFT"])
    if trainer.step == 1 or trainer.step % 25 == 0:
        print("step %5d  L_STFT %.3f  L_FM %.3f  L_D %.3f  (%.0f s)"
              % (trainer.step, report["L_STFT"], report["L_FM"], report["L_D_jcu"],
                 time.perf_counter() - start))


with tempfile.TemporaryDirectory() as out:
    trainer = run_training(cfg, dataset=[clip.samples], out_dir=out, callback=log)

print("L_STFT: %.3f -> %.3f (%.0f%% of the first step)"
      % (history[0], history[-1], 100 * history[-1] / history[0]))

# Copy synthesis of the training clip.
y = generate_full(trainer.G, dsp.mel_spectrogram(clip))
print("MCD to the clip: %.2f dB" % metrics.mcd(clip.samples, y))
