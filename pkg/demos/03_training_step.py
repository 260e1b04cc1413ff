"""
Anatomy of a training step
==========================

One discriminator update followed by one generator update, and how the
ablation flags change which loss terms exist.
"""

from vocgan.corpus import overfit_clip
from vocgan.trainer import ABLATION_PRESETS, Ablation, TrainConfig, Trainer

data = [overfit_clip().samples]

# The full model: five discriminator scales, joint conditional and
# unconditional scores, and the multi-resolution STFT loss.
trainer = Trainer(TrainConfig.toy(batch_size=1, seed=0), data)
report = trainer.train_step()
for name, value in report.terms.items():
    print("%-10s %9.4f" % (name, value))

# The generator total is the adversarial term plus 10 x feature matching
# plus the STFT loss; the report can rebuild it from its parts.
print("recomputed total: %.4f" % report.recomputed_total())

# Each ablation row drops or swaps terms; nothing else changes.
print()
for name in ABLATION_PRESETS:
    terms = Trainer(TrainConfig.toy(batch_size=1, ablation=Ablation.preset(name)), data).train_step().terms
    print("%-18s %s" % (name, " ".join(sorted(terms))))
