"""Alternating GAN training with ablation switches.

One discriminator update followed by one generator update per step.  A run
writes a loss CSV, model checkpoints (VOCG format) and a full-precision
training state from which it can resume bit-exactly.
"""

import csv
import json
import logging
import os
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import dsp
from .autodiff import AdamState, Tensor, adam_step, default_dtype, no_grad, save_checkpoint
from .discriminator import DiscriminatorConfig, all_parameters, build_discriminators, discriminate
from .generator import GeneratorConfig, build_generator
from .losses import (
    LossReport,
    LossWeights,
    feature_matching_loss,
    jcu_d_loss,
    jcu_g_loss,
    lsgan_d_loss,
    lsgan_g_loss,
    multires_stft_loss,
    total_g_loss,
)

log = logging.getLogger(__name__)

DETERMINISTIC_ENV = "VOCGAN_DETERMINISTIC"


class NumericalError(FloatingPointError):
    """A loss term became NaN or infinite."""


class DatasetError(ValueError):
    pass


@dataclass
class Ablation:
    hierarchical: bool = True
    jcu: bool = True
    stft: bool = True
    baseline_melgan: bool = False

    def __post_init__(self):
        if self.baseline_melgan:
            self.hierarchical = False
            self.jcu = False

    @classmethod
    def preset(cls, name):
        try:
            return cls(**ABLATION_PRESETS[name])
        except KeyError:
            raise ValueError(f"unknown ablation {name!r}; choose from {sorted(ABLATION_PRESETS)}") from None


# Ablation rows: baseline, each method alone or combined, and the full model.
ABLATION_PRESETS = {
    "baseline": dict(hierarchical=False, jcu=False, stft=False, baseline_melgan=True),
    "hierarchical": dict(hierarchical=True, jcu=False, stft=False),
    "jcu": dict(hierarchical=False, jcu=True, stft=False),
    "hierarchical+jcu": dict(hierarchical=True, jcu=True, stft=False),
    "hierarchical+stft": dict(hierarchical=True, jcu=False, stft=True),
    "vocgan": dict(hierarchical=True, jcu=True, stft=True),
}


def deterministic_mode():
    return os.environ.get(DETERMINISTIC_ENV, "") not in ("", "0", "false", "no")


@dataclass
class TrainConfig:
    seed: int = 0
    steps: int = 2000
    batch_size: int = 4
    clip_seconds: float = 1.0
    lr: float = 1e-4
    beta1: float = 0.5
    beta2: float = 0.9
    epsilon: float = 1e-8
    alpha: float = 10.0
    beta: float = 1.0
    ablation: Ablation = field(default_factory=Ablation)
    checkpoint_interval: int = 500
    base_channels: int = 64
    disc_channels: tuple = (16, 32, 64, 128)
    disc_cond_channels: int = 32
    dtype: str = "float32"
    monitor_stft: bool = False

    def __post_init__(self):
        if isinstance(self.ablation, dict):
            self.ablation = Ablation(**self.ablation)
        self.disc_channels = tuple(self.disc_channels)
        if self.dtype not in ("float32", "float64"):
            raise ValueError(f"dtype must be float32 or float64, got {self.dtype}")

    @classmethod
    def toy(cls, **overrides):
        return cls(**overrides)

    @classmethod
    def full(cls, **overrides):
        base = dict(base_channels=256, disc_channels=(16, 64, 256, 512),
                    disc_cond_channels=64, batch_size=16, steps=1_000_000,
                    checkpoint_interval=10_000)
        return cls(**{**base, **overrides})

    @property
    def n_frames(self):
        return int(self.clip_seconds * dsp.SAMPLE_RATE) // dsp.HOP

    @property
    def clip_samples(self):
        return self.n_frames * dsp.HOP

    @property
    def weights(self):
        return LossWeights(self.alpha, self.beta)

    @property
    def np_dtype(self):
        return np.dtype(self.dtype).type

    def generator_config(self):
        if self.ablation.hierarchical:
            return GeneratorConfig(base_channels=self.base_channels)
        return GeneratorConfig.melgan_baseline(base_channels=self.base_channels)

    def discriminator_config(self):
        return DiscriminatorConfig(channels=self.disc_channels,
                                   cond_channels=self.disc_cond_channels,
                                   conditional=self.ablation.jcu,
                                   hierarchical=self.ablation.hierarchical)

    def to_json(self):
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        return cls(**json.loads(text))

    @classmethod
    def load(cls, path):
        return cls.from_json(Path(path).read_text())


# --- data ------------------------------------------------------------------------

@dataclass
class Batch:
    mel: np.ndarray            # [B, n_mels, n_frames]
    waves: list                # waves[k]: [B, clip_samples / 2**k]
    indices: list
    offsets: list


def load_dataset(data_dir, sample_rate=dsp.SAMPLE_RATE):
    """Read and peak-normalise every ``*.wav`` under ``data_dir`` (sorted by name)."""
    paths = sorted(Path(data_dir).glob("*.wav"))
    clips = []
    for p in paths:
        w = dsp.read_wav(p, sample_rate)
        clips.append(dsp.peak_normalize(w.samples))
    if not clips:
        raise DatasetError(f"{data_dir}: no WAV files found")
    return clips


def _usable(dataset, clip):
    keep = []
    for i, x in enumerate(dataset):
        if len(x) < clip:
            warnings.warn(f"clip {i} has {len(x)} samples (< {clip}); skipped", stacklevel=3)
        else:
            keep.append(i)
    if not keep:
        raise DatasetError(f"no clip in the dataset is at least {clip} samples long")
    return keep


def sample_batch(dataset, cfg, rng, n_scales=5):
    """Random 1-second crops with their log-mels and multi-rate ground truth."""
    if not dataset:
        raise DatasetError("empty dataset")
    clip = cfg.clip_samples
    usable = _usable(dataset, clip)
    mels, crops, indices, offsets = [], [], [], []
    for _ in range(cfg.batch_size):
        i = usable[int(rng.integers(len(usable)))]
        x = dataset[i]
        start = int(rng.integers(0, len(x) - clip + 1))
        crop = np.asarray(x[start:start + clip], dtype=np.float64)
        mels.append(dsp.mel_spectrogram(crop, n_frames=cfg.n_frames).values)
        crops.append(crop)
        indices.append(i)
        offsets.append(start)
    full = np.stack(crops)
    waves = [dsp.downsample_waveform(full, k) for k in range(n_scales)]
    return Batch(np.stack(mels), waves, indices, offsets)


# --- training step ----------------------------------------------------------------

def _check(name, value, step):
    v = float(value.data) if isinstance(value, Tensor) else float(value)
    if not np.isfinite(v):
        raise NumericalError(f"loss term {name} is {v} at step {step}")
    return v


def train_step(models, batch, cfg, states, step=0):
    """One discriminator update then one generator update.

    ``models`` is ``(G, [D_0, ...])`` and ``states`` ``(g_state, d_state)``.
    Returns the step's :class:`LossReport`.
    """
    G, discs = models
    g_state, d_state = states
    ab = cfg.ablation
    dtype = cfg.np_dtype
    n_scales = len(discs)
    mel = Tensor(batch.mel, dtype=dtype)
    real = [Tensor(batch.waves[k][:, None, :], dtype=dtype) for k in range(n_scales)]
    terms = {}
    tag = "_jcu" if ab.jcu else ""

    G.requires_grad_(True)
    G.zero_grad()
    fake = G(mel)[:n_scales]

    # discriminator update; generator outputs enter as constants
    for D in discs:
        D.requires_grad_(True)
        D.zero_grad()
    fake_const = [f.detach() for f in fake]
    real_out = [discriminate(D, real[k], mel) for k, D in enumerate(discs)]
    fake_out = [discriminate(D, fake_const[k], mel) for k, D in enumerate(discs)]
    d_loss_fn = jcu_d_loss if ab.jcu else lsgan_d_loss
    loss_d, per_k = d_loss_fn(fake_out, real_out)
    for k, v in enumerate(per_k):
        terms[f"V_{k}{tag}"] = _check(f"V_{k}{tag}", v, step)
    terms[f"L_D{tag}"] = _check(f"L_D{tag}", loss_d, step)
    loss_d.backward()
    d_params = all_parameters(discs)
    adam_step(d_params, d_state)
    for D in discs:
        D.zero_grad()
        D.requires_grad_(False)

    # generator update against the refreshed discriminators
    fake_out = [discriminate(D, fake[k], mel) for k, D in enumerate(discs)]
    with no_grad():
        real_out = [discriminate(D, real[k], mel) for k, D in enumerate(discs)]
    adv = jcu_g_loss(fake_out) if ab.jcu else lsgan_g_loss(fake_out)
    fm = feature_matching_loss(real_out, fake_out)
    terms[f"L_G{tag}"] = _check(f"L_G{tag}", adv, step)
    terms["L_FM"] = _check("L_FM", fm, step)
    stft = None
    monitors = {}
    if ab.stft:
        stft = multires_stft_loss(batch.waves[0], fake[0])
        terms["L_STFT"] = _check("L_STFT", stft, step)
    elif cfg.monitor_stft:
        with no_grad():
            monitors["L_STFT"] = float(multires_stft_loss(batch.waves[0], fake_const[0]).data)
    total = total_g_loss(adv, fm, stft, cfg.weights if ab.stft else LossWeights(cfg.alpha, 0.0))
    terms["L_G_total"] = _check("L_G_total", total, step)
    total.backward()
    adam_step(G.parameters(), g_state)
    G.zero_grad()
    for D in discs:
        D.requires_grad_(True)

    return LossReport(step, terms, alpha=cfg.alpha, beta=cfg.beta if ab.stft else 0.0,
                      monitors=monitors)


# --- trainer -------------------------------------------------------------------------

class Trainer:
    """Owns models, optimizer states and the sampling RNG for one run."""

    def __init__(self, cfg, dataset):
        if deterministic_mode():
            cfg.dtype = "float64"
        self.cfg = cfg
        self.dataset = dataset
        seeds = np.random.SeedSequence(cfg.seed).spawn(3)
        g_seed, d_seed, data_seed = (int(s.generate_state(1)[0]) for s in seeds)
        with default_dtype(cfg.np_dtype):
            self.G = build_generator(cfg.generator_config(), g_seed)
            self.discs = build_discriminators(cfg.discriminator_config(), d_seed)
        opt = dict(lr=cfg.lr, beta1=cfg.beta1, beta2=cfg.beta2, epsilon=cfg.epsilon)
        self.g_state = AdamState.for_params(self.G.parameters(), **opt)
        self.d_state = AdamState.for_params(all_parameters(self.discs), **opt)
        self.rng = np.random.default_rng(data_seed)
        self.step = 0

    def train_step(self):
        batch = sample_batch(self.dataset, self.cfg, self.rng, n_scales=len(self.discs))
        self.step += 1
        return train_step((self.G, self.discs), batch, self.cfg,
                          (self.g_state, self.d_state), self.step)

    # --- persistence ---
    def save_models(self, out_dir):
        out_dir = Path(out_dir)
        save_checkpoint(out_dir / "generator.vocg", self.G.state_dict())
        (out_dir / "generator.json").write_text(self.cfg.generator_config().to_json())
        disc_state = {}
        for D in self.discs:
            disc_state.update((p.name, p.data) for p in D.parameters())
        save_checkpoint(out_dir / "discriminators.vocg", disc_state)

    def save_state(self, path):
        arrays = {}
        for name, value in self.G.state_dict().items():
            arrays[f"G/{name}"] = value
        for p in all_parameters(self.discs):
            arrays[f"D/{p.name}"] = p.data
        for tag, state in (("g", self.g_state), ("d", self.d_state)):
            for i, (m, v) in enumerate(zip(state.m, state.v)):
                arrays[f"{tag}_m/{i}"] = m
                arrays[f"{tag}_v/{i}"] = v
        meta = {
            "step": self.step,
            "g_adam_step": self.g_state.step,
            "d_adam_step": self.d_state.step,
            "rng": self.rng.bit_generator.state,
            "config": json.loads(self.cfg.to_json()),
        }
        arrays["meta"] = np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8)
        tmp = Path(str(path) + ".tmp.npz")
        np.savez(tmp, **arrays)
        os.replace(tmp, path)

    def load_state(self, path):
        with np.load(path) as data:
            meta = json.loads(bytes(data["meta"]).decode())
            self.G.load_state_dict({k[2:]: data[k] for k in data.files if k.startswith("G/")})
            for p in all_parameters(self.discs):
                p.data = data[f"D/{p.name}"].copy()
            for tag, state in (("g", self.g_state), ("d", self.d_state)):
                n = len(state.m)
                state.m = [data[f"{tag}_m/{i}"].copy() for i in range(n)]
                state.v = [data[f"{tag}_v/{i}"].copy() for i in range(n)]
        self.step = meta["step"]
        self.g_state.step = meta["g_adam_step"]
        self.d_state.step = meta["d_adam_step"]
        self.rng.bit_generator.state = meta["rng"]
        return meta


def _read_rows(csv_path, upto_step):
    with open(csv_path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        return None, []
    return rows[0], [r for r in rows[1:] if int(r[0]) <= upto_step]


def run_training(cfg, dataset_dir=None, out_dir="run", dataset=None, resume=False,
                 steps=None, callback=None):
    """Train for ``cfg.steps`` (or ``steps``) total steps, logging to ``out_dir``.

    With ``resume`` the run continues from ``out_dir/state.npz``; the loss
    CSV is cut back to the saved step so the finished file matches an
    uninterrupted run.  Returns the :class:`Trainer`.
    """
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out_dir}: {exc}") from exc
    if dataset is None:
        dataset = load_dataset(dataset_dir)
    trainer = Trainer(cfg, dataset)
    csv_path = out_dir / "losses.csv"
    state_path = out_dir / "state.npz"
    header, rows = None, []
    if resume and state_path.exists():
        trainer.load_state(state_path)
        if csv_path.exists():
            header, rows = _read_rows(csv_path, trainer.step)
        log.info("resumed from step %d", trainer.step)
    (out_dir / "config.json").write_text(cfg.to_json())

    total_steps = steps if steps is not None else cfg.steps
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if header:
            writer.writerow(header)
            writer.writerows(rows)
        while trainer.step < total_steps:
            report = trainer.train_step()
            monitors = report.monitors
            if header is None:
                header = report.csv_header() + [f"monitor_{k}" for k in monitors]
                writer.writerow(header)
            writer.writerow(report.csv_row() + [repr(v) for v in monitors.values()])
            fh.flush()
            if callback is not None:
                callback(trainer, report)
            if cfg.checkpoint_interval and trainer.step % cfg.checkpoint_interval == 0:
                trainer.save_state(state_path)
                trainer.save_models(out_dir)
    trainer.save_state(state_path)
    trainer.save_models(out_dir)
    return trainer
