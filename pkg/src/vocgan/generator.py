"""Multi-scale waveform generator.

Mel spectrogram in, ``K + 1`` waveforms out: the full-resolution signal and
side outputs at ``1/2, 1/4, ..., 1/2**K`` of its sample rate, each produced by
a small head on an intermediate upsampling block.  Every 2x block also gets a
skip connection straight from the input mel.
"""

import hashlib
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .autodiff import Conv1d, ConvTranspose1d, Module, Tensor, no_grad
from .autodiff import functional as F
from .dsp import HOP, MelSpectrogram


class ConfigError(ValueError):
    pass


@dataclass
class GeneratorConfig:
    mel_channels: int = 80
    base_channels: int = 256
    upsample_rates: tuple = (4, 4, 2, 2, 2, 2)
    residual_dilations: tuple = (1, 3, 9)
    K: int = 4
    min_channels: int = 32
    hierarchical: bool = True
    input_kernel: int = 7
    head_kernel: int = 7
    residual_kernel: int = 3
    slope: float = 0.2

    def __post_init__(self):
        self.upsample_rates = tuple(int(r) for r in self.upsample_rates)
        self.residual_dilations = tuple(int(d) for d in self.residual_dilations)
        self.validate()

    @classmethod
    def toy(cls, **overrides):
        return cls(**{"base_channels": 64, **overrides})

    @classmethod
    def melgan_baseline(cls, base_channels=256, **overrides):
        """Four-block (8, 8, 2, 2) generator without side outputs or mel skips."""
        return cls(base_channels=base_channels, upsample_rates=(8, 8, 2, 2), K=0,
                   hierarchical=False, **overrides)

    def validate(self):
        product = int(np.prod(self.upsample_rates))
        if product != HOP:
            raise ConfigError(f"upsample rates {self.upsample_rates} multiply to {product}, need {HOP}")
        if any(r % 2 for r in self.upsample_rates):
            raise ConfigError("upsample rates must be even (kernel 2*rate, padding rate/2)")
        if self.hierarchical:
            if len(self.upsample_rates) != 6:
                raise ConfigError(f"expected 6 upsampling blocks, got {len(self.upsample_rates)}")
            if self.upsample_rates[:2] != (4, 4) or any(r != 2 for r in self.upsample_rates[2:]):
                raise ConfigError(f"rates must be (4, 4, 2, 2, 2, 2), got {self.upsample_rates}")
            if self.K != 4:
                raise ConfigError(f"K must be 4 for the hierarchical generator, got {self.K}")
        elif self.K != 0:
            raise ConfigError("a non-hierarchical generator has no side outputs (K=0)")

    def channel_plan(self):
        """Output width of each upsampling block (halving, floored)."""
        return [max(self.base_channels // 2 ** (i + 1), self.min_channels)
                for i in range(len(self.upsample_rates))]

    def head_blocks(self):
        """Map ``k -> block index`` whose cumulative rate is ``HOP / 2**k``."""
        cumulative = np.cumprod(self.upsample_rates)
        heads = {}
        for k in range(self.K + 1):
            (idx,) = np.flatnonzero(cumulative == HOP // 2 ** k)
            heads[k] = int(idx)
        return heads

    def to_json(self):
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text):
        return cls(**json.loads(text))

    def config_hash(self):
        return hashlib.sha256(self.to_json().encode()).hexdigest()[:16]


@dataclass
class MultiScaleWaveforms:
    """Generator outputs; ``outputs[k]`` is ``[B, 1, L / 2**k]``."""

    outputs: list = field(default_factory=list)

    def __getitem__(self, k):
        return self.outputs[k]

    def __len__(self):
        return len(self.outputs)

    def lengths(self):
        return [o.shape[-1] for o in self.outputs]


class ResidualUnit(Module):
    def __init__(self, channels, dilation, kernel, slope, rng):
        self.dilated = Conv1d(channels, channels, kernel, dilation=dilation,
                              padding=dilation * (kernel - 1) // 2, pad_mode="reflect", rng=rng)
        self.pointwise = Conv1d(channels, channels, 1, rng=rng)
        self.slope = slope

    def forward(self, x):
        y = self.dilated(F.leaky_relu(x, self.slope))
        y = self.pointwise(F.leaky_relu(y, self.slope))
        return x + y


class UpsampleBlock(Module):
    def __init__(self, in_channels, out_channels, rate, cfg, rng, skip_rate=None):
        # skip_rate: cumulative upsampling factor at this block's input (mel skip), or None
        self.skip_rate = skip_rate
        if skip_rate is not None:
            self.skip = Conv1d(cfg.mel_channels, in_channels, 1, rng=rng)
        self.up = ConvTranspose1d(in_channels, out_channels, 2 * rate, stride=rate,
                                  padding=rate // 2, rng=rng)
        self.residual = [ResidualUnit(out_channels, d, cfg.residual_kernel, cfg.slope, rng)
                         for d in cfg.residual_dilations]
        self.slope = cfg.slope

    def forward(self, x, mel):
        if self.skip_rate is not None:
            x = x + self.skip(F.upsample_nearest(mel, self.skip_rate))
        x = self.up(F.leaky_relu(x, self.slope))
        for unit in self.residual:
            x = unit(x)
        return x


class Generator(Module):
    def __init__(self, cfg, rng):
        self.cfg = cfg
        widths = cfg.channel_plan()
        self.input_conv = Conv1d(cfg.mel_channels, cfg.base_channels, cfg.input_kernel,
                                 padding=cfg.input_kernel // 2, pad_mode="reflect", rng=rng)
        blocks = []
        in_ch, cumulative = cfg.base_channels, 1
        for i, rate in enumerate(cfg.upsample_rates):
            skip_rate = cumulative if (cfg.hierarchical and rate == 2) else None
            blocks.append(UpsampleBlock(in_ch, widths[i], rate, cfg, rng, skip_rate))
            in_ch, cumulative = widths[i], cumulative * rate
        self.blocks = blocks
        self.head_of = cfg.head_blocks()
        # heads ordered k = 0..K
        self.heads = [Conv1d(widths[self.head_of[k]], 1, cfg.head_kernel,
                             padding=cfg.head_kernel // 2, pad_mode="reflect", rng=rng)
                      for k in range(cfg.K + 1)]

    def _head(self, k, h):
        return F.tanh_act(self.heads[k](F.leaky_relu(h, self.cfg.slope)))

    def forward(self, mel, full_only=False):
        """Run the generator on a ``[B, n_mels, T]`` tensor.

        Returns the list ``[x_0, x_1, ..., x_K]`` (each ``[B, 1, 256 T / 2**k]``),
        or just ``[x_0]`` when ``full_only``.
        """
        if mel.shape[1] != self.cfg.mel_channels:
            raise F.ShapeError(
                f"channel axis: mel has {mel.shape[1]} bands, generator expects {self.cfg.mel_channels}"
            )
        block_to_k = {} if full_only else {b: k for k, b in self.head_of.items() if k > 0}
        sides = {}
        h = self.input_conv(mel)
        for i, block in enumerate(self.blocks):
            h = block(h, mel)
            if i in block_to_k:
                k = block_to_k[i]
                sides[k] = self._head(k, h)
        outputs = [self._head(0, h)]
        outputs += [sides[k] for k in range(1, self.cfg.K + 1) if k in sides]
        return outputs

    def receptive_window(self, frame_lo, frame_hi, n_frames):
        """Sample range of ``x_0`` that mel frames ``frame_lo..frame_hi`` can influence.

        Interval arithmetic through every layer (reflection at the borders is
        ignored, so the bound holds for frames away from the edges).
        """
        cfg = self.cfg
        lo, hi = frame_lo - cfg.input_kernel // 2, frame_hi + cfg.input_kernel // 2
        cumulative = 1
        for block, rate in zip(self.blocks, cfg.upsample_rates):
            if block.skip_rate is not None:
                lo = min(lo, frame_lo * cumulative)
                hi = max(hi, (frame_hi + 1) * cumulative - 1)
            pad = rate // 2
            lo, hi = lo * rate - pad, hi * rate - pad + 2 * rate - 1
            reach = sum(d * (cfg.residual_kernel - 1) // 2 for d in cfg.residual_dilations)
            lo, hi = lo - reach, hi + reach
            cumulative *= rate
        lo, hi = lo - cfg.head_kernel // 2, hi + cfg.head_kernel // 2
        return max(lo, 0), min(hi, HOP * n_frames - 1)


def build_generator(cfg, seed=0):
    """Construct a generator with parameters drawn deterministically from ``seed``."""
    cfg.validate()
    gen = Generator(cfg, np.random.default_rng(seed))
    return gen.assign_names("gen.")


def _as_batch(s):
    if isinstance(s, MelSpectrogram):
        s = s.values
    if isinstance(s, Tensor):
        return s if s.ndim == 3 else s.reshape((1,) + s.shape)
    s = np.asarray(s)
    if s.ndim == 2:
        s = s[None]
    return Tensor(s)


def generate(G, s):
    """All ``K + 1`` waveforms for mel ``s`` (array, tensor or MelSpectrogram)."""
    return MultiScaleWaveforms(G(_as_batch(s)))


def generate_full(G, s):
    """Inference path: the full-resolution waveform as a 1-D numpy array
    (or ``[B, L]`` for batched input). Side heads are skipped."""
    mel = _as_batch(s)
    with no_grad():
        out = G(mel, full_only=True)[0].data[:, 0, :]
    return out[0] if out.shape[0] == 1 else out


def load_generator(path, config_path=None):
    """Rebuild a generator from a ``.vocg`` checkpoint.

    The architecture is read from ``config_path`` or, by default, the
    ``generator.json`` next to the checkpoint.
    """
    from pathlib import Path

    from .autodiff import load_checkpoint

    path = Path(path)
    config_path = Path(config_path) if config_path else path.with_name("generator.json")
    cfg = GeneratorConfig.from_json(config_path.read_text())
    G = build_generator(cfg, seed=0)
    G.load_state_dict(load_checkpoint(path))
    return G
