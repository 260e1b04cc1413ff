"""Hierarchically-nested JCU discriminators.

``D_0`` judges the full-resolution waveform and is itself multi-scale (three
sub-discriminators on ``x``, ``pool(x)`` and ``pool(pool(x))``).  ``D_1 .. D_K``
each judge one generator side output.  Every (sub-)discriminator has one
strided convolutional trunk shared by two heads: an unconditional score map
and a mel-conditional score map.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .autodiff import Conv1d, Module, Tensor
from .autodiff import functional as F
from .dsp import HOP


@dataclass
class DiscriminatorConfig:
    K: int = 4
    sub_scales_of_D0: int = 3
    channels: tuple = (16, 64, 256, 512)
    entry_kernel: int = 15
    block_kernel: int = 41
    block_stride: int = 4
    groups: int = 4
    mel_channels: int = 80
    cond_channels: int = 64
    conditional: bool = True
    hierarchical: bool = True
    slope: float = 0.2

    def __post_init__(self):
        self.channels = tuple(int(c) for c in self.channels)
        self.validate()

    @classmethod
    def toy(cls, **overrides):
        return cls(**{"channels": (16, 32, 64, 128), "cond_channels": 32, **overrides})

    def validate(self):
        if self.hierarchical and self.K != 4:
            raise ValueError(f"hierarchical discriminator needs K=4, got {self.K}")
        if self.sub_scales_of_D0 < 1:
            raise ValueError("D_0 needs at least one sub-discriminator")
        if len(self.channels) != 4:
            raise ValueError("trunk has one entry conv plus three strided blocks: 4 widths")
        if any(c % self.groups for c in self.channels):
            raise ValueError(f"channel widths {self.channels} must be divisible by groups={self.groups}")

    @property
    def n_discriminators(self):
        return self.K + 1 if self.hierarchical else 1

    @property
    def total_stride(self):
        return self.block_stride ** (len(self.channels) - 1)


@dataclass
class DiscriminatorOutput:
    uncond: Tensor
    cond: Tensor = None
    features: list = field(default_factory=list)

    @property
    def feature_sizes(self):
        """Elements per item in each feature map (``N_t``)."""
        return [int(np.prod(f.shape[1:])) for f in self.features]


class Trunk(Module):
    """Entry conv followed by strided grouped conv blocks, leaky ReLU after each."""

    def __init__(self, cfg, rng):
        c = cfg.channels
        layers = [Conv1d(1, c[0], cfg.entry_kernel, padding=cfg.entry_kernel // 2, rng=rng)]
        for c_in, c_out in zip(c[:-1], c[1:]):
            layers.append(Conv1d(c_in, c_out, cfg.block_kernel, stride=cfg.block_stride,
                                 padding=cfg.block_kernel // 2, groups=cfg.groups, rng=rng))
        self.layers = layers
        self.slope = cfg.slope

    def forward(self, x):
        features = []
        for layer in self.layers:
            x = F.leaky_relu(layer(x), self.slope)
            features.append(x)
        return features

    def output_lengths(self, length):
        out = []
        for layer in self.layers:
            length = layer.output_length(length)
            out.append(length)
        return out

    def layer_rates(self):
        """Cumulative downsampling factor after each layer."""
        rates, r = [], 1
        for layer in self.layers:
            r *= layer.stride
            rates.append(r)
        return rates


def conditioning_layer(trunk_rates, input_scale):
    """Index of the trunk layer whose frame rate is closest (in log scale) to the mel's.

    ``input_scale`` is the waveform's decimation relative to full resolution;
    ties go to the deeper layer.
    """
    target = math.log2(HOP)
    dist = [abs(math.log2(r * input_scale) - target) for r in trunk_rates]
    best = min(dist)
    return max(i for i, d in enumerate(dist) if d == best)


class JCUDiscriminator(Module):
    """One trunk with an unconditional and (optionally) a conditional head."""

    def __init__(self, cfg, input_scale, rng):
        self.trunk = Trunk(cfg, rng)
        self.input_scale = input_scale
        self.uncond_head = Conv1d(cfg.channels[-1], 1, 1, rng=rng)
        self.cond_layer = conditioning_layer(self.trunk.layer_rates(), input_scale)
        if cfg.conditional:
            self.mel_proj = Conv1d(cfg.mel_channels, cfg.cond_channels, 1, rng=rng)
            self.cond_head = Conv1d(cfg.channels[self.cond_layer] + cfg.cond_channels, 1, 1,
                                    rng=rng)
        self.conditional = cfg.conditional

    def forward(self, x, mel=None):
        features = self.trunk(x)
        uncond = self.uncond_head(features[-1])
        cond = None
        if self.conditional:
            if mel is None:
                raise ValueError("conditional discriminator needs the mel spectrogram")
            h = features[self.cond_layer]
            proj = self.mel_proj(F.resample_nearest(mel, h.shape[-1]))
            cond = self.cond_head(F.concat([h, proj], axis=1))
        return DiscriminatorOutput(uncond, cond, features)


class ScaleDiscriminator(Module):
    """``D_k``: one or more JCU sub-discriminators on successively pooled inputs."""

    def __init__(self, cfg, k, n_sub, rng):
        self.k = k
        self.subs = [JCUDiscriminator(cfg, 2 ** (k + j), rng) for j in range(n_sub)]

    def forward(self, x, mel=None):
        outputs = []
        for j, sub in enumerate(self.subs):
            if j:
                x = F.avg_pool1d(x, 4, stride=2, padding=1)
            outputs.append(sub(x, mel))
        return outputs


def build_discriminators(cfg, seed=0):
    """``[D_0, ..., D_K]``; ``D_0`` has ``cfg.sub_scales_of_D0`` sub-discriminators.

    With ``cfg.hierarchical`` false only ``D_0`` is built (the plain
    multi-scale discriminator).
    """
    cfg.validate()
    rng = np.random.default_rng(seed)
    discs = []
    for k in range(cfg.n_discriminators):
        n_sub = cfg.sub_scales_of_D0 if k == 0 else 1
        discs.append(ScaleDiscriminator(cfg, k, n_sub, rng).assign_names(f"disc.{k}."))
    return discs


def expected_length(n_frames, k):
    return HOP * n_frames // 2 ** k


def discriminate(D_k, x, s):
    """Score waveform ``x`` (``[B, 1, L]`` at scale ``k``) against mel ``s``.

    Returns one :class:`DiscriminatorOutput` per sub-discriminator.
    """
    if x.ndim == 2:
        x = x.reshape((x.shape[0], 1, x.shape[1]))
    if s is not None:
        want = expected_length(s.shape[-1], D_k.k)
        if x.shape[-1] != want:
            raise F.ShapeError(
                f"length axis: scale {D_k.k} expects {want} samples for "
                f"{s.shape[-1]} mel frames, got {x.shape[-1]}"
            )
    return D_k(x, s)


def all_parameters(discs):
    return [p for d in discs for p in d.parameters()]
