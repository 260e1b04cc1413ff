"""Training objectives.

Adversarial terms use least squares.  Discriminator outputs are passed around
as nested lists ``outputs[k][j]`` of :class:`DiscriminatorOutput`, where ``k``
indexes the resolution-specific discriminator and ``j`` its sub-discriminators
(only ``D_0`` has more than one).  Score maps are reduced by their mean over
batch and windows.
"""

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Function, Tensor
from .autodiff import functional as F
from .dsp import StftConfig, frame_signal, hann_window

STFT_CONFIGS = (
    StftConfig(fft_size=512, win_size=240, hop=50),
    StftConfig(fft_size=1024, win_size=600, hop=120),
    StftConfig(fft_size=2048, win_size=1200, hop=240),
)
MAG_FLOOR = 1e-7


@dataclass
class LossWeights:
    alpha: float = 10.0
    beta: float = 1.0

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise ValueError(f"loss weights must be non-negative, got {self}")


def _t(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _ms(x):
    return F.mean(F.square(_t(x)))


def _ms_off(x, target):
    return F.mean(F.square(_t(x) - target))


# --- least-squares adversarial ------------------------------------------------

def lsgan_v_k(d_fake_scores, d_real_scores):
    """``1/2 E[D(fake)^2] + 1/2 E[(D(real) - 1)^2]`` for one score-map pair."""
    return 0.5 * _ms(d_fake_scores) + 0.5 * _ms_off(d_real_scores, 1.0)


def lsgan_d_loss(fake_outputs, real_outputs):
    """Sum of ``V_k`` over all scales; returns ``(total, [V_0, ..., V_K])``.

    ``V_0`` sums the objectives of ``D_0``'s sub-discriminators.
    """
    per_k = []
    for fakes, reals in zip(fake_outputs, real_outputs):
        terms = [lsgan_v_k(f.uncond, r.uncond) for f, r in zip(fakes, reals)]
        per_k.append(_sum(terms))
    return _sum(per_k), per_k


def lsgan_g_loss(fake_outputs):
    return _sum([0.5 * _ms_off(f.uncond, 1.0) for fakes in fake_outputs for f in fakes])


# --- joint conditional / unconditional ------------------------------------------------

def jcu_v_k(uncond_fake, cond_fake, uncond_real, cond_real):
    """Least-squares objective over both heads.

    Each head's map is averaged separately, so heads attached at different
    trunk depths (different map lengths) combine cleanly; for equal shapes
    this equals the mean of the summed squares.
    """
    fake = 0.5 * (_ms(uncond_fake) + _ms(cond_fake))
    real = 0.5 * (_ms_off(uncond_real, 1.0) + _ms_off(cond_real, 1.0))
    return fake + real


def jcu_d_loss(fake_outputs, real_outputs):
    per_k = []
    for fakes, reals in zip(fake_outputs, real_outputs):
        terms = [jcu_v_k(f.uncond, f.cond, r.uncond, r.cond) for f, r in zip(fakes, reals)]
        per_k.append(_sum(terms))
    return _sum(per_k), per_k


def jcu_g_loss(fake_outputs):
    terms = [0.5 * (_ms_off(f.uncond, 1.0) + _ms_off(f.cond, 1.0))
             for fakes in fake_outputs for f in fakes]
    return _sum(terms)


# --- feature matching -------------------------------------------------------------------

def feature_matching_loss(real_outputs, fake_outputs):
    """Sum over every (sub-)discriminator and trunk layer of the mean absolute
    feature difference (L1 norm divided by the layer's element count)."""
    terms = []
    for reals, fakes in zip(real_outputs, fake_outputs):
        for r, f in zip(reals, fakes):
            if len(r.features) != len(f.features):
                raise F.ShapeError("feature lists differ in depth")
            for fr, ff in zip(r.features, f.features):
                if fr.shape != ff.shape:
                    raise F.ShapeError(f"feature shapes differ: {fr.shape} vs {ff.shape}")
                terms.append(F.mean(F.abs(_t(ff) - _t(fr).detach())))
    return _sum(terms)


# --- multi-resolution STFT -------------------------------------------------------------

class _StftMagnitude(Function):
    """``max(|rfft(window * frame)|, floor)`` for pre-padded ``[B, L]`` input."""

    def forward(self, xp, fft_size=512, win_size=240, hop=50, floor=MAG_FLOOR):
        n_frames = 1 + (xp.shape[-1] - fft_size) // hop
        strides = xp.strides[:-1] + (hop * xp.strides[-1], xp.strides[-1])
        frames = np.lib.stride_tricks.as_strided(
            xp, shape=xp.shape[:-1] + (n_frames, fft_size), strides=strides, writeable=False)
        win = hann_window(win_size, fft_size).astype(xp.dtype)
        spec = np.fft.rfft(frames * win, axis=-1)
        mag = np.abs(spec)
        self.mask = mag > floor
        self.spec, self.mag, self.win = spec, mag, win
        self.meta = (xp.shape, fft_size, hop, n_frames)
        return np.where(self.mask, mag, floor).astype(xp.dtype)

    def backward(self, grad):
        shape, fft_size, hop, n_frames = self.meta
        safe = np.where(self.mask, self.mag, 1.0)
        g = np.where(self.mask, grad / safe, 0.0) * self.spec
        g[..., 1:-1] *= 0.5
        gframes = fft_size * np.fft.irfft(g, n=fft_size, axis=-1) * self.win
        out = np.zeros(shape, dtype=grad.dtype)
        for t in range(n_frames):
            out[..., t * hop:t * hop + fft_size] += gframes[..., t, :]
        return out


def stft_magnitude(x, cfg):
    """Differentiable magnitude spectrogram ``[B, n_frames, fft_size // 2 + 1]``.

    Uses the same centred reflect-padded framing as :func:`vocgan.dsp.stft`.
    """
    x = _t(x)
    xp = F.pad_reflect(x, cfg.fft_size // 2)
    return _StftMagnitude.apply(xp, fft_size=cfg.fft_size, win_size=cfg.win_size,
                                hop=cfg.hop, floor=MAG_FLOOR)


def _reference_magnitude(x, cfg):
    frames = frame_signal(x, cfg.fft_size, cfg.hop) * hann_window(cfg.win_size, cfg.fft_size)
    return np.maximum(np.abs(np.fft.rfft(frames, axis=-1)), MAG_FLOOR)


def stft_loss_terms(x, x_hat, cfg):
    """Spectral convergence and mean log-magnitude L1 for one resolution."""
    x = np.asarray(x.data if isinstance(x, Tensor) else x)
    s = _reference_magnitude(x, cfg).astype(x.dtype)
    s_hat = stft_magnitude(x_hat, cfg)
    diff = F.sub(s, s_hat)
    num = F.sqrt(F.sum(F.square(diff), axis=(-2, -1)))
    den = np.sqrt(np.sum(s * s, axis=(-2, -1)))
    sc = F.mean(num / den)
    log_mag = F.mean(F.abs(F.sub(np.log(s), F.log(s_hat))))
    return sc, log_mag


def multires_stft_loss(x, x_hat, configs=STFT_CONFIGS):
    """Mean over resolutions of spectral convergence + log-magnitude L1.

    ``x`` is the ground truth (array, no gradient) and ``x_hat`` the
    full-resolution output, both ``[B, L]`` or ``[L]``; the longer one is
    truncated.
    """
    x = np.asarray(x.data if isinstance(x, Tensor) else x)
    x_hat = _t(x_hat)
    if x_hat.ndim == 3:
        x_hat = x_hat.reshape((x_hat.shape[0], x_hat.shape[-1]))
    if x.ndim == 3:
        x = x[:, 0]
    if x.ndim == 1 and x_hat.ndim == 2:
        x = x[None]
    if x_hat.ndim == 1 and x.ndim == 2:
        x_hat = x_hat.reshape((1, x_hat.shape[0]))
    n = min(x.shape[-1], x_hat.shape[-1])
    x = x[..., :n].astype(x_hat.dtype)
    if x_hat.shape[-1] != n:
        x_hat = x_hat[..., :n]
    total = None
    for cfg in configs:
        sc, log_mag = stft_loss_terms(x, x_hat, cfg)
        term = sc + log_mag
        total = term if total is None else total + term
    return total / float(len(configs))


# --- total objective ----------------------------------------------------------------------

def total_g_loss(adv, fm, stft=None, weights=None):
    """``adv + alpha * fm + beta * stft``; ``stft=None`` drops the STFT term."""
    weights = weights or LossWeights()
    total = adv + weights.alpha * fm
    if stft is not None and weights.beta:
        total = total + weights.beta * stft
    return total


def _sum(terms):
    total = terms[0]
    for t in terms[1:]:
        total = total + t
    return total


@dataclass
class LossReport:
    """Named scalar losses for one training step."""

    step: int
    terms: dict = field(default_factory=dict)
    alpha: float = 10.0
    beta: float = 1.0
    monitors: dict = field(default_factory=dict)

    def __getitem__(self, name):
        return self.terms[name]

    @property
    def adversarial_name(self):
        return "L_G_jcu" if "L_G_jcu" in self.terms else "L_G"

    def recomputed_total(self):
        total = self.terms[self.adversarial_name] + self.alpha * self.terms["L_FM"]
        if "L_STFT" in self.terms:
            total += self.beta * self.terms["L_STFT"]
        return total

    def check_finite(self):
        for name, value in self.terms.items():
            if not np.isfinite(value):
                raise FloatingPointError(f"loss term {name} is {value} at step {self.step}")

    def csv_header(self):
        return ["step"] + list(self.terms)

    def csv_row(self):
        return [str(self.step)] + [repr(float(v)) for v in self.terms.values()]
