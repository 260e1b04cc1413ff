"""Audio front end: WAV I/O, STFT, log-mel features, multi-rate ground truth, F0.

All functions are pure numpy and operate on 1-D float arrays (or
:class:`Waveform`).  The defaults reproduce the vocoder's feature interface:
22.05 kHz audio, 80 log-mel bands, hop 256.
"""

import math
import struct
import wave
from dataclasses import dataclass

import numpy as np
from scipy.fft import dct
from scipy.signal import resample_poly

SAMPLE_RATE = 22050
N_MELS = 80
FFT_SIZE = 1024
WIN_SIZE = 1024
HOP = 256
FMIN = 0.0
FMAX = 8000.0
MEL_FLOOR = 1e-5
PEAK_LEVEL = 0.95

F0_FRAME = 1024
F0_HOP = 256
F0_FMIN = 50.0
F0_FMAX = 500.0
VOICING_THRESHOLD = 0.45
SILENCE_RMS = 1e-4

MEL_MAGIC = b"VOCM"


class AudioFormatError(ValueError):
    """WAV file is not 16-bit PCM mono or is otherwise unreadable."""


class SampleRateError(ValueError):
    """Audio sample rate differs from the one required."""


@dataclass
class Waveform:
    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64).reshape(-1)

    def __len__(self):
        return len(self.samples)

    @property
    def duration(self):
        return len(self.samples) / self.sample_rate


@dataclass(frozen=True)
class StftConfig:
    fft_size: int
    win_size: int
    hop: int

    def __post_init__(self):
        if self.win_size > self.fft_size:
            raise ValueError(f"win_size {self.win_size} > fft_size {self.fft_size}")
        if self.hop > self.win_size:
            raise ValueError(f"hop {self.hop} > win_size {self.win_size}")


MEL_STFT = StftConfig(FFT_SIZE, WIN_SIZE, HOP)


@dataclass
class MelSpectrogram:
    values: np.ndarray  # [n_mels, n_frames]
    hop: int = HOP
    fft_size: int = FFT_SIZE
    win_size: int = WIN_SIZE
    fmin: float = FMIN
    fmax: float = FMAX

    @property
    def n_mels(self):
        return self.values.shape[0]

    @property
    def n_frames(self):
        return self.values.shape[1]


def _samples(w):
    return w.samples if isinstance(w, Waveform) else np.asarray(w, dtype=np.float64)


# --- WAV ------------------------------------------------------------------

def read_wav(path, sample_rate=SAMPLE_RATE):
    """Read a 16-bit PCM mono WAV.

    Pass ``sample_rate=None`` to accept any rate; otherwise a mismatching file
    raises :class:`SampleRateError` (use :func:`resample` explicitly).
    """
    try:
        with wave.open(str(path), "rb") as fh:
            channels, width, rate = fh.getnchannels(), fh.getsampwidth(), fh.getframerate()
            frames = fh.readframes(fh.getnframes())
    except (wave.Error, EOFError, struct.error) as exc:
        raise AudioFormatError(f"{path}: not a readable PCM WAV ({exc})") from exc
    if channels != 1:
        raise AudioFormatError(f"{path}: {channels} channels, only mono is supported")
    if width != 2:
        raise AudioFormatError(f"{path}: {8 * width}-bit samples, only 16-bit PCM is supported")
    if sample_rate is not None and rate != sample_rate:
        raise SampleRateError(f"{path}: sample rate {rate} Hz, expected {sample_rate} Hz")
    pcm = np.frombuffer(frames, dtype="<i2")
    if pcm.size == 0:
        raise AudioFormatError(f"{path}: no audio samples")
    return Waveform(pcm / 32768.0, rate)


def write_wav(path, w, sample_rate=None):
    """Write 16-bit PCM mono; values outside [-1, 1) saturate."""
    x = _samples(w)
    rate = sample_rate or (w.sample_rate if isinstance(w, Waveform) else SAMPLE_RATE)
    pcm = np.clip(np.round(x * 32768.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(int(rate))
        fh.writeframes(pcm.tobytes())


def resample(w, target_rate=SAMPLE_RATE):
    """Polyphase resampling to ``target_rate`` (anti-aliased)."""
    x = _samples(w)
    rate = w.sample_rate if isinstance(w, Waveform) else SAMPLE_RATE
    if rate == target_rate:
        return Waveform(x.copy(), target_rate)
    g = math.gcd(int(rate), int(target_rate))
    return Waveform(resample_poly(x, target_rate // g, rate // g), target_rate)


def peak_normalize(x, level=PEAK_LEVEL):
    x = np.asarray(x, dtype=np.float64)
    peak = np.max(np.abs(x)) if x.size else 0.0
    return x * (level / peak) if peak > 0 else x.copy()


# --- STFT -------------------------------------------------------------------

def hann_window(win_size, fft_size=None):
    """Periodic Hann window, zero-padded (centred) to ``fft_size``."""
    fft_size = fft_size or win_size
    n = np.arange(win_size)
    win = 0.5 - 0.5 * np.cos(2 * np.pi * n / win_size)
    left = (fft_size - win_size) // 2
    out = np.zeros(fft_size)
    out[left:left + win_size] = win
    return out


def frame_signal(x, fft_size, hop):
    """Reflect-pad by ``fft_size // 2`` and cut ``1 + len // hop`` frames.

    Works on the last axis; returns ``[..., n_frames, fft_size]``.
    """
    x = np.asarray(x)
    pad = fft_size // 2
    if x.shape[-1] <= pad:
        raise ValueError(f"signal of length {x.shape[-1]} too short for fft_size {fft_size}")
    xp = np.pad(x, [(0, 0)] * (x.ndim - 1) + [(pad, pad)], mode="reflect")
    n_frames = 1 + x.shape[-1] // hop
    shape = xp.shape[:-1] + (n_frames, fft_size)
    strides = xp.strides[:-1] + (hop * xp.strides[-1], xp.strides[-1])
    return np.lib.stride_tricks.as_strided(xp, shape=shape, strides=strides, writeable=False)


def stft(w, cfg=MEL_STFT):
    """Complex STFT, shape ``[fft_size // 2 + 1, n_frames]``.

    Frames are centred (reflect padding of ``fft_size // 2``) and Hann
    windowed; ``n_frames = 1 + len // hop``.
    """
    x = _samples(w)
    if len(x) < cfg.win_size:
        raise ValueError(f"clip of {len(x)} samples is shorter than one window ({cfg.win_size})")
    frames = frame_signal(x, cfg.fft_size, cfg.hop) * hann_window(cfg.win_size, cfg.fft_size)
    return np.fft.rfft(frames, axis=-1).T


# --- mel --------------------------------------------------------------------

def hz_to_mel(f):
    """Slaney mel scale: linear below 1 kHz, logarithmic above."""
    f = np.asarray(f, dtype=np.float64)
    f_sp = 200.0 / 3
    min_log_hz = 1000.0
    min_log_mel = min_log_hz / f_sp
    logstep = np.log(6.4) / 27.0
    return np.where(f >= min_log_hz,
                    min_log_mel + np.log(np.maximum(f, 1e-10) / min_log_hz) / logstep,
                    f / f_sp)


def mel_to_hz(m):
    m = np.asarray(m, dtype=np.float64)
    f_sp = 200.0 / 3
    min_log_hz = 1000.0
    min_log_mel = min_log_hz / f_sp
    logstep = np.log(6.4) / 27.0
    return np.where(m >= min_log_mel, min_log_hz * np.exp(logstep * (m - min_log_mel)), m * f_sp)


def mel_filterbank(sample_rate=SAMPLE_RATE, fft_size=FFT_SIZE, n_mels=N_MELS,
                   fmin=FMIN, fmax=FMAX):
    """Triangular Slaney-normalised filterbank, shape ``[n_mels, fft_size // 2 + 1]``."""
    fft_freqs = np.linspace(0, sample_rate / 2, fft_size // 2 + 1)
    mel_points = np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2)
    edges = mel_to_hz(mel_points)
    widths = np.diff(edges)
    ramps = edges[:, None] - fft_freqs[None, :]
    lower = -ramps[:-2] / widths[:-1, None]
    upper = ramps[2:] / widths[1:, None]
    weights = np.maximum(0, np.minimum(lower, upper))
    weights *= (2.0 / (edges[2:] - edges[:-2]))[:, None]
    return weights


_FILTERBANK_CACHE = {}


def _cached_filterbank(sample_rate, fft_size, n_mels, fmin, fmax):
    key = (sample_rate, fft_size, n_mels, fmin, fmax)
    if key not in _FILTERBANK_CACHE:
        _FILTERBANK_CACHE[key] = mel_filterbank(*key)
    return _FILTERBANK_CACHE[key]


def log_mel(x, sample_rate=SAMPLE_RATE, n_mels=N_MELS, fft_size=FFT_SIZE,
            win_size=WIN_SIZE, hop=HOP, fmin=FMIN, fmax=FMAX):
    """Log-mel magnitudes for a 1-D signal as a plain ``[n_mels, n_frames]`` array."""
    mag = np.abs(stft(x, StftConfig(fft_size, win_size, hop)))
    fb = _cached_filterbank(sample_rate, fft_size, n_mels, fmin, fmax)
    return np.log(np.maximum(fb @ mag, MEL_FLOOR))


def mel_spectrogram(w, n_frames=None):
    """Log-mel spectrogram with the vocoder's fixed parameters.

    ``n_frames`` truncates to the first frames (the trainer keeps
    ``len // hop`` frames so mel and waveform lengths line up exactly).
    """
    rate = w.sample_rate if isinstance(w, Waveform) else SAMPLE_RATE
    if rate != SAMPLE_RATE:
        raise SampleRateError(f"mel features need {SAMPLE_RATE} Hz audio, got {rate} Hz")
    values = log_mel(_samples(w))
    if n_frames is not None:
        values = values[:, :n_frames]
    return MelSpectrogram(values)


# --- multi-rate ground truth ---------------------------------------------------

def avg_pool_halve(x):
    """Average pool (kernel 4, stride 2, zero padding 1) over the last axis.

    Zero padding is counted in the mean, matching
    :func:`vocgan.autodiff.functional.avg_pool1d` with the same arguments.
    """
    x = np.asarray(x)
    xp = np.pad(x, [(0, 0)] * (x.ndim - 1) + [(1, 1)])
    n_out = x.shape[-1] // 2
    acc = xp[..., 0:2 * n_out:2].copy()
    for k in range(1, 4):
        acc += xp[..., k:k + 2 * n_out:2]
    return acc / 4


def downsample_waveform(w, k):
    """Ground truth at ``1 / 2**k`` resolution: ``k`` average-pool halvings."""
    if k < 0:
        raise ValueError(f"downsampling level must be non-negative, got {k}")
    x = _samples(w) if isinstance(w, Waveform) else np.asarray(w)
    for _ in range(k):
        x = avg_pool_halve(x)
    if isinstance(w, Waveform):
        return Waveform(x, w.sample_rate // (2 ** k))
    return x


# --- F0 ---------------------------------------------------------------------------

def _cmnd(frames, max_lag):
    """Cumulative-mean-normalised difference for each frame, lags 0..max_lag."""
    n = frames.shape[-1]
    win = n - max_lag
    size = 1 << int(np.ceil(np.log2(n + win)))
    head = frames[:, :win]
    spec = np.fft.rfft(frames, size)
    corr = np.fft.irfft(spec * np.conj(np.fft.rfft(head, size)), size)[:, :max_lag + 1]
    sq = np.cumsum(np.pad(frames * frames, ((0, 0), (1, 0))), axis=1)
    energy_head = sq[:, win]
    energy_lag = sq[:, win:win + max_lag + 1] - sq[:, :max_lag + 1]
    diff = np.maximum(energy_head[:, None] + energy_lag - 2 * corr, 0.0)
    cum = np.cumsum(diff[:, 1:], axis=1)
    lags = np.arange(1, max_lag + 1)
    with np.errstate(invalid="ignore", divide="ignore"):
        norm = np.where(cum > 0, diff[:, 1:] * lags / cum, 1.0)
    return np.concatenate([np.ones((len(frames), 1)), norm], axis=1)


def estimate_f0(w, sample_rate=SAMPLE_RATE, frame=F0_FRAME, hop=F0_HOP, fmin=F0_FMIN,
                fmax=F0_FMAX, threshold=VOICING_THRESHOLD):
    """Frame-wise F0 by cumulative-normalised autocorrelation.

    Returns ``(times, f0)`` where ``f0`` is ``nan`` for unvoiced frames.  The
    period is the first lag in the search band whose normalised difference
    dips below ``threshold`` (refined to the local minimum and by parabolic
    interpolation); frames with no such dip or negligible energy are
    unvoiced.
    """
    x = _samples(w)
    if isinstance(w, Waveform):
        sample_rate = w.sample_rate
    pad = frame // 2
    xp = np.pad(x, (pad, pad))
    n_frames = 1 + len(x) // hop
    idx = np.arange(frame)[None, :] + hop * np.arange(n_frames)[:, None]
    frames = xp[idx]
    times = np.arange(n_frames) * hop / sample_rate

    min_lag = int(np.floor(sample_rate / fmax))
    max_lag = int(np.ceil(sample_rate / fmin))
    d = _cmnd(frames, max_lag)
    rms = np.sqrt(np.mean(frames * frames, axis=1))

    f0 = np.full(n_frames, np.nan)
    for i in range(n_frames):
        if rms[i] < SILENCE_RMS:
            continue
        row = d[i]
        below = np.flatnonzero(row[min_lag:max_lag] < threshold)
        if below.size == 0:
            continue
        tau = min_lag + below[0]
        while tau + 1 < max_lag and row[tau + 1] < row[tau]:
            tau += 1
        shift = 0.0
        if min_lag < tau < max_lag:
            a, b, c = row[tau - 1], row[tau], row[tau + 1]
            denom = a - 2 * b + c
            if denom > 0:
                shift = 0.5 * (a - c) / denom
        f0[i] = sample_rate / (tau + shift)
    return times, f0


# --- mel cache ------------------------------------------------------------------------

def save_mel(path, mel):
    """Write ``VOCM`` | u32 n_mels | u32 n_frames | f32 row-major values (little-endian)."""
    values = mel.values if isinstance(mel, MelSpectrogram) else np.asarray(mel)
    n_mels, n_frames = values.shape
    with open(path, "wb") as fh:
        fh.write(MEL_MAGIC)
        fh.write(struct.pack("<II", n_mels, n_frames))
        fh.write(np.ascontiguousarray(values, dtype="<f4").tobytes())


def load_mel(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MEL_MAGIC:
        raise AudioFormatError(f"{path}: not a VOCM mel cache")
    n_mels, n_frames = struct.unpack_from("<II", blob, 4)
    expected = 12 + 4 * n_mels * n_frames
    if len(blob) != expected:
        raise AudioFormatError(f"{path}: size {len(blob)} bytes, expected {expected}")
    values = np.frombuffer(blob, dtype="<f4", offset=12).reshape(n_mels, n_frames)
    return MelSpectrogram(values.astype(np.float32))


def mel_cepstrum(log_mel_frames, n_coeffs=13):
    """DCT-II (orthonormal) of log-mel frames, coefficients ``1..n_coeffs``."""
    c = dct(np.asarray(log_mel_frames), type=2, norm="ortho", axis=0)
    return c[1:n_coeffs + 1]
