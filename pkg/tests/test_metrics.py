import itertools
import math

import numpy as np
import pytest

from vocgan import dsp, metrics
from vocgan.corpus import synthetic_utterance
from vocgan.generator import GeneratorConfig, build_generator

SR = dsp.SAMPLE_RATE


def sine(f, seconds=1.0, amp=0.5):
    return amp * np.sin(2 * np.pi * f * np.arange(int(seconds * SR)) / SR)


@pytest.fixture(scope="module")
def speech():
    return synthetic_utterance(11, 1.0).samples


def _mcd_oracle(x, y):
    a, b = dsp.log_mel(x), dsp.log_mel(y)
    n = a.shape[0]
    total = 0.0
    for t in range(a.shape[1]):
        acc = 0.0
        for k in range(1, 14):
            scale = math.sqrt(2.0 / n)
            ca = sum(a[m, t] * math.cos(math.pi * k * (2 * m + 1) / (2 * n)) for m in range(n)) * scale
            cb = sum(b[m, t] * math.cos(math.pi * k * (2 * m + 1) / (2 * n)) for m in range(n)) * scale
            acc += (ca - cb) ** 2
        total += math.sqrt(acc)
    return 10 * math.sqrt(2) / math.log(10) * total / a.shape[1]


def test_mcd_identity(speech):
    assert metrics.mcd(speech, speech) == 0.0


def test_mcd_matches_explicit_dct(speech):
    rng = np.random.default_rng(0)
    y = speech + 0.02 * rng.standard_normal(speech.size)
    x, y = speech[:6000], y[:6000]
    assert metrics.mcd(x, y) == pytest.approx(_mcd_oracle(x, y), rel=1e-9)


@pytest.mark.parametrize("gain", [0.5, 0.8, 1.6])
def test_mcd_gain_invariant(speech, gain):
    assert metrics.mcd(speech, gain * speech) < 1e-3


def test_mcd_grows_with_distortion(speech):
    rng = np.random.default_rng(1)
    noise = rng.standard_normal(speech.size)
    small = metrics.mcd(speech, speech + 0.01 * noise)
    large = metrics.mcd(speech, speech + 0.1 * noise)
    assert 0 < small < large


def test_mcd_truncates_to_common_length(speech):
    y = 0.9 * speech + 0.01 * np.random.default_rng(2).standard_normal(speech.size)
    longer = np.concatenate([y, np.ones(100)])
    assert metrics.mcd(speech, longer) == metrics.mcd(speech, y)


def test_f0_rmse_identity_and_offset():
    x = sine(200)
    assert metrics.f0_rmse(x, x) == 0.0
    err = metrics.f0_rmse(x, sine(210))
    assert 8 < err < 12


def test_f0_rmse_undefined_without_common_voicing():
    assert math.isnan(metrics.f0_rmse(sine(200), np.zeros(SR)))


def test_sample_rate_mismatch():
    with pytest.raises(dsp.SampleRateError):
        metrics.mcd(dsp.Waveform(sine(200)), dsp.Waveform(sine(200), 16000))


def test_f0_trajectory_csv(tmp_path):
    x = np.concatenate([sine(220, 0.5), np.zeros(SR // 2)])
    n = metrics.dump_f0_trajectory(x, x, tmp_path / "f0.csv")
    lines = (tmp_path / "f0.csv").read_text().splitlines()
    assert lines[0] == "time,f0_ref,f0_syn" and len(lines) == n + 1
    assert lines[-1].endswith(",,")        # trailing silence: unvoiced
    t, ref, syn = metrics.read_f0_trajectory(tmp_path / "f0.csv")
    voiced = ~np.isnan(ref)
    assert voiced.any() and np.all(np.abs(ref[voiced] - 220) <= 2)
    np.testing.assert_array_equal(np.isnan(ref), np.isnan(syn))


def test_summarize_skips_undefined_f0():
    s = metrics.summarize([{"mcd_db": 1.0, "f0_rmse_hz": 2.0},
                           {"mcd_db": 3.0, "f0_rmse_hz": float("nan")}])
    assert s == {"mcd_db": 2.0, "f0_rmse_hz": 2.0, "n_utterances": 2}


# --- benchmark -------------------------------------------------------------------

@pytest.fixture(scope="module")
def G():
    return build_generator(GeneratorConfig.toy(), 0)


def test_rtf_definition():
    assert metrics.rtf_from_times(2.0, 0.5) == 4.0


def test_benchmark_report_fields(G):
    mels = [np.zeros((80, 20), np.float32)]
    ticks = itertools.count()
    report = metrics.benchmark_rtf(G, mels, threads=1, repeats=5, warmup=1,
                                   clock=lambda: float(next(ticks)))
    # fake clock: every timed run takes exactly one tick
    audio = 20 * 256 / SR
    assert report["rtf_runs"] == [audio] * 5
    assert report["rtf_median"] == audio and report["rtf_variance"] == 0.0
    assert report["threads"] == 1 and report["repeats"] == 5
    assert report["config_hash"] == G.cfg.config_hash()


def test_benchmark_real_clock(G):
    report = metrics.benchmark_rtf(G, [np.zeros((80, 10), np.float32)], threads=1, repeats=5)
    assert report["rtf_median"] > 0 and len(report["wall_seconds"]) == 5


def test_benchmark_needs_input(G):
    with pytest.raises(ValueError):
        metrics.benchmark_rtf(G, [], threads=1)
