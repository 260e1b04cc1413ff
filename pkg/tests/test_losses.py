import numpy as np
import pytest

import loss_oracles as oracle
from vocgan.autodiff import Tensor
from vocgan.discriminator import DiscriminatorOutput
from vocgan.losses import (
    STFT_CONFIGS,
    LossReport,
    LossWeights,
    feature_matching_loss,
    jcu_d_loss,
    jcu_g_loss,
    jcu_v_k,
    lsgan_d_loss,
    lsgan_g_loss,
    lsgan_v_k,
    multires_stft_loss,
    stft_magnitude,
    total_g_loss,
)
from vocgan.dsp import stft

INSTANCES = range(oracle.N_INSTANCES)


def val(t):
    return float(t.data) if isinstance(t, Tensor) else float(t)


def t64(a):
    return Tensor(a, dtype=np.float64)


# --- oracle agreement ----------------------------------------------------------

@pytest.mark.parametrize("seed", INSTANCES)
def test_adversarial_losses_match_oracle(seed):
    rng = np.random.default_rng(seed)
    fake, real = oracle.paired_outputs(rng)
    f, r = fake[1][0], real[1][0]
    assert abs(val(lsgan_v_k(f.uncond, r.uncond)) - oracle.v_k(f.uncond, r.uncond)) < oracle.TOL
    assert abs(val(lsgan_d_loss(fake, real)[0]) - oracle.d_loss(fake, real)) < oracle.TOL
    assert abs(val(lsgan_g_loss(fake)) - oracle.g_loss(fake)) < oracle.TOL
    assert abs(val(jcu_v_k(f.uncond, f.cond, r.uncond, r.cond))
               - oracle.jcu_v(f.uncond, f.cond, r.uncond, r.cond)) < oracle.TOL
    assert abs(val(jcu_d_loss(fake, real)[0]) - oracle.jcu_d(fake, real)) < oracle.TOL
    assert abs(val(jcu_g_loss(fake)) - oracle.jcu_g(fake)) < oracle.TOL
    assert abs(val(feature_matching_loss(real, fake)) - oracle.feature_matching(real, fake)) < oracle.TOL


@pytest.mark.parametrize("seed", INSTANCES)
def test_stft_loss_matches_oracle(seed):
    rng = np.random.default_rng(1000 + seed)
    n = int(rng.integers(1300, 2600))
    x = rng.standard_normal((1, n)) * rng.uniform(0.05, 1)
    x_hat = x + rng.uniform(0.01, 1) * rng.standard_normal((1, n))
    assert abs(val(multires_stft_loss(x, t64(x_hat))) - oracle.stft_loss(x, x_hat)) < oracle.TOL


# --- trivial identities -------------------------------------------------------------

def _const_outputs(template, value):
    return [[DiscriminatorOutput(t64(np.full(o.uncond.shape, value)),
                                 None if o.cond is None else t64(np.full(o.cond.shape, value)),
                                 o.features) for o in subs] for subs in template]


def test_perfect_scores_give_zero():
    tmpl = oracle.random_outputs(np.random.default_rng(0))
    fake0, real1, fake1 = _const_outputs(tmpl, 0.0), _const_outputs(tmpl, 1.0), _const_outputs(tmpl, 1.0)
    assert val(lsgan_d_loss(fake0, real1)[0]) == 0.0
    assert val(jcu_d_loss(fake0, real1)[0]) == 0.0
    assert val(lsgan_g_loss(fake1)) == 0.0
    assert val(jcu_g_loss(fake1)) == 0.0


def test_v_k_hand_values():
    ones, zeros = np.ones((2, 1, 5)), np.zeros((2, 1, 5))
    assert val(lsgan_v_k(t64(zeros), t64(ones))) == 0.0
    assert val(lsgan_v_k(t64(ones), t64(zeros))) == 1.0


def test_jcu_degenerate_doubles_lsgan():
    rng = np.random.default_rng(2)
    f, r = t64(rng.standard_normal((2, 1, 7))), t64(rng.standard_normal((2, 1, 7)))
    assert np.isclose(val(jcu_v_k(f, f, r, r)), 2 * val(lsgan_v_k(f, r)), rtol=1e-15)


def test_d_loss_structure_counts_subdiscriminators():
    tmpl = oracle.random_outputs(np.random.default_rng(3))
    # fake all 1, real all 0: every (sub-)discriminator contributes exactly 1
    total, per_k = lsgan_d_loss(_const_outputs(tmpl, 1.0), _const_outputs(tmpl, 0.0))
    assert [val(v) for v in per_k] == [3.0, 1.0, 1.0, 1.0, 1.0]
    assert val(total) == 7.0


def test_jcu_g_loss_all_zero_fakes():
    tmpl = oracle.random_outputs(np.random.default_rng(4))
    # 7 discriminator instances x 2 heads x 1/2
    assert val(jcu_g_loss(_const_outputs(tmpl, 0.0))) == 7.0


def test_feature_matching_identities():
    rng = np.random.default_rng(5)
    real = oracle.random_outputs(rng)
    assert val(feature_matching_loss(real, real)) == 0.0
    shifted = [[DiscriminatorOutput(o.uncond, o.cond, [t64(f.data + 1.0) for f in o.features])
                for o in subs] for subs in real]
    # each of the 7 x 4 layers contributes exactly 1
    assert np.isclose(val(feature_matching_loss(real, shifted)), 28.0, rtol=1e-14)


def test_feature_matching_shape_mismatch():
    rng = np.random.default_rng(6)
    a, b = oracle.random_outputs(rng), oracle.random_outputs(rng)
    with pytest.raises(ValueError):
        feature_matching_loss(a, b)


def test_stft_loss_of_identical_signals_is_zero():
    x = np.random.default_rng(7).standard_normal((2, 4000))
    assert val(multires_stft_loss(x, t64(x))) == 0.0


def test_stft_loss_half_amplitude():
    # SC = 1/2 and log-magnitude L1 = ln 2 at every resolution (no bin hits the floor)
    x = np.random.default_rng(8).standard_normal((1, 6000))
    assert np.isclose(val(multires_stft_loss(x, t64(0.5 * x))), 0.5 + np.log(2), rtol=1e-9)


def test_stft_loss_truncates_to_common_length():
    x = np.random.default_rng(9).standard_normal(5000)
    a = val(multires_stft_loss(x, t64(x[:4500] * 0.7)))
    b = val(multires_stft_loss(x[:4500], t64(x[:4500] * 0.7)))
    assert a == b


def test_stft_configs_are_exact():
    assert [(c.fft_size, c.win_size, c.hop) for c in STFT_CONFIGS] == [
        (512, 240, 50), (1024, 600, 120), (2048, 1200, 240)]


def test_differentiable_magnitude_matches_dsp_stft():
    x = np.random.default_rng(10).standard_normal(3000)
    for cfg in STFT_CONFIGS:
        mag = stft_magnitude(t64(x[None]), cfg).data[0]
        np.testing.assert_allclose(mag, np.maximum(np.abs(stft(x, cfg)).T, 1e-7), rtol=1e-10, atol=1e-12)


def test_total_is_weighted_sum():
    w = LossWeights()
    assert (w.alpha, w.beta) == (10.0, 1.0)
    adv, fm, st = t64(0.3), t64(0.05), t64(1.7)
    assert val(total_g_loss(adv, fm, st)) == 0.3 + 10 * 0.05 + 1.7
    assert val(total_g_loss(adv, fm, None)) == 0.3 + 10 * 0.05


def test_negative_weights_rejected():
    with pytest.raises(ValueError):
        LossWeights(alpha=-1)


def test_loss_report_recomputes_total():
    r = LossReport(step=3, terms={"L_G_jcu": 0.25, "L_FM": 0.125, "L_STFT": 2.0,
                                  "L_G_total": 0.25 + 10 * 0.125 + 2.0})
    assert r.recomputed_total() == r["L_G_total"]
    assert r.csv_header() == ["step", "L_G_jcu", "L_FM", "L_STFT", "L_G_total"]
    r.terms["L_FM"] = float("nan")
    with pytest.raises(FloatingPointError, match="L_FM"):
        r.check_finite()
