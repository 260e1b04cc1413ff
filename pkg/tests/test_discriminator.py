import numpy as np
import pytest

from vocgan import dsp
from vocgan.autodiff import Tensor, default_dtype
from vocgan.autodiff import functional as F
from vocgan.discriminator import (
    DiscriminatorConfig,
    build_discriminators,
    conditioning_layer,
    discriminate,
    expected_length,
)


@pytest.fixture(scope="module")
def discs():
    return build_discriminators(DiscriminatorConfig.toy(), seed=0)


def waves(n_frames, seed=0):
    rng = np.random.default_rng(seed)
    x = 0.5 * rng.standard_normal((1, 256 * n_frames))
    return [dsp.downsample_waveform(x, k)[:, None, :].astype(np.float32) for k in range(5)]


def mel(n_frames, seed=1):
    return Tensor(np.random.default_rng(seed).standard_normal((1, 80, n_frames)))


def test_five_discriminators_and_d0_has_three_subs(discs):
    assert len(discs) == 5
    assert [len(d.subs) for d in discs] == [3, 1, 1, 1, 1]


def test_total_stride_is_64():
    assert DiscriminatorConfig().total_stride == 64
    D = build_discriminators(DiscriminatorConfig.toy(), 0)[0]
    assert D.subs[0].trunk.layer_rates() == [1, 4, 16, 64]


def test_same_seed_same_init():
    a = build_discriminators(DiscriminatorConfig.toy(), 3)
    b = build_discriminators(DiscriminatorConfig.toy(), 3)
    for da, db in zip(a, b):
        for (na, pa), (nb, pb) in zip(da.named_parameters(), db.named_parameters()):
            assert na == nb and np.array_equal(pa.data, pb.data)


def test_parameters_namespaced_per_scale(discs):
    for k, D in enumerate(discs):
        assert all(p.name.startswith(f"disc.{k}.") for p in D.parameters())


@pytest.mark.parametrize("n_frames", [1, 10, 86, 200])
def test_all_scales_accept_their_inputs(discs, n_frames):
    s = mel(n_frames)
    for k, (D, x) in enumerate(zip(discs, waves(n_frames))):
        assert x.shape[-1] == expected_length(n_frames, k)
        for j, out in enumerate(discriminate(D, Tensor(x), s)):
            sub = D.subs[j]
            lengths = sub.trunk.output_lengths(x.shape[-1] if j == 0 else out.features[0].shape[-1])
            assert out.uncond.shape[-1] == lengths[-1]
            assert len(out.features) == 4 and all(n > 0 for n in out.feature_sizes)
            assert np.all(np.isfinite(out.uncond.data)) and np.all(np.isfinite(out.cond.data))


def test_score_length_formula():
    D = build_discriminators(DiscriminatorConfig.toy(), 0)[1]
    for length in (160, 1280, 11008):
        out = D.subs[0](Tensor(np.zeros((1, 1, length))), mel(length // 128))
        expected = length
        for _ in range(3):
            expected = F.conv1d_output_length(expected, 41, 4, 20)
        assert out.uncond.shape == (1, 1, expected)


def test_wrong_length_rejected(discs):
    with pytest.raises(F.ShapeError, match="length"):
        discriminate(discs[2], Tensor(np.zeros((1, 1, 100))), mel(10))


def test_uncond_scores_ignore_mel(discs):
    x = Tensor(waves(10)[0])
    a = discriminate(discs[0], x, mel(10, seed=1))
    b = discriminate(discs[0], x, mel(10, seed=2))
    for oa, ob in zip(a, b):
        np.testing.assert_array_equal(oa.uncond.data, ob.uncond.data)
        assert not np.array_equal(oa.cond.data, ob.cond.data)


def test_heads_share_trunk_parameters(discs):
    sub = discs[1].subs[0]
    trunk_ids = {id(p) for p in sub.trunk.parameters()}
    all_ids = [id(p) for p in sub.parameters()]
    assert len(all_ids) == len(set(all_ids))
    # both heads read the same trunk: gradients of each head reach every trunk parameter
    x = Tensor(waves(10)[1])
    for head in ("uncond", "cond"):
        sub.zero_grad()
        out = sub(x, mel(10))
        F.sum(getattr(out, head)).backward()
        grads = [p for p in sub.trunk.parameters() if id(p) in trunk_ids and p.grad is not None]
        assert len(grads) >= (len(sub.trunk.parameters()) if head == "uncond" else 1)


def test_d0_sub_inputs_use_dsp_pooling():
    D = build_discriminators(DiscriminatorConfig.toy(), 0)[0]
    x = waves(10)[0]
    outs = discriminate(D, Tensor(x), mel(10))
    with default_dtype(np.float32):
        pooled = D.subs[1](Tensor(dsp.downsample_waveform(x[:, 0], 1)[:, None, :]), mel(10))
    np.testing.assert_allclose(outs[1].uncond.data, pooled.uncond.data, rtol=1e-5, atol=1e-7)


def test_window_locality():
    # perturbing samples outside a score window's receptive field leaves it unchanged
    D = build_discriminators(DiscriminatorConfig.toy(), 0)[1]
    sub = D.subs[0]
    x = np.random.default_rng(0).standard_normal((1, 1, 4096))
    base = sub(Tensor(x), None if not sub.conditional else mel(32)).uncond.data
    y = x.copy()
    y[..., -200:] += 1.0
    moved = sub(Tensor(y), mel(32)).uncond.data
    changed = np.flatnonzero(np.any(base != moved, axis=(0, 1)))
    # receptive field: 7 + 3 * 20 * (1 + 4 + 16) samples each side at most
    first_reachable = (4096 - 200 - 7 - 20 * (1 + 4 + 16)) // 64
    assert changed.size and changed.min() >= first_reachable - 1
    assert np.array_equal(base[..., :first_reachable - 1], moved[..., :first_reachable - 1])


def test_conditioning_layer_picks_closest_rate():
    rates = [1, 4, 16, 64]
    assert conditioning_layer(rates, 1) == 3     # 64 vs 256: 2 octaves, closest
    assert conditioning_layer(rates, 2) == 3     # 128
    assert conditioning_layer(rates, 4) == 3     # 256 exactly
    assert conditioning_layer(rates, 16) == 2    # 16 * 16 = 256
    assert conditioning_layer(rates, 32) == 2    # 128 and 512 tie; deeper wins


def test_unconditional_variant_has_no_cond_head():
    discs = build_discriminators(DiscriminatorConfig.toy(conditional=False), 0)
    out = discriminate(discs[0], Tensor(waves(4)[0]), mel(4))
    assert out[0].cond is None
    names = [n.split(".") for n, _ in discs[0].named_parameters()]
    assert not any("cond_head" in parts or "mel_proj" in parts for parts in names)


def test_non_hierarchical_builds_only_d0():
    discs = build_discriminators(DiscriminatorConfig.toy(hierarchical=False), 0)
    assert len(discs) == 1 and len(discs[0].subs) == 3


def test_invalid_config():
    with pytest.raises(ValueError):
        DiscriminatorConfig(channels=(16, 30, 64, 128))
