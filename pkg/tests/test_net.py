import math

import numpy as np
import pytest
import torch

from uwstereo.net import (
    ConfigError, CrossViewEnhancement, FeatureExtractor, ModelConfig, ShapeError, StereoNet, build_cost_volume,
    groupwise_correlation, soft_argmin,
)
from uwstereo.net.cost import regress_init_disparity
from uwstereo.net.cve import linear_attention, sinusoidal_embedding_2d
from uwstereo.net.update import CostPyramid, lookup_cost
from uwstereo.train.losses import stereo_loss


def brute_soft_argmin(scores):
    b, k, h, w = scores.shape
    out = np.zeros((b, h, w))
    s = scores.double().numpy()
    for n in range(b):
        for y in range(h):
            for x in range(w):
                e = [math.exp(s[n, i, y, x] - s[n, :, y, x].max()) for i in range(k)]
                out[n, y, x] = sum(i * v for i, v in enumerate(e)) / sum(e)
    return out


def test_soft_argmin_brute_force():
    g = torch.Generator().manual_seed(0)
    scores = torch.randn(2, 12, 5, 6, generator=g) * 3
    np.testing.assert_allclose(soft_argmin(scores).double().numpy(), brute_soft_argmin(scores), atol=1e-5)


def test_regress_init_scales_and_upsamples():
    scores = torch.full((1, 8, 2, 3), -1e4)
    scores[:, 3] = 0
    d = regress_init_disparity(scores, 4)
    assert d.shape == (1, 8, 12)
    torch.testing.assert_close(d, torch.full_like(d, 12.0))


def test_groupwise_correlation_brute_force():
    g = torch.Generator().manual_seed(1)
    fl, fr = torch.randn(1, 8, 3, 10, generator=g), torch.randn(1, 8, 3, 10, generator=g)
    vol = groupwise_correlation(fl, fr, 4, 2)
    for k in range(4):
        for x in range(10):
            for grp in range(2):
                c = slice(4 * grp, 4 * grp + 4)
                want = (fl[0, c, :, x] * fr[0, c, :, x - k]).mean(0) if x >= k else torch.zeros(3)
                torch.testing.assert_close(vol[0, grp, k, :, x], want)


@pytest.mark.parametrize("shift", [0, 3, 7])
def test_cost_volume_recovers_shift(shift):
    g = torch.Generator().manual_seed(shift)
    fr = torch.randn(1, 64, 6, 40, generator=g)
    fl = torch.zeros_like(fr)
    fl[..., shift:] = fr[..., : 40 - shift]
    vol = build_cost_volume(fl, fr, 4 * 12)
    assert (vol.argmax(dim=1)[..., shift:] == shift).all()


def test_cost_volume_errors():
    f = torch.zeros(1, 4, 2, 8)
    with pytest.raises(ValueError, match="divisible by 4"):
        build_cost_volume(f, f, 30)
    with pytest.raises(ValueError, match="exceeds"):
        build_cost_volume(f, f, 64)


def test_lookup_cost_linear_interp():
    scores = torch.arange(10.0).view(1, 10, 1, 1).repeat(1, 1, 2, 2)
    disp = torch.tensor([[[2.25, 0.5], [8.75, 4.0]]])
    out = lookup_cost(scores, disp, 1)
    # scores equal the candidate index, so in-range interpolation returns the position itself
    want = torch.stack([disp - 1, disp, disp + 1], dim=1)
    want[0, 0, 0, 1] = 0.0  # -0.5: half weight on index -1 (reads 0), half on index 0
    want[0, 2, 1, 0] = 0.25 * 9.0  # 9.75: quarter weight on index 9, the rest past the end
    torch.testing.assert_close(out, want)


def test_cost_pyramid_levels():
    scores = torch.randn(1, 16, 3, 4)
    pyr = CostPyramid(scores, 2)
    assert pyr.volumes[1].shape == (1, 8, 3, 4)
    assert pyr(torch.zeros(1, 3, 4), 2).shape == (1, 10, 3, 4)


def test_linear_attention_matches_explicit():
    g = torch.Generator().manual_seed(2)
    q, k, v = (torch.randn(1, 5, 2, 4, generator=g) for _ in range(3))
    out = linear_attention(q, k, v)
    phi = lambda t: torch.nn.functional.elu(t) + 1  # noqa: E731
    for h in range(2):
        a = phi(q[0, :, h]) @ phi(k[0, :, h]).T
        want = (a / a.sum(1, keepdim=True)) @ v[0, :, h]
        torch.testing.assert_close(out[0, :, h], want, atol=1e-5, rtol=1e-5)


def test_sinusoidal_embedding_values():
    pe = sinusoidal_embedding_2d(8, 3, 5)
    assert pe.shape == (8, 3, 5)
    assert pe[0, 1, 2] == pytest.approx(math.sin(2.0))
    assert pe[4, 2, 0] == pytest.approx(math.sin(2.0))
    assert pe[1, 0, 3] == pytest.approx(math.sin(3 * math.exp(-math.log(1e4) / 2)))


@pytest.mark.parametrize("positional", ["sinusoidal", "learned"])
def test_cve_swap_equivariance(positional):
    torch.manual_seed(0)
    cve = CrossViewEnhancement(16, 2, 2, positional).eval()
    a, b = torch.randn(2, 16, 4, 6), torch.randn(2, 16, 4, 6)
    with torch.no_grad():
        la, lb = cve(a, b)
        rb, ra = cve(b, a)
    assert (la - ra).abs().max() < 1e-5
    assert (lb - rb).abs().max() < 1e-5


def test_cve_shape_mismatch():
    with pytest.raises(ValueError):
        CrossViewEnhancement(16, 1)(torch.zeros(1, 16, 2, 2), torch.zeros(1, 16, 2, 3))


def test_feature_shapes_and_padding_error():
    fe = FeatureExtractor(16)
    pyr = fe(torch.rand(1, 3, 32, 48))
    assert {s: tuple(f.shape) for s, f in pyr.items()} == {
        2: (1, 8, 16, 24), 4: (1, 16, 8, 12), 8: (1, 24, 4, 6), 16: (1, 32, 2, 3)}
    with pytest.raises(ShapeError, match="pad by 2 rows and 0 columns"):
        fe(torch.rand(1, 3, 30, 48))


def test_config_validation_and_roundtrip():
    with pytest.raises(ConfigError):
        ModelConfig(max_disparity=190)
    with pytest.raises(ConfigError):
        ModelConfig(positional_embedding="rotary")
    c = ModelConfig(base_channels=16, corr_groups=4)
    assert ModelConfig.from_dict(c.to_dict()) == c
    assert c.num_candidates == 48


def test_model_iterations_follow_mode(tiny_config):
    torch.manual_seed(0)
    net = StereoNet(tiny_config)
    x = torch.rand(1, 3, 32, 64)
    net.train()
    assert len(net(x, x).refinements) == tiny_config.train_iters
    net.eval()
    with torch.no_grad():
        est = net(x, x)
    assert len(est.refinements) == tiny_config.eval_iters
    assert est.final.shape == est.d_init.shape == (1, 32, 64)


def test_all_parameters_receive_gradient(tiny_config):
    torch.manual_seed(0)
    net = StereoNet(tiny_config)
    left, right = torch.rand(2, 3, 32, 64), torch.rand(2, 3, 32, 64)
    est = net(left, right, iters=2)
    stereo_loss(est.d_init, est.refinements, torch.rand(2, 32, 64) * 8).backward()
    missing = [n for n, p in net.named_parameters() if p.grad is None or not p.grad.abs().sum() > 0]
    assert missing == []


def test_model_input_errors(tiny_config):
    net = StereoNet(tiny_config)
    with pytest.raises(ValueError, match="differ"):
        net(torch.rand(1, 3, 32, 64), torch.rand(1, 3, 32, 48))
    with pytest.raises(ValueError, match="mode"):
        net(torch.rand(1, 3, 32, 64), torch.rand(1, 3, 32, 64), mode="other")


def test_regress_init_examples():
    d = regress_init_disparity(torch.zeros(1, 48, 2, 2))
    torch.testing.assert_close(d, torch.full_like(d, 94.0))
    onehot = torch.full((1, 48, 2, 2), -50.0)
    onehot[:, 5] = 50.0
    d = regress_init_disparity(onehot)
    assert (d - 20.0).abs().max() < 1e-4


def test_soft_argmin_bounds():
    g = torch.Generator().manual_seed(3)
    d = regress_init_disparity(torch.randn(3, 12, 4, 5, generator=g) * 100)
    assert d.min() >= 0 and d.max() <= 4 * 11 + 1e-4


def test_identical_features_argmax_zero():
    # equal per-pixel norms make zero shift the Cauchy-Schwarz maximum
    f = torch.nn.functional.normalize(torch.randn(1, 16, 6, 20), dim=1)
    vol = build_cost_volume(f, f, 48)
    assert vol.shape == (1, 12, 6, 20)
    assert (vol.argmax(dim=1) == 0).all()


def test_cost_volume_width_limit():
    f = torch.randn(1, 8, 4, 10)
    build_cost_volume(f, f, 40)
    with pytest.raises(ValueError, match="exceeds"):
        build_cost_volume(f, f, 44)


def test_feature_extractor_examples():
    fe = FeatureExtractor(16).eval()
    with torch.no_grad():
        assert fe(torch.rand(1, 3, 128, 256))[4].shape[-2:] == (32, 64)
        x = torch.rand(1, 3, 96, 96)
        a, b = fe(x), fe(x.clone())
    assert all(torch.equal(a[s], b[s]) for s in (2, 4, 8, 16))
    with pytest.raises(ShapeError):
        fe(torch.rand(1, 3, 100, 100))


def test_cve_gradient_finite_difference():
    torch.manual_seed(0)
    cve = CrossViewEnhancement(8, 1, 2).double().eval()
    a = torch.randn(1, 8, 3, 4, dtype=torch.float64, requires_grad=True)
    b = torch.randn(1, 8, 3, 4, dtype=torch.float64, requires_grad=True)
    w = torch.randn(1, 8, 3, 4, dtype=torch.float64)

    def readout(x, y):
        out_l, out_r = cve(x, y)
        return (out_l * w).sum() + (out_r * w.flip(-1)).sum()

    readout(a, b).backward()
    h = 1e-3
    for inp, grad, other_first in ((a, a.grad, False), (b, b.grad, True)):
        for idx in [(0, 0, 0, 0), (0, 3, 1, 2), (0, 7, 2, 3)]:
            plus, minus = inp.detach().clone(), inp.detach().clone()
            plus[idx] += h
            minus[idx] -= h
            with torch.no_grad():
                if other_first:
                    fd = (readout(a.detach(), plus) - readout(a.detach(), minus)) / (2 * h)
                else:
                    fd = (readout(plus, b.detach()) - readout(minus, b.detach())) / (2 * h)
            assert grad[idx] != 0
            assert abs(fd - grad[idx]) / abs(grad[idx]) < 1e-2


def test_refinement_lengths_and_finite(tiny_config):
    torch.manual_seed(0)
    net = StereoNet(tiny_config).eval()
    x, y = torch.rand(1, 3, 32, 64), torch.rand(1, 3, 32, 64)
    with torch.no_grad():
        for iters in (1, 22, 32):
            est = net(x, y, iters=iters)
            assert len(est.refinements) == iters
            assert all(torch.isfinite(r).all() for r in est.refinements)
        back = net(x, y, mode="pretrain-backbone")
    assert not hasattr(back, "refinements")
    assert back.cost_feature.shape[-2:] == (8, 16)


def test_identical_pairs_train_to_zero_disparity(tiny_config):
    torch.manual_seed(0)
    net = StereoNet(tiny_config)
    opt = torch.optim.Adam(net.parameters(), lr=1e-3)
    g = torch.Generator().manual_seed(1)
    for _ in range(30):
        img = torch.rand(2, 3, 32, 64, generator=g)
        est = net(img, img, iters=2)
        loss = stereo_loss(est.d_init, est.refinements, torch.zeros(2, 32, 64))
        opt.zero_grad()
        loss.backward()
        opt.step()
    net.eval()
    with torch.no_grad():
        img = torch.rand(2, 3, 32, 64, generator=g)
        assert net(img, img).d_init.abs().mean() < 1.0


def test_sinusoidal_offset_is_a_shifted_window():
    big = sinusoidal_embedding_2d(16, 7, 9)
    torch.testing.assert_close(sinusoidal_embedding_2d(16, 4, 5, offset=(2, 3)), big[:, 2:6, 3:8])


def test_position_jitter_only_in_training():
    torch.manual_seed(0)
    cve = CrossViewEnhancement(16, 1, 2, offset_range=50)
    a, b = torch.randn(1, 16, 4, 6), torch.randn(1, 16, 4, 6)
    cve.eval()
    with torch.no_grad():
        assert torch.equal(cve(a, b)[0], cve(a, b)[0])
        ref = cve(a, b)[0]
    cve.train()
    torch.manual_seed(1)
    with torch.no_grad():
        la, lb = cve(a, b)
    assert not torch.allclose(la, ref)
    # the same draw is shared by both views, so swapping stays equivariant
    torch.manual_seed(1)
    with torch.no_grad():
        rb, ra = cve(b, a)
    assert (la - ra).abs().max() < 1e-5 and (lb - rb).abs().max() < 1e-5
