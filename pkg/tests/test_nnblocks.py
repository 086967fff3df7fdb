import numpy as np
import pytest

from foodcal.errors import ShapeMismatch
from foodcal.nnblocks import blocks, flops, ops, serialize
from foodcal.nnblocks.gradcheck import BLOCK_NAMES, gradcheck


def loop_conv_oracle(x, p):
    """Direct six-loop cross-correlation."""
    n, c_in, h, w = x.shape
    kh, kw = p.kernel
    oh = (h + 2 * p.padding - kh) // p.stride + 1
    ow = (w + 2 * p.padding - kw) // p.stride + 1
    xp = np.pad(x, ((0, 0), (0, 0), (p.padding, p.padding), (p.padding, p.padding)))
    out = np.zeros((n, p.c_out, oh, ow))
    for b in range(n):
        for o in range(p.c_out):
            for oy in range(oh):
                for ox in range(ow):
                    acc = p.bias[o]
                    for i in range(c_in):
                        for ky in range(kh):
                            for kx in range(kw):
                                acc += xp[b, i, oy * p.stride + ky, ox * p.stride + kx] * p.weight[o, i, ky, kx]
                    out[b, o, oy, ox] = acc
    return out


def sigmoid(v):
    return 1.0 / (1.0 + np.exp(-v))


# ---------------------------------------------------------------------------
# conv2d


def test_identity_1x1_kernel():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(2, 3, 4, 5))
    w = np.zeros((3, 3, 1, 1))
    for c in range(3):
        w[c, c, 0, 0] = 1.0
    p = ops.ConvParams(w, np.zeros(3))
    assert np.allclose(ops.conv2d(x, p), x, atol=1e-15)


def test_zero_input_gives_bias_broadcast():
    rng = np.random.default_rng(1)
    p = ops.ConvParams.init(4, 2, 3, rng, padding=1)
    y = ops.conv2d(np.zeros((1, 2, 5, 5)), p)
    assert np.allclose(y, p.bias[None, :, None, None], atol=1e-15)


def test_conv_matches_loop_oracle():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(1, 3, 5, 5))
    p = ops.ConvParams.init(4, 3, 3, rng, padding=1)
    assert np.abs(ops.conv2d(x, p) - loop_conv_oracle(x, p)).max() < 1e-12


@pytest.mark.parametrize("stride,padding,kernel", [(1, 0, (3, 3)), (2, 1, (3, 2)), (3, 2, (5, 1))])
def test_conv_matches_loop_oracle_configs(stride, padding, kernel):
    rng = np.random.default_rng(3)
    x = rng.normal(size=(2, 2, 7, 8))
    p = ops.ConvParams.init(3, 2, kernel, rng, stride=stride, padding=padding)
    assert np.abs(ops.conv2d(x, p) - loop_conv_oracle(x, p)).max() < 1e-12


def test_conv_channel_mismatch_raises():
    rng = np.random.default_rng(4)
    p = ops.ConvParams.init(2, 3, 3, rng)
    with pytest.raises(ShapeMismatch):
        ops.conv2d(np.zeros((1, 5, 6, 6)), p)


def test_conv_empty_output_raises():
    rng = np.random.default_rng(5)
    p = ops.ConvParams.init(2, 1, 7, rng)
    with pytest.raises(ShapeMismatch):
        ops.conv2d(np.zeros((1, 1, 3, 3)), p)


# ---------------------------------------------------------------------------
# coordconv


def test_coord_channel_values_3x3():
    coords = ops.coord_channels(1, 3, 3)
    assert coords[0, 0].tolist() == [[-1, 0, 1]] * 3  # x channel
    assert coords[0, 1, :, 0].tolist() == [-1, 0, 1]  # y channel


def test_coord_channel_degenerate_width():
    coords = ops.coord_channels(1, 4, 1)
    assert np.all(coords[0, 0] == 0.0)


def test_coordconv_zero_weights_constant_output():
    p = ops.ConvParams(np.zeros((2, 5, 1, 1)), np.array([3.5, -1.0]))
    y = ops.coordconv(np.random.default_rng(6).normal(size=(1, 3, 4, 4)), p)
    assert np.allclose(y[0, 0], 3.5) and np.allclose(y[0, 1], -1.0)


def test_coordconv_channel_contract():
    rng = np.random.default_rng(7)
    p = ops.ConvParams.init(2, 4, 1, rng)  # expects c_in = 4 => x must have 2
    with pytest.raises(ShapeMismatch):
        ops.coordconv(np.zeros((1, 4, 3, 3)), p)


def test_coordconv_equals_conv_on_augmented_input():
    rng = np.random.default_rng(8)
    x = rng.normal(size=(2, 3, 5, 6))
    p = ops.ConvParams.init(4, 5, 3, rng, padding=1)
    aug = np.concatenate([x, ops.coord_channels(2, 5, 6)], axis=1)
    assert np.array_equal(ops.coordconv(x, p), ops.conv2d(aug, p))


# ---------------------------------------------------------------------------
# CBAM


def test_channel_gates_half_with_zero_params():
    p = blocks.CbamParams.zeros(6)
    g = blocks.cbam_channel_attention(np.random.default_rng(9).normal(size=(2, 6, 4, 4)), p)
    assert np.all(g == 0.5)


def test_channel_gate_identity_mlp_all_ones():
    p = blocks.CbamParams.zeros(1, reduction=1)
    p.w1[0, 0] = 1.0
    p.w2[0, 0] = 1.0
    g = blocks.cbam_channel_attention(np.ones((1, 1, 3, 3)), p)
    assert g[0, 0] == pytest.approx(sigmoid(2.0), abs=1e-9)
    assert g[0, 0] == pytest.approx(0.880797, abs=1e-6)


def test_channel_gate_ordering_preserved_under_positive_scaling():
    rng = np.random.default_rng(10)
    p = blocks.CbamParams.zeros(4, reduction=2)
    p.w1[:] = rng.uniform(0.1, 1.0, p.w1.shape)
    p.w2[:] = rng.uniform(0.1, 1.0, p.w2.shape)
    x = rng.uniform(0.1, 1.0, size=(1, 4, 5, 5))
    g1 = blocks.cbam_channel_attention(x, p)
    g2 = blocks.cbam_channel_attention(2.5 * x, p)
    assert np.array_equal(np.argsort(g1[0]), np.argsort(g2[0]))


def test_spatial_gates_half_with_zero_params():
    p = blocks.CbamParams.zeros(3)
    g = blocks.cbam_spatial_attention(np.random.default_rng(11).normal(size=(1, 3, 8, 8)), p)
    assert np.all(g == 0.5)


def test_spatial_gate_constant_input_interior():
    rng = np.random.default_rng(12)
    p = blocks.CbamParams.init(3, rng=rng)
    g = blocks.cbam_spatial_attention(np.full((1, 3, 12, 12), 0.7), p)
    interior = g[0, 0, 3:-3, 3:-3]
    assert np.allclose(interior, interior[0, 0], atol=1e-12)


def test_spatial_gate_matches_direct_oracle():
    rng = np.random.default_rng(13)
    x = rng.normal(size=(1, 4, 6, 6))
    p = blocks.CbamParams.init(4, rng=rng)
    mean_map = x.mean(axis=1, keepdims=True)
    max_map = x.max(axis=1, keepdims=True)
    cat = np.concatenate([mean_map, max_map], axis=1)
    expected = sigmoid(loop_conv_oracle(cat, p.spatial))
    assert np.abs(blocks.cbam_spatial_attention(x, p) - expected).max() < 1e-12


def test_cbam_zero_input_zero_output():
    rng = np.random.default_rng(14)
    p = blocks.CbamParams.init(3, rng=rng)
    assert np.all(blocks.cbam(np.zeros((1, 3, 5, 5)), p) == 0.0)


def test_cbam_zero_params_quarter_scale():
    rng = np.random.default_rng(15)
    x = rng.normal(size=(2, 5, 6, 6))
    p = blocks.CbamParams.zeros(5)
    assert np.array_equal(blocks.cbam(x, p), 0.25 * x)


def test_cbam_preserves_shape():
    rng = np.random.default_rng(16)
    for _ in range(5):
        n, c = int(rng.integers(1, 3)), int(rng.integers(1, 7))
        h, w = int(rng.integers(1, 9)), int(rng.integers(1, 9))
        x = rng.normal(size=(n, c, h, w))
        p = blocks.CbamParams.init(c, rng=rng)
        assert blocks.cbam(x, p).shape == x.shape


def test_gates_strictly_inside_unit_interval():
    # strict in exact arithmetic; in float64 the sigmoid rounds to 0/1 once
    # |logit| exceeds ~37, so keep inputs below the saturation scale
    rng = np.random.default_rng(17)
    for _ in range(5):
        c = int(rng.integers(1, 6))
        x = rng.normal(0, 3, size=(1, c, 4, 4))
        p = blocks.CbamParams.init(c, rng=rng)
        gch = blocks.cbam_channel_attention(x, p)
        gsp = blocks.cbam_spatial_attention(x, p)
        for g in (gch, gsp):
            assert np.all(g > 0.0) and np.all(g < 1.0)


# ---------------------------------------------------------------------------
# C2f_CD


def c2f_cd_straightline_oracle(x, p):
    """The documented wiring, written inline with primitive calls only."""

    def conv(v, q):
        return loop_conv_oracle(v, q)

    def silu(v):
        return v * sigmoid(v)

    n, _, h, w = x.shape
    aug = np.concatenate([x, ops.coord_channels(n, h, w)], axis=1)
    h0 = silu(conv(aug, p.entry))
    ch = p.entry.c_out // 2
    parts = [h0[:, :ch], h0[:, ch:]]
    cur = parts[1]
    for p1, p2 in p.bottlenecks:
        cur = silu(conv(silu(conv(cur, p1)), p2)) + cur
        parts.append(cur)
    cat = np.concatenate(parts, axis=1)
    avg = cat.mean(axis=(2, 3))
    mx = cat.reshape(n, cat.shape[1], -1).max(axis=2)
    mlp = lambda v: np.maximum(v @ p.cbam.w1.T + p.cbam.b1, 0.0) @ p.cbam.w2.T + p.cbam.b2
    gch = sigmoid(mlp(avg) + mlp(mx))
    x1 = cat * gch[:, :, None, None]
    smaps = np.concatenate([x1.mean(axis=1, keepdims=True), x1.max(axis=1, keepdims=True)], axis=1)
    gsp = sigmoid(conv(smaps, p.cbam.spatial))
    att = x1 * gsp
    return silu(conv(att, p.exit))


def test_c2f_cd_output_shape():
    rng = np.random.default_rng(18)
    p = blocks.C2fCdParams.init(64, 64, n=1, rng=rng)
    y = blocks.c2f_cd(rng.normal(size=(1, 64, 8, 8)), p)
    assert y.shape == (1, 64, 8, 8)


def test_c2f_cd_zero_params_zero_output():
    p = blocks.C2fCdParams.zeros(6, 8, n=1)
    y = blocks.c2f_cd(np.zeros((1, 6, 5, 5)), p)
    assert np.all(y == 0.0)


def test_c2f_cd_matches_straightline_oracle():
    rng = np.random.default_rng(19)
    p = blocks.C2fCdParams.init(6, 8, n=2, reduction=4, rng=rng)
    x = rng.normal(size=(2, 6, 5, 6))
    assert np.abs(blocks.c2f_cd(x, p) - c2f_cd_straightline_oracle(x, p)).max() < 1e-12


def test_c2f_cd_preserves_spatial_dims():
    rng = np.random.default_rng(20)
    for _ in range(4):
        h, w = int(rng.integers(2, 10)), int(rng.integers(2, 10))
        p = blocks.C2fCdParams.init(4, 6, n=1, reduction=3, rng=rng)
        y = blocks.c2f_cd(rng.normal(size=(1, 4, h, w)), p)
        assert y.shape == (1, 6, h, w)


def test_c2f_cd_rejects_odd_output_channels():
    rng = np.random.default_rng(21)
    with pytest.raises(ShapeMismatch):
        blocks.C2fCdParams.init(4, 5, rng=rng)


# ---------------------------------------------------------------------------
# gradcheck


@pytest.mark.parametrize("block", BLOCK_NAMES)
def test_gradcheck_below_threshold(block):
    for seed in (0, 1):
        assert gradcheck(block, seed=seed) < 1e-4


def test_relu_gradient_exact_in_linear_region():
    # all-positive pre-activations: the MLP is locally linear, so analytic
    # and finite-difference gradients agree to FD precision
    p = blocks.CbamParams.zeros(2, reduction=1)
    p.w1[:] = np.abs(np.random.default_rng(22).normal(size=p.w1.shape)) + 0.5
    p.w2[:] = np.abs(np.random.default_rng(23).normal(size=p.w2.shape)) + 0.5
    x = np.abs(np.random.default_rng(24).normal(size=(1, 2, 4, 4))) + 1.0
    g, cache = blocks.cbam_channel_attention_fwd(x, p)
    gx, _ = blocks._channel_attention_bwd(cache, p, np.ones_like(g))
    step = 1e-6
    i = (0, 0, 1, 2)
    xp = x.copy()
    xp[i] += step
    xm = x.copy()
    xm[i] -= step
    fd = (blocks.cbam_channel_attention(xp, p).sum() - blocks.cbam_channel_attention(xm, p).sum()) / (
        2 * step
    )
    assert gx[i] == pytest.approx(fd, rel=1e-6)


# ---------------------------------------------------------------------------
# flops


def test_conv_flops_hand_value():
    assert flops.conv_flops(16, 32, 3, 3, 8, 8) == 589_824


def test_coordconv_increment():
    base = flops.conv_flops(16, 32, 3, 3, 8, 8)
    assert flops.coordconv_flops(16, 32, 3, 3, 8, 8) - base == 2 * 3 * 3 * 32 * 8 * 8 * 2


def test_c2f_cd_costs_more_than_c2f_everywhere():
    rng = np.random.default_rng(25)
    for _ in range(20):
        cfg = flops.C2fConfig(
            c_in=int(rng.integers(1, 65)),
            c_out=2 * int(rng.integers(1, 33)),
            h=int(rng.integers(1, 41)),
            w=int(rng.integers(1, 41)),
            n=int(rng.integers(1, 4)),
            reduction=int(rng.integers(1, 17)),
        )
        assert flops.c2f_cd_flops(cfg) > flops.c2f_flops(cfg)


def test_flops_difference_decomposes():
    cfg = flops.C2fConfig(c_in=16, c_out=32, h=20, w=24, n=2, reduction=8)
    coord_increment = flops.coordconv_flops(16, 2 * 16, 1, 1, 20, 24) - flops.conv_flops(
        16, 2 * 16, 1, 1, 20, 24
    )
    cbam_part = flops.cbam_flops(cfg.cat_channels, 20, 24, 8)
    assert flops.c2f_cd_flops(cfg) - flops.c2f_flops(cfg) == coord_increment + cbam_part


# ---------------------------------------------------------------------------
# serialization


def test_conv_params_round_trip(tmp_path):
    rng = np.random.default_rng(26)
    p = ops.ConvParams.init(3, 2, 3, rng, stride=2, padding=1)
    path = tmp_path / "conv.json"
    serialize.save_params(p, path)
    q = serialize.load_params(path)
    assert np.array_equal(p.weight, q.weight) and np.array_equal(p.bias, q.bias)
    assert (p.stride, p.padding) == (q.stride, q.padding)


def test_c2fcd_params_round_trip_same_forward(tmp_path):
    rng = np.random.default_rng(27)
    p = blocks.C2fCdParams.init(4, 6, n=2, reduction=3, rng=rng)
    path = tmp_path / "block.json"
    serialize.save_params(p, path)
    q = serialize.load_params(path)
    x = rng.normal(size=(1, 4, 6, 6))
    assert np.array_equal(blocks.c2f_cd(x, p), blocks.c2f_cd(x, q))
