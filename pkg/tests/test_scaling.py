"""Retry-ladder scaling, dithering, and empirical rate accounting."""

import math

import numpy as np
import pytest

from hnlq import (
    HierarchicalParams,
    ScalingConfig,
    UnencodableError,
    decode_scaled,
    dither_point,
    empirical_rate,
    encode_scaled,
    h_decode,
    h_encode_many,
    in_scaled_voronoi,
    make_lattice,
)
from hnlq.scaling import decode_scaled_many, encode_scaled_many, entropy_bits
from hnlq.voronoi import digit_grid


def test_config_validation():
    cfg = ScalingConfig(beta0=0.5)
    assert cfg.alpha == 1.0 / 3.0
    assert cfg.max_retries == 60
    with pytest.raises(ValueError):
        ScalingConfig(beta0=0.0)
    with pytest.raises(ValueError):
        ScalingConfig(beta0=-1.0)
    with pytest.raises(ValueError):
        ScalingConfig(beta0=1.0, alpha=0.0)
    with pytest.raises(ValueError):
        ScalingConfig(beta0=1.0, max_retries=-1)


def test_three_retries_double_the_scale():
    # alpha = 1/3: the third retry multiplies beta0 by exactly 2
    cfg = ScalingConfig(beta0=0.7, alpha=1.0 / 3.0)
    assert cfg.scale(0) == 0.7
    assert cfg.scale(3) == 2.0 * 0.7
    assert cfg.scale(6) == 4.0 * 0.7


def test_scalar_retry_trace(z1):
    # x=5.3 overloads the 9-point scalar codebook at beta=1 but fits after
    # one shrink: 5.3/2^(1/3) quantizes to 4
    p = HierarchicalParams(z1, 3, 2)
    cfg = ScalingConfig(beta0=1.0, alpha=1.0 / 3.0)
    se = encode_scaled(p, cfg, np.array([5.3]))
    assert se.T == 1
    assert not se.enc.overload
    assert np.array_equal(h_decode(p, se.enc), [4.0])
    out = decode_scaled(p, cfg, se)
    assert np.allclose(out, [2.0 ** (1.0 / 3.0) * 4.0], atol=1e-12)
    assert abs(out[0] - 5.0397) < 1e-3


def test_zero_needs_no_retries(d4):
    p = HierarchicalParams(d4, 3, 2)
    cfg = ScalingConfig(beta0=0.5)
    se = encode_scaled(p, cfg, np.zeros(4))
    assert se.T == 0
    assert not se.enc.digits.any()
    assert np.allclose(decode_scaled(p, cfg, se), 0.0)


def test_retry_count_is_minimal(d4):
    p = HierarchicalParams(d4, 3, 2)
    cfg = ScalingConfig(beta0=0.3, alpha=1.0 / 3.0)
    rng = np.random.default_rng(77)
    X = rng.standard_normal((400, 4))
    digits, T = encode_scaled_many(p, cfg, X)
    assert (T >= 0).all() and T.max() > 0  # ladder actually used
    for x, t in zip(X, T):
        if t == 0:
            continue
        _, ov = h_encode_many(p, x[None] / cfg.scale(t - 1))
        assert bool(ov[0])  # one step earlier still overloads


def test_unencodable_when_budget_exhausted(z1):
    p = HierarchicalParams(z1, 2, 1)
    cfg = ScalingConfig(beta0=1e-3, alpha=0.01, max_retries=5)
    with pytest.raises(UnencodableError):
        encode_scaled(p, cfg, np.array([1e6]))


def test_dither_point_values(z1):
    p = HierarchicalParams(z1, 4, 1)
    assert np.array_equal(dither_point(p, np.array([0])), [0.0])
    assert np.array_equal(dither_point(p, np.array([1])), [0.25])
    assert np.array_equal(dither_point(p, np.array([3])), [-0.25])
    with pytest.raises(ValueError):
        dither_point(p, np.array([4]))
    with pytest.raises(ValueError):
        dither_point(p, np.array([1, 1]))


def test_dither_points_stay_in_base_cell(d4, a2):
    for lat in (d4, a2):
        p = HierarchicalParams(lat, 3, 2)
        for row in digit_grid(3, lat.d):
            z = dither_point(p, row)
            assert in_scaled_voronoi(lat, z, 1.0)


def test_dither_shifts_the_encoder_input(d4):
    p = HierarchicalParams(d4, 4, 2)
    cfg = ScalingConfig(beta0=0.6)
    rng = np.random.default_rng(5)
    x = rng.standard_normal(4)
    ids = np.array([1, 3, 0, 2])
    se = encode_scaled(p, cfg, x, dither_id=ids)
    z = dither_point(p, ids)
    dg, ov = h_encode_many(p, x[None] / cfg.scale(se.T) - z)
    assert not ov[0]
    assert np.array_equal(se.enc.digits, dg[0])
    # decoding adds the dither back before rescaling
    out = decode_scaled(p, cfg, se)
    want = cfg.scale(se.T) * (h_decode(p, se.enc) + z)
    assert np.allclose(out, want, atol=1e-12)


def test_dither_id_broadcast(d4):
    p = HierarchicalParams(d4, 4, 2)
    cfg = ScalingConfig(beta0=0.6)
    rng = np.random.default_rng(6)
    X = rng.standard_normal((30, 4))
    ids = np.array([1, 3, 0, 2])
    d1, t1 = encode_scaled_many(p, cfg, X, dither_ids=ids)
    d2, t2 = encode_scaled_many(p, cfg, X, dither_ids=np.tile(ids, (30, 1)))
    assert np.array_equal(d1, d2)
    assert np.array_equal(t1, t2)
    with pytest.raises(ValueError):
        encode_scaled_many(p, cfg, X, dither_ids=np.tile(ids, (29, 1)))


def test_batch_decode_matches_scalar(d4):
    p = HierarchicalParams(d4, 3, 2)
    cfg = ScalingConfig(beta0=0.4)
    rng = np.random.default_rng(9)
    X = rng.standard_normal((50, 4))
    digits, T = encode_scaled_many(p, cfg, X)
    batch = decode_scaled_many(p, cfg, digits, T)
    for i in range(50):
        se = encode_scaled(p, cfg, X[i])
        assert se.T == T[i]
        assert np.array_equal(batch[i], decode_scaled(p, cfg, se))


def test_encoding_is_deterministic(d4):
    p = HierarchicalParams(d4, 3, 2)
    cfg = ScalingConfig(beta0=0.3)
    x = np.array([1.7, -0.4, 2.2, 0.9])
    a = encode_scaled(p, cfg, x)
    b = encode_scaled(p, cfg, x)
    assert a.T == b.T
    assert np.array_equal(a.enc.digits, b.enc.digits)


def test_entropy_bits():
    assert entropy_bits([4]) == 0.0
    assert entropy_bits([2, 2]) == 1.0
    assert entropy_bits([1, 1, 1, 1]) == 2.0
    assert abs(entropy_bits([3, 1]) - (2.0 - 0.75 * math.log2(3))) < 1e-12
    with pytest.raises(ValueError):
        entropy_bits([])


def test_empirical_rate_values():
    p = HierarchicalParams(make_lattice("d4"), 4, 2)
    assert empirical_rate(p, [0] * 100) == 4.0  # M log2 q exactly
    assert empirical_rate(p, [0] * 50 + [1] * 50) == 4.25
    assert empirical_rate(p, [3] * 10) == 4.0  # any point mass is free
    p3 = HierarchicalParams(make_lattice("z1"), 3, 2)
    assert empirical_rate(p3, [0, 0, 0]) == 2.0 * math.log2(3.0)
    with pytest.raises(ValueError):
        empirical_rate(p, [])


def test_empirical_rate_lower_bound(d4):
    p = HierarchicalParams(d4, 3, 2)
    rng = np.random.default_rng(12)
    T = rng.integers(0, 4, size=200)
    assert empirical_rate(p, T) >= p.bits_per_dim
