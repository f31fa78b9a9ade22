"""Nearest-point decoders, coordinate maps, and Voronoi membership."""

import math

import numpy as np
import pytest

from conftest import oracle_nearest
from hnlq import (
    coords_of,
    default_tie_breaker,
    in_scaled_voronoi,
    make_lattice,
    nn_quantize,
    second_moment,
)
from hnlq.lattices import FAMILY_IDS, in_scaled_voronoi_many


def test_make_lattice_names():
    assert make_lattice("z1").name == "Z1"
    assert make_lattice("z", 2).name == "Z2"
    assert make_lattice("D4").name == "D4"
    assert make_lattice("a2").name == "A2"
    # suffix and explicit d must agree when both are given
    assert make_lattice("z3", 3).d == 3
    with pytest.raises(ValueError):
        make_lattice("z3", 4)
    with pytest.raises(ValueError):
        make_lattice("z")  # no dimension anywhere


def test_make_lattice_rejects_unsupported():
    with pytest.raises(ValueError):
        make_lattice("e8")
    with pytest.raises(ValueError):
        make_lattice("a3")
    with pytest.raises(ValueError):
        make_lattice("d1")
    with pytest.raises(ValueError):
        make_lattice("z0")
    with pytest.raises(ValueError):
        make_lattice("z2", scale=0.0)
    with pytest.raises(ValueError):
        make_lattice("z2", scale=-1.0)
    with pytest.raises(ValueError):
        make_lattice("z2", eps=np.zeros(3))


def test_family_ids_are_frozen():
    # the binary headers encode these; changing them breaks old files
    assert FAMILY_IDS == {"Z": 1, "D": 2, "A": 3}


def test_generator_inverse(any_lat):
    assert np.allclose(any_lat.G @ any_lat.G_inv, np.eye(any_lat.d), atol=1e-12)
    with pytest.raises(ValueError):
        any_lat.G[0, 0] = 99.0  # arrays are frozen


def test_tie_breaker_values():
    got = default_tie_breaker(3)
    want = np.mod(1e-7 * np.arange(1, 4) * math.pi, 1e-6)
    assert np.array_equal(got, want)
    assert got.min() > 0
    assert got.max() < 1e-6
    assert len(np.unique(default_tie_breaker(8))) == 8


def test_origin_quantizes_to_zero(any_lat):
    lp = nn_quantize(any_lat, np.zeros(any_lat.d))
    assert not lp.coords.any()
    assert np.allclose(lp.point, 0.0)


def test_z2_plain_rounding(z2):
    lp = nn_quantize(z2, np.array([0.4, -1.2]))
    assert np.array_equal(lp.coords, [0, -1])
    assert np.array_equal(lp.point, [0.0, -1.0])


def test_d4_parity_repair(d4):
    # naive rounding gives (1,0,0,0), odd sum; the repair flips the worst
    # coordinate back and lands on the origin
    lp = nn_quantize(d4, np.array([0.6, 0.0, 0.0, 0.0]))
    assert np.allclose(lp.point, 0.0)
    lp = nn_quantize(d4, np.array([0.6, 0.55, 0.0, 0.0]))
    assert np.allclose(lp.point, [1.0, 1.0, 0.0, 0.0])


def test_a2_prefers_hex_neighbor(a2):
    # (0.5, 0.5) is closer to the basis point (0.5, sqrt(3)/2) than to
    # either of the Z2-style candidates (0,0) / (1,0)
    lp = nn_quantize(a2, np.array([0.5, 0.5]))
    assert np.allclose(lp.point, [0.5, math.sqrt(3.0) / 2.0])


def test_nearest_matches_bruteforce(any_lat):
    rng = np.random.default_rng(101)
    for sigma in (0.7, 3.0):
        X = rng.standard_normal((300, any_lat.d)) * sigma
        got = any_lat.nearest_coords(X)
        for x, c in zip(X, got):
            assert np.array_equal(c, oracle_nearest(any_lat, x))


def test_nearest_on_constructed_ties(any_lat):
    # midpoints of facets; the tie-break must land implementation and
    # oracle on the same side
    d = any_lat.d
    ties = [
        np.full(d, 0.5),
        np.full(d, -0.5),
        np.arange(d) + 0.5,
        np.full(d, 1.5) * any_lat.scale,
    ]
    for x in ties:
        assert np.array_equal(
            any_lat.nearest_coords(x), oracle_nearest(any_lat, x)
        )


def test_batched_decode_equals_scalar(any_lat):
    rng = np.random.default_rng(7)
    X = rng.standard_normal((40, any_lat.d)) * 2.0
    batch = any_lat.nearest_coords(X)
    single = np.stack([any_lat.nearest_coords(x) for x in X])
    assert np.array_equal(batch, single)
    # higher-rank shapes pass through unchanged
    cube = any_lat.nearest_coords(X.reshape(8, 5, any_lat.d))
    assert np.array_equal(cube.reshape(40, any_lat.d), batch)


def test_quantization_commutes_with_scale():
    rng = np.random.default_rng(3)
    for name in ("z2", "d4", "a2"):
        base = make_lattice(name)
        scaled = make_lattice(name, scale=0.37)
        X = rng.standard_normal((200, base.d))
        assert np.array_equal(
            scaled.nearest_coords(0.37 * X), base.nearest_coords(X)
        )


def test_dimension_mismatch_raises(d4):
    with pytest.raises(ValueError):
        d4.nearest_coords(np.zeros(3))
    with pytest.raises(ValueError):
        nn_quantize(d4, np.zeros((2, 4)))


def test_coords_roundtrip(z3, d4, a2):
    assert np.array_equal(coords_of(z3, np.array([2.0, -1.0, 5.0])), [2, -1, 5])
    c = coords_of(d4, np.array([0.0, 0.0, 1.0, 1.0]))
    assert np.array_equal(d4.point_of(c), [0.0, 0.0, 1.0, 1.0])
    p = a2.point_of(np.array([3, -2]))
    assert np.array_equal(coords_of(a2, p), [3, -2])
    with pytest.raises(ValueError):
        coords_of(z3, np.array([0.5, 0.0, 0.0]))


def test_point_of_is_exact_on_integer_lattices(d4):
    rng = np.random.default_rng(11)
    C = rng.integers(-50, 50, size=(100, 4))
    P = d4.point_of(C)
    assert np.array_equal(P, np.rint(P))
    assert np.array_equal(d4.nearest_coords(P), C)


def test_in_scaled_voronoi_examples(z1, d4):
    assert in_scaled_voronoi(z1, np.array([0.49]), 1.0)
    assert not in_scaled_voronoi(z1, np.array([0.51]), 1.0)
    # 2.6/4 = 0.65 rounds to 1, so the point sits outside 4 cells
    assert not in_scaled_voronoi(z1, np.array([2.6]), 4.0)
    assert in_scaled_voronoi(z1, np.array([2.6]), 6.0)
    x = np.full(4, 0.4)
    assert in_scaled_voronoi(d4, x, 1.0) == (not oracle_nearest(d4, x).any())
    with pytest.raises(ValueError):
        in_scaled_voronoi(z1, np.array([0.0]), 0.0)
    with pytest.raises(ValueError):
        in_scaled_voronoi(z1, np.array([0.0]), -2.0)


def test_in_scaled_voronoi_many_consistent(any_lat):
    rng = np.random.default_rng(23)
    X = rng.standard_normal((120, any_lat.d)) * 1.5
    for s in (1.0, 2.5):
        got = in_scaled_voronoi_many(any_lat, X, s)
        assert got.dtype == bool
        assert got.shape == (120,)
        for x, g in zip(X, got):
            assert g == in_scaled_voronoi(any_lat, x, s)


def test_second_moment_z_is_one_twelfth(z1, z2):
    for lat in (z1, z2):
        est, se = second_moment(lat, 200_000, seed=5, with_stderr=True)
        assert abs(est - 1.0 / 12.0) <= 3.0 * se


def test_second_moment_deterministic(z2):
    assert second_moment(z2, 1000, seed=7) == second_moment(z2, 1000, seed=7)
    assert second_moment(z2, 1000, seed=7) != second_moment(z2, 1000, seed=8)
    with pytest.raises(ValueError):
        second_moment(z2, 1)


def test_second_moment_d4_below_cubic():
    # the checkerboard cell is rounder than the cube of equal volume:
    # sigma^2(D4) < 2^(2/4) / 12
    est, se = second_moment(make_lattice("d4"), 100_000, seed=1, with_stderr=True)
    assert est + 3 * se < 2.0 ** 0.5 / 12.0
