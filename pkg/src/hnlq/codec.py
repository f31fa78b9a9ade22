"""Hierarchical nested-lattice codec.

Encodes a vector as M base-q digit vectors by repeatedly quantizing,
reducing mod q and shrinking by q.  Layer m of the decoder contributes
q^m times a coset representative, so the reconstruction always equals the
nearest lattice point minus the M-fold coarsened quantization of the
input; the codebook is exact whenever that coarse term is zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .lattices import Lattice, LatticePoint, in_scaled_voronoi_many
from .voronoi import VoronoiCodeParams, digit_grid, vc_decode_many

__all__ = [
    "HierarchicalParams",
    "HierarchicalEncoding",
    "SandwichReport",
    "h_encode",
    "h_encode_many",
    "h_decode",
    "h_decode_exact",
    "h_decode_partial",
    "h_decode_partial_exact",
    "decode_coords_many",
    "q_circ",
    "q_circ_many",
    "layer_codebook_coords",
    "enumerate_codebook",
    "verify_sandwich",
    "nesting_radius_ratio",
    "reduced_nesting_ratio",
]

ENUMERATION_GUARD = 2**24


@dataclass(frozen=True, eq=False)
class HierarchicalParams:
    """Lattice, base q >= 2 and depth M >= 1."""

    lat: Lattice
    q: int
    M: int

    def __post_init__(self):
        if int(self.q) != self.q or self.q < 2:
            raise ValueError("base q must be an integer >= 2")
        if int(self.M) != self.M or self.M < 1:
            raise ValueError("depth M must be an integer >= 1")
        object.__setattr__(self, "q", int(self.q))
        object.__setattr__(self, "M", int(self.M))

    @property
    def bits_per_dim(self) -> float:
        """Nominal rate in bits per dimension, M log2 q."""
        return self.M * math.log2(self.q)

    @property
    def codebook_size(self) -> int:
        return self.q ** (self.lat.d * self.M)


@dataclass(frozen=True, eq=False)
class HierarchicalEncoding:
    """Digit layers, shape (M, d), finest layer first, plus overload flag."""

    digits: np.ndarray
    overload: bool


def nesting_radius_ratio(q: int, M: int) -> float:
    """Relative slack of the codebook region: (1 - q^(1-M)) / (q - 1)."""
    return (1.0 - float(q) ** (1 - M)) / (q - 1)


def reduced_nesting_ratio(q: int, M: int) -> int:
    """q^M (1 - ratio) as an exact integer: q^M minus the geometric tail."""
    return q**M - sum(q**m for m in range(1, M))


def h_encode_many(params: HierarchicalParams, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Encode rows of X (..., d); returns digits (..., M, d) and overload (...)."""
    lat, q, M = params.lat, params.q, params.M
    X = np.asarray(X, dtype=np.float64)
    digits = np.empty(X.shape[:-1] + (M, lat.d), dtype=np.int64)
    g = X
    for m in range(M):
        c = lat.nearest_coords(g)
        digits[..., m, :] = np.mod(c, q)
        g = lat.point_of(c) / q
    overload = lat.nearest_coords(g).any(axis=-1)
    return digits, overload


def h_encode(params: HierarchicalParams, x: np.ndarray) -> HierarchicalEncoding:
    """Encode one vector of shape (d,)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (params.lat.d,):
        raise ValueError(f"expected shape ({params.lat.d},), got {x.shape}")
    digits, overload = h_encode_many(params, x)
    return HierarchicalEncoding(digits=digits, overload=bool(overload))


def _check_layer_digits(params: HierarchicalParams, digits: np.ndarray) -> np.ndarray:
    digits = np.asarray(digits)
    if digits.shape[-2:] != (params.M, params.lat.d):
        raise ValueError(
            f"digits must have trailing shape ({params.M}, {params.lat.d}), got {digits.shape}"
        )
    if not np.issubdtype(digits.dtype, np.integer):
        raise ValueError("digits must be integers")
    if digits.min(initial=0) < 0 or digits.max(initial=0) >= params.q:
        raise ValueError(f"digits out of range [0, {params.q})")
    return digits.astype(np.int64)


def _layer_coords(params: HierarchicalParams, digits: np.ndarray) -> np.ndarray:
    """Coset representative coordinates per layer, same shape as digits."""
    vc = VoronoiCodeParams(params.lat, params.q)
    return vc_decode_many(vc, digits)


def decode_coords_many(
    params: HierarchicalParams, digits: np.ndarray, layers: slice | None = None
) -> np.ndarray:
    """Reconstruction coordinates from digits (..., M, d), exact integers.

    ``layers`` restricts the sum to a slice of layer indices; default all.
    """
    digits = _check_layer_digits(params, digits)
    reps = _layer_coords(params, digits)
    rng = range(params.M)[layers] if layers is not None else range(params.M)
    acc = np.zeros(digits.shape[:-2] + (params.lat.d,), dtype=np.int64)
    for m in rng:
        acc += (params.q**m) * reps[..., m, :]
    return acc


def h_decode_exact(params: HierarchicalParams, enc: HierarchicalEncoding) -> LatticePoint:
    """Full reconstruction as a lattice point with exact coordinates."""
    c = decode_coords_many(params, enc.digits)
    return LatticePoint(coords=c, point=params.lat.point_of(c))


def h_decode(params: HierarchicalParams, enc: HierarchicalEncoding) -> np.ndarray:
    """Full reconstruction as a real vector."""
    return h_decode_exact(params, enc).point


def h_decode_partial_exact(
    params: HierarchicalParams, enc: HierarchicalEncoding, t: int
) -> LatticePoint:
    """Sum of the coarsest t layers (m = M-t .. M-1), exact coordinates."""
    if int(t) != t or not 1 <= t <= params.M:
        raise ValueError(f"t must be in 1..{params.M}")
    c = decode_coords_many(params, enc.digits, layers=slice(params.M - t, params.M))
    return LatticePoint(coords=c, point=params.lat.point_of(c))


def h_decode_partial(params: HierarchicalParams, enc: HierarchicalEncoding, t: int) -> np.ndarray:
    """Coarse reconstruction from the last t digit layers, as a real vector."""
    return h_decode_partial_exact(params, enc, t).point


def q_circ_many(params: HierarchicalParams, X: np.ndarray, m: int) -> np.ndarray:
    """Coordinates of the m-fold coarsened quantization of rows of X.

    Applies the nearest-neighbor quantizer at scales 1, q, ..., q^m in
    sequence; m = 0 is plain quantization.  Returns int64 (..., d).
    """
    if int(m) != m or m < 0:
        raise ValueError("m must be a non-negative integer")
    lat, q = params.lat, params.q
    t = lat.nearest_coords(np.asarray(X, dtype=np.float64))
    for _ in range(m):
        t = lat.nearest_coords(lat.point_of(t) / q)
    return t * q**m


def q_circ(params: HierarchicalParams, x: np.ndarray, m: int) -> LatticePoint:
    """Single-vector form of q_circ_many."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (params.lat.d,):
        raise ValueError(f"expected shape ({params.lat.d},), got {x.shape}")
    c = q_circ_many(params, x, m)
    return LatticePoint(coords=c, point=params.lat.point_of(c))


def layer_codebook_coords(params: HierarchicalParams) -> np.ndarray:
    """Coordinates of the q^d single-layer codebook points.

    Row i is the representative of the digit vector whose base-q value is
    i (first coordinate most significant), matching the LUT index layout.
    """
    return _layer_coords_from_digits(params, digit_grid(params.q, params.lat.d))


def _layer_coords_from_digits(params: HierarchicalParams, B: np.ndarray) -> np.ndarray:
    vc = VoronoiCodeParams(params.lat, params.q)
    return vc_decode_many(vc, B)


def _iter_codebook_coords(params: HierarchicalParams, per_chunk_layers: int = 1):
    """Yield codebook coordinates in chunks of q^(d*(M - per_chunk_layers)) rows.

    The codebook is the Minkowski sum over layers of q^m times the layer
    codebook; chunking by the leading layer keeps memory bounded for the
    largest admissible enumerations.
    """
    q, M, d = params.q, params.M, params.lat.d
    LC = layer_codebook_coords(params)
    # Outer sum over layers 1..M-1, built once; bounded by guard / q^d rows.
    tail = np.zeros((1, d), dtype=np.int64)
    for m in range(1, M):
        w = q**m
        tail = (tail[:, None, :] + w * LC[None, :, :]).reshape(-1, d)
    for i in range(LC.shape[0]):
        yield LC[i][None, :] + tail


def enumerate_codebook(params: HierarchicalParams) -> np.ndarray:
    """All q^(dM) codebook coordinates, one row per digit combination.

    Raises ValueError when the codebook exceeds the enumeration guard of
    2^24 points.  Points are returned as integer generator coordinates;
    map through ``params.lat.point_of`` for vectors.
    """
    if params.codebook_size > ENUMERATION_GUARD:
        raise ValueError(
            f"enumeration too large: q^(dM) = {params.codebook_size} exceeds {ENUMERATION_GUARD}"
        )
    return np.concatenate(list(_iter_codebook_coords(params)), axis=0)


_PACK_BOUND = 1 << 13


def _pack_coords(C: np.ndarray, d: int) -> np.ndarray:
    """Injective map from small integer coordinate rows to int64 keys."""
    if np.abs(C).max(initial=0) >= _PACK_BOUND:
        raise ValueError("coordinates exceed packing bound")
    key = np.zeros(C.shape[:-1], dtype=np.int64)
    for i in range(d):
        key = (key << 14) | (C[..., i] + _PACK_BOUND)
    return key


@dataclass(frozen=True)
class SandwichReport:
    """Result of verify_sandwich."""

    inner_ok: bool
    outer_ok: bool
    r_qM: float
    codebook_size: int
    distinct: bool


def verify_sandwich(params: HierarchicalParams) -> SandwichReport:
    """Check the two-sided Voronoi-code bracketing of the codebook.

    Confirms that every Voronoi codebook point with nesting ratio
    q^M (1 - r_qM) lies in the hierarchical codebook (inner inclusion) and
    that every codebook point lies within q^M (1 + r_qM) times the Voronoi
    cell (outer inclusion), with r_qM = (1 - q^(1-M)) / (q - 1).  Also
    verifies all q^(dM) points are distinct.
    """
    if params.codebook_size > ENUMERATION_GUARD:
        raise ValueError(
            f"enumeration too large: q^(dM) = {params.codebook_size} exceeds {ENUMERATION_GUARD}"
        )
    lat, q, M, d = params.lat, params.q, params.M, params.lat.d
    ratio = nesting_radius_ratio(q, M)
    s_inner = reduced_nesting_ratio(q, M)
    s_outer = q**M + sum(q**m for m in range(1, M))  # q^M (1 + ratio), exact

    outer_ok = True
    keys = []
    for chunk in _iter_codebook_coords(params):
        pts = lat.point_of(chunk)
        if outer_ok and not in_scaled_voronoi_many(lat, pts, s_outer).all():
            outer_ok = False
        keys.append(_pack_coords(chunk, d))
    keys = np.sort(np.concatenate(keys))
    distinct = bool(np.all(np.diff(keys) != 0)) if keys.size > 1 else True

    # The reduced-ratio codebook is exactly the set of lattice points inside
    # s_inner times the Voronoi cell (one representative per coset of
    # L / s_inner L), so enumerating cosets enumerates the inner region.
    # s_inner = ((q-2) q^M + q) / (q-1) >= 2 for every q >= 2, M >= 1.
    inner_ok = True
    vc_small = VoronoiCodeParams(lat, s_inner)
    grid = digit_grid(s_inner, d)
    chunk_rows = 1 << 18
    for start in range(0, grid.shape[0], chunk_rows):
        reps = vc_decode_many(vc_small, grid[start : start + chunk_rows])
        rk = _pack_coords(reps, d)
        pos = np.searchsorted(keys, rk)
        found = keys[np.minimum(pos, keys.size - 1)] == rk
        if not found.all():
            inner_ok = False
            break
    return SandwichReport(
        inner_ok=inner_ok,
        outer_ok=outer_ok,
        r_qM=ratio,
        codebook_size=int(params.codebook_size),
        distinct=distinct,
    )
