"""Low-dimensional lattices with exact nearest-neighbor decoders.

Supports the integer lattice Z_d, the checkerboard lattice D_n (integer
vectors with even coordinate sum) and the hexagonal lattice A_2.  Every
quantization call perturbs its argument by a fixed tiny vector so that
inputs sitting exactly on a Voronoi facet resolve deterministically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Lattice",
    "LatticePoint",
    "default_tie_breaker",
    "make_lattice",
    "nn_quantize",
    "coords_of",
    "in_scaled_voronoi",
    "in_scaled_voronoi_many",
    "second_moment",
]

# Numeric ids used by the binary file headers.
FAMILY_IDS = {"Z": 1, "D": 2, "A": 3}


def default_tie_breaker(d: int) -> np.ndarray:
    """Deterministic facet-avoiding perturbation for d dimensions.

    Component k is 1e-7*(k+1)*pi folded into [0, 1e-6).  The components are
    distinct irrational multiples of pi, so the perturbed input never lands
    on a Voronoi facet of the supported lattices (facets have rational
    normal equations in the relevant frames).
    """
    k = np.arange(1, d + 1, dtype=np.float64)
    return np.mod(1e-7 * k * math.pi, 1e-6)


@dataclass(frozen=True, eq=False)
class LatticePoint:
    """A lattice point, carried both as generator coordinates and as a vector.

    ``point == G @ coords`` up to float round-off; coords are exact integers.
    """

    coords: np.ndarray
    point: np.ndarray


@dataclass(frozen=True, eq=False)
class Lattice:
    """One of the supported lattices, scaled by a positive factor.

    Attributes:
        family: "Z", "D" or "A" (A is the hexagonal lattice, d = 2).
        d: ambient dimension.
        G: generator matrix, columns are basis vectors (includes scale).
        G_inv: inverse generator.
        eps: tie-breaking perturbation added inside every nearest-neighbor
            call.  Applied in the unscaled frame, so quantization commutes
            exactly with rescaling the lattice.
        scale: scalar multiplying the canonical generator.
    """

    family: str
    d: int
    G: np.ndarray
    G_inv: np.ndarray
    eps: np.ndarray
    scale: float = 1.0

    @property
    def name(self) -> str:
        return f"{self.family}{self.d}"

    @property
    def integral_gram(self) -> bool:
        """True when G.T @ G is an integer matrix (exact integer inner products)."""
        return self.family in ("Z", "D")

    def point_of(self, coords: np.ndarray) -> np.ndarray:
        """Map generator coordinates (..., d) to vectors (..., d)."""
        return np.asarray(coords, dtype=np.float64) @ self.G.T

    def nearest_coords(self, x: np.ndarray) -> np.ndarray:
        """Generator coordinates of the nearest lattice point, batched.

        Accepts shape (..., d) and returns int64 of the same shape.  The
        tie breaker is added after removing the scale, i.e. the result is
        argmin over c of ||x/scale + eps - G0 @ c|| with G0 = G/scale.
        """
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.d:
            raise ValueError(
                f"dimension mismatch: expected trailing axis {self.d}, got {x.shape[-1]}"
            )
        y = x / self.scale + self.eps
        if self.family == "Z":
            return np.rint(y).astype(np.int64)
        if self.family == "D":
            return self._nearest_coords_d(y)
        return self._nearest_coords_a2(y)

    def _nearest_coords_d(self, y: np.ndarray) -> np.ndarray:
        # Round every coordinate; if the sum is odd, re-round the coordinate
        # with the largest rounding error to its second-nearest integer.
        # Ties on the error pick the lowest index (argmax convention).
        f = np.rint(y)
        delta = y - f
        p = f.astype(np.int64)
        odd = (p.sum(axis=-1) & 1).astype(bool)
        k = np.argmax(np.abs(delta), axis=-1)[..., None]
        dk = np.take_along_axis(delta, k, axis=-1)
        step = np.where(dk >= 0, 1, -1).astype(np.int64)
        fixed = p.copy()
        np.put_along_axis(fixed, k, np.take_along_axis(p, k, axis=-1) + step, axis=-1)
        p = np.where(odd[..., None], fixed, p)
        # Generator coordinates: G0_inv has half-integer entries, product is
        # an exact integer for any D_n point of sane magnitude.
        c = p @ (self.G_inv * self.scale).T
        return np.rint(c).astype(np.int64)

    def _nearest_coords_a2(self, y: np.ndarray) -> np.ndarray:
        # Exhaustive check over the 3x3 grid of rounded generator
        # coordinates; the true nearest neighbor is always within one step
        # of round(G0_inv @ y) for this basis.
        g0 = self.G / self.scale
        u = y @ (self.G_inv * self.scale).T
        base = np.rint(u).astype(np.int64)
        best_c = None
        best_d2 = None
        for da in (-1, 0, 1):
            for db in (-1, 0, 1):
                c = base + np.array([da, db], dtype=np.int64)
                diff = y - c @ g0.T
                d2 = np.einsum("...i,...i->...", diff, diff)
                if best_d2 is None:
                    best_c, best_d2 = c, d2
                else:
                    better = d2 < best_d2
                    best_d2 = np.where(better, d2, best_d2)
                    best_c = np.where(better[..., None], c, best_c)
        return best_c


def _canonical_generator(family: str, d: int) -> np.ndarray:
    if family == "Z":
        return np.eye(d)
    if family == "D":
        # Columns e_i - e_{i+1} for i < n, plus e_{n-1} + e_n.  Determinant 2.
        G = np.zeros((d, d))
        for i in range(d - 1):
            G[i, i] = 1.0
            G[i + 1, i] = -1.0
        G[d - 2, d - 1] = 1.0
        G[d - 1, d - 1] = 1.0
        return G
    # Hexagonal: unit basis vectors at 60 degrees.
    return np.array([[1.0, 0.5], [0.0, math.sqrt(3.0) / 2.0]])


def make_lattice(
    name: str,
    d: int | None = None,
    *,
    scale: float = 1.0,
    eps: np.ndarray | None = None,
) -> Lattice:
    """Construct a lattice by name.

    Args:
        name: family tag, optionally with a dimension suffix: "z", "z2",
            "d4", "a2" (case-insensitive).
        d: dimension, required when the name carries no suffix.
        scale: positive scalar applied to the canonical generator.
        eps: override for the tie-breaking perturbation (shape (d,)).

    Returns:
        An immutable Lattice.
    """
    tag = name.strip().lower()
    family = tag.rstrip("0123456789")
    suffix = tag[len(family):]
    if family not in ("z", "d", "a"):
        raise ValueError(f"unknown lattice family {name!r}")
    if suffix:
        if d is not None and d != int(suffix):
            raise ValueError(f"conflicting dimensions in {name!r} and d={d}")
        d = int(suffix)
    if d is None:
        raise ValueError("lattice dimension required")
    family = family.upper()
    if family == "Z" and d < 1:
        raise ValueError("Z_d needs d >= 1")
    if family == "D" and d < 2:
        raise ValueError("D_n needs n >= 2")
    if family == "A" and d != 2:
        raise ValueError("the hexagonal lattice is two-dimensional")
    if not scale > 0:
        raise ValueError("scale must be positive")

    G = _canonical_generator(family, d) * scale
    G_inv = np.linalg.inv(G)
    if not np.allclose(G @ G_inv, np.eye(d), atol=1e-12):
        raise ValueError("generator inversion failed")
    if eps is None:
        eps = default_tie_breaker(d)
    eps = np.asarray(eps, dtype=np.float64)
    if eps.shape != (d,):
        raise ValueError(f"eps must have shape ({d},)")
    for a in (G, G_inv, eps):
        a.flags.writeable = False
    return Lattice(family=family, d=d, G=G, G_inv=G_inv, eps=eps, scale=float(scale))


def nn_quantize(lat: Lattice, x: np.ndarray) -> LatticePoint:
    """Nearest lattice point of a single vector, with deterministic ties."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (lat.d,):
        raise ValueError(f"expected shape ({lat.d},), got {x.shape}")
    c = lat.nearest_coords(x)
    return LatticePoint(coords=c, point=lat.point_of(c))


def coords_of(lat: Lattice, p: np.ndarray) -> np.ndarray:
    """Generator coordinates of a vector that must be a lattice point.

    Raises ValueError when p is further than 1e-6 from round(G_inv @ p)
    mapped back to the lattice.
    """
    p = np.asarray(p, dtype=np.float64)
    if p.shape != (lat.d,):
        raise ValueError(f"expected shape ({lat.d},), got {p.shape}")
    c = np.rint(lat.G_inv @ p).astype(np.int64)
    if np.linalg.norm(lat.G @ c - p) > 1e-6:
        raise ValueError("not a lattice point")
    return c


def in_scaled_voronoi(lat: Lattice, x: np.ndarray, s: float) -> bool:
    """Whether x lies in s times the base Voronoi cell (tie-broken)."""
    if not s > 0:
        raise ValueError("scale factor must be positive")
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (lat.d,):
        raise ValueError(f"expected shape ({lat.d},), got {x.shape}")
    return not lat.nearest_coords(x / s).any()


def in_scaled_voronoi_many(lat: Lattice, X: np.ndarray, s: float) -> np.ndarray:
    """Batched membership test, X of shape (..., d) -> bool (...)."""
    if not s > 0:
        raise ValueError("scale factor must be positive")
    X = np.asarray(X, dtype=np.float64)
    return ~lat.nearest_coords(X / s).any(axis=-1)


def second_moment(
    lat: Lattice,
    num_samples: int = 100_000,
    seed: int = 0,
    *,
    with_stderr: bool = False,
):
    """Monte-Carlo per-dimension second moment of the Voronoi cell.

    Draws points uniform over the fundamental parallelepiped G [0,1)^d,
    quantizes, and averages ||error||^2 / d.  With ``with_stderr`` returns
    (estimate, standard error of the mean).
    """
    if num_samples < 2:
        raise ValueError("need at least two samples")
    rng = np.random.default_rng(seed)
    U = rng.random((num_samples, lat.d)) @ lat.G.T
    Z = U - lat.point_of(lat.nearest_coords(U))
    v = np.einsum("ij,ij->i", Z, Z) / lat.d
    est = float(v.mean())
    if with_stderr:
        se = float(v.std(ddof=1) / math.sqrt(num_samples))
        return est, se
    return est
