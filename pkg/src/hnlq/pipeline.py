"""Product-code pipeline: long vectors in, table-driven inner products out.

A length-n vector is split into n/d chunks, each quantized independently
with per-chunk overload scaling.  Inner products between two quantized
vectors sum per-chunk table lookups weighted by both chunks' scales, with
an optional shared random rotation and norm bookkeeping in front.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass

import numpy as np

from .codec import HierarchicalParams
from .lattices import FAMILY_IDS, make_lattice
from .lut import InnerProductLUT, digits_to_index
from .scaling import ScalingConfig, decode_scaled_many, encode_scaled_many

__all__ = [
    "DITHER_MODES",
    "PipelineConfig",
    "QuantizedVector",
    "QuantizedMatrix",
    "random_rotation",
    "quantize_vector",
    "quantize_matrix",
    "reconstruct_chunks",
    "ip_approx",
    "matmul_approx",
    "save_quantized_matrix",
    "load_quantized_matrix",
]

DITHER_MODES = ("none", "fixed", "random")


@dataclass(frozen=True, eq=False)
class PipelineConfig:
    """Codec parameters plus vector-length and preprocessing choices.

    Attributes:
        params: hierarchical codec parameters (d divides n).
        scaling: overload scaling configuration.
        n: full vector length, a multiple of the lattice dimension.
        rotate: apply a shared random rotation and normalize each vector,
            recording its norm for exact rescaling of inner products.
        rotation_seed: seed of the shared rotation.
        dither_mode: "none", "fixed" (one digit id for every chunk) or
            "random" (per column/chunk ids from a counter-based hash).
        dither_ids: the fixed digit id, required when dither_mode="fixed".
        dither_seed: seed for the "random" mode.
    """

    params: HierarchicalParams
    scaling: ScalingConfig
    n: int
    rotate: bool = False
    rotation_seed: int = 0
    dither_mode: str = "none"
    dither_ids: np.ndarray | None = None
    dither_seed: int = 0

    def __post_init__(self):
        if self.n < 1 or self.n % self.params.lat.d:
            raise ValueError("n must be a positive multiple of the lattice dimension")
        if self.dither_mode not in DITHER_MODES:
            raise ValueError(f"dither_mode must be one of {DITHER_MODES}")
        if self.dither_mode == "fixed":
            ids = np.asarray(self.dither_ids)
            if ids.shape != (self.params.lat.d,):
                raise ValueError("fixed dither needs one digit id of shape (d,)")
            if ids.min() < 0 or ids.max() >= self.params.q:
                raise ValueError("fixed dither digits out of range")
            object.__setattr__(self, "dither_ids", ids.astype(np.int64))
        elif self.dither_ids is not None:
            raise ValueError("dither_ids only applies to the fixed mode")

    @property
    def chunks(self) -> int:
        return self.n // self.params.lat.d


@dataclass(eq=False)
class QuantizedVector:
    """One quantized column: per-chunk digits, retry counts and dither ids.

    ``norm`` is recorded only when the pipeline rotates and normalizes.
    ``layer_idx`` caches the base-q index of each digit layer for table
    lookups; ``dither_idx`` likewise for the dither ids.
    """

    digits: np.ndarray  # (K, M, d)
    T: np.ndarray  # (K,)
    norm: float | None
    dither_ids: np.ndarray | None  # (K, d) or None
    layer_idx: np.ndarray  # (K, M)
    dither_idx: np.ndarray | None  # (K,) or None


@dataclass(eq=False)
class QuantizedMatrix:
    """A column-quantized matrix plus the configuration that produced it."""

    cfg: PipelineConfig
    digits: np.ndarray  # (cols, K, M, d)
    T: np.ndarray  # (cols, K)
    norms: np.ndarray | None  # (cols,) when rotating
    dither_ids: np.ndarray | None  # (cols, K, d) when dithering

    @property
    def cols(self) -> int:
        return self.digits.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return (self.cfg.n, self.cols)

    def column(self, j: int) -> QuantizedVector:
        q, d = self.cfg.params.q, self.cfg.params.lat.d
        ids = None if self.dither_ids is None else self.dither_ids[j]
        return QuantizedVector(
            digits=self.digits[j],
            T=self.T[j],
            norm=None if self.norms is None else float(self.norms[j]),
            dither_ids=ids,
            layer_idx=digits_to_index(self.digits[j], q),
            dither_idx=None if ids is None else digits_to_index(ids, q),
        )


def random_rotation(n: int, seed: int) -> np.ndarray:
    """Deterministic Haar-distributed orthogonal matrix.

    QR of an i.i.d. Gaussian matrix with the R diagonal's signs folded in,
    which makes the factorization unique and the distribution uniform.
    """
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n))
    Q, R = np.linalg.qr(A)
    return Q * np.sign(np.diag(R))


def _dither_digit_ids(cfg: PipelineConfig, col: int, K: int) -> np.ndarray | None:
    """Per-chunk dither ids for one column, or None."""
    d, q = cfg.params.lat.d, cfg.params.q
    if cfg.dither_mode == "none":
        return None
    if cfg.dither_mode == "fixed":
        return np.broadcast_to(cfg.dither_ids, (K, d)).copy()
    ids = np.empty((K, d), dtype=np.int64)
    for k in range(K):
        h = hashlib.blake2b(
            struct.pack("<qqq", cfg.dither_seed, col, k), digest_size=8
        ).digest()
        v = int.from_bytes(h, "little")
        for i in range(d - 1, -1, -1):
            ids[k, i] = v % q
            v //= q
    return ids


def _encode_columns(cfg: PipelineConfig, A: np.ndarray):
    """Rotate/normalize columns of A (n, cols) and encode all chunks."""
    n, cols = A.shape
    d, K = cfg.params.lat.d, cfg.chunks
    if n != cfg.n:
        raise ValueError(f"expected {cfg.n} rows, got {n}")
    norms = None
    Y = A
    if cfg.rotate:
        S = random_rotation(cfg.n, cfg.rotation_seed)
        norms = np.linalg.norm(A, axis=0)
        Y = S @ A
        safe = np.where(norms > 0, norms, 1.0)
        Y = Y / safe
    chunks = Y.T.reshape(cols, K, d)
    if cfg.dither_mode == "none":
        ids = None
    else:
        ids = np.stack([_dither_digit_ids(cfg, j, K) for j in range(cols)])
    digits, T = encode_scaled_many(
        cfg.params, cfg.scaling, chunks.reshape(-1, d),
        dither_ids=None if ids is None else ids.reshape(-1, d),
    )
    return (
        digits.reshape(cols, K, cfg.params.M, d),
        T.reshape(cols, K),
        norms,
        ids,
    )


def quantize_matrix(cfg: PipelineConfig, A: np.ndarray) -> QuantizedMatrix:
    """Quantize every column of A (n, cols)."""
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2:
        raise ValueError("expected a 2-d array")
    digits, T, norms, ids = _encode_columns(cfg, A)
    return QuantizedMatrix(cfg=cfg, digits=digits, T=T, norms=norms, dither_ids=ids)


def quantize_vector(cfg: PipelineConfig, x: np.ndarray, col: int = 0) -> QuantizedVector:
    """Quantize a single length-n vector.

    ``col`` selects the column index used to derive per-chunk dither ids in
    the "random" mode, so a vector quantized standalone matches the same
    column quantized as part of a matrix.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (cfg.n,):
        raise ValueError(f"expected shape ({cfg.n},), got {x.shape}")
    K, d, q = cfg.chunks, cfg.params.lat.d, cfg.params.q
    norm = None
    y = x
    if cfg.rotate:
        S = random_rotation(cfg.n, cfg.rotation_seed)
        norm = float(np.linalg.norm(x))
        y = S @ x
        if norm > 0:
            y = y / norm
    ids = _dither_digit_ids(cfg, col, K)
    digits, T = encode_scaled_many(
        cfg.params, cfg.scaling, y.reshape(K, d), dither_ids=ids
    )
    return QuantizedVector(
        digits=digits,
        T=T,
        norm=norm,
        dither_ids=ids,
        layer_idx=digits_to_index(digits, q),
        dither_idx=None if ids is None else digits_to_index(ids, q),
    )


def reconstruct_chunks(cfg: PipelineConfig, qv: QuantizedVector) -> np.ndarray:
    """Decode every chunk of a quantized column, shape (K, d).

    These live in the rotated, normalized frame when the pipeline rotates;
    they are the exact vectors whose pairwise inner products ip_approx sums.
    """
    return decode_scaled_many(
        cfg.params, cfg.scaling, qv.digits, qv.T, dither_ids=qv.dither_ids
    )


def _pair_weights(q: int, m: int, dithered: bool) -> np.ndarray:
    start = -1 if dithered else 0
    e = np.arange(start, m)
    return (float(q) ** e)[:, None] * (float(q) ** e)[None, :]


def ip_approx(
    cfg: PipelineConfig, lut: InnerProductLUT, qx: QuantizedVector, qy: QuantizedVector
) -> float:
    """Approximate inner product of two quantized columns via table lookups.

    Sums, over chunks, the looked-up inner product of the two chunk
    reconstructions times both chunks' scales, then multiplies by the
    recorded norms when the pipeline rotates.  Performs exactly K M^2 table
    reads (K (M+1)^2 when dithered).
    """
    params, q, M = cfg.params, cfg.params.q, cfg.params.M
    if (lut.family, lut.d, lut.q) != (params.lat.family, params.lat.d, q):
        raise ValueError("LUT does not match the pipeline parameters")
    if qx.digits.shape != qy.digits.shape or qx.digits.shape[0] != cfg.chunks:
        raise ValueError("quantized columns do not match the pipeline shape")
    dithered = qx.dither_idx is not None
    if dithered != (qy.dither_idx is not None):
        raise ValueError("cannot mix dithered and undithered columns")
    if cfg.rotate and (qx.norm is None or qy.norm is None):
        raise ValueError("rotating pipeline needs columns with recorded norms")

    ix, iy = qx.layer_idx, qy.layer_idx  # (K, M)
    if dithered:
        ix = np.concatenate([qx.dither_idx[:, None], ix], axis=1)
        iy = np.concatenate([qy.dither_idx[:, None], iy], axis=1)
    flat = ix[:, :, None] * lut.side + iy[:, None, :]
    vals = lut._gather(flat.reshape(-1)).reshape(flat.shape)
    if lut.values.dtype.kind == "i":
        # Exact integer combination per chunk; the dither weight 1/q^2 is
        # applied once after the integer sum.
        e = np.arange(-1 if dithered else 0, M) + (1 if dithered else 0)
        w = (q ** e.astype(np.int64))[:, None] * (q ** e.astype(np.int64))[None, :]
        per_chunk = (vals * w[None, :, :]).sum(axis=(1, 2)).astype(np.float64)
        if dithered:
            per_chunk = per_chunk / float(q**2)
    else:
        w = _pair_weights(q, M, dithered)
        per_chunk = (vals * w[None, :, :]).sum(axis=(1, 2))
    scale = cfg.scaling.scale(qx.T) * cfg.scaling.scale(qy.T)
    total = float((scale * per_chunk).sum())
    if cfg.rotate:
        total *= qx.norm * qy.norm
    return total


def matmul_approx(
    cfg: PipelineConfig, lut: InnerProductLUT, QA: QuantizedMatrix, QB: QuantizedMatrix
) -> np.ndarray:
    """Approximate A^T B for two quantized matrices, entry by entry.

    Uses a.cols * b.cols * K * M^2 table reads in total (instrumentable
    through the LUT's query counter).
    """
    for qm in (QA, QB):
        if qm.cfg.n != cfg.n or qm.cfg.params.q != cfg.params.q or qm.cfg.params.M != cfg.params.M:
            raise ValueError("quantized matrix does not match the pipeline config")
    cols_a = [QA.column(i) for i in range(QA.cols)]
    cols_b = [QB.column(j) for j in range(QB.cols)]
    out = np.empty((QA.cols, QB.cols))
    for i, cx in enumerate(cols_a):
        for j, cy in enumerate(cols_b):
            out[i, j] = ip_approx(cfg, lut, cx, cy)
    return out


_QM_MAGIC = int.from_bytes(b"NLQM", "little")
_QM_HEADER = struct.Struct("<8I2d2I2q")
_DITHER_CODE = {"none": 0, "fixed": 1, "random": 2}


def _digit_record_bytes(q: int, d: int) -> int:
    return ((q**d - 1).bit_length() + 7) // 8


def save_quantized_matrix(qm: QuantizedMatrix, path) -> None:
    """Write a quantized matrix in the fixed little-endian binary layout.

    Header, then per column and chunk each digit vector packed as its
    base-q value (first coordinate most significant) in the minimal whole
    number of little-endian bytes, then one byte of T per chunk, then the
    per-column norms when rotation is on.  Fixed dither ids ride in a short
    trailer right after the header.
    """
    cfg = qm.cfg
    q, d, M = cfg.params.q, cfg.params.lat.d, cfg.params.M
    header = _QM_HEADER.pack(
        _QM_MAGIC,
        1,
        FAMILY_IDS[cfg.params.lat.family],
        d,
        cfg.n,
        qm.cols,
        q,
        M,
        cfg.scaling.alpha,
        cfg.scaling.beta0,
        1 if cfg.rotate else 0,
        _DITHER_CODE[cfg.dither_mode],
        cfg.rotation_seed,
        cfg.dither_seed,
    )
    nrec = _digit_record_bytes(q, d)
    vals = digits_to_index(qm.digits, q)  # (cols, K, M)
    shifts = 8 * np.arange(nrec, dtype=np.uint64)
    payload = ((vals[..., None].astype(np.uint64) >> shifts) & 0xFF).astype(np.uint8)
    if qm.T.max(initial=0) > 0xFF:
        raise ValueError("retry counts exceed one byte")
    with open(path, "wb") as f:
        f.write(header)
        if cfg.dither_mode == "fixed":
            f.write(cfg.dither_ids.astype(np.uint8).tobytes())
        f.write(payload.tobytes())
        f.write(qm.T.astype(np.uint8).tobytes())
        if cfg.rotate:
            f.write(np.ascontiguousarray(qm.norms, dtype="<f8").tobytes())


def load_quantized_matrix(path, *, max_retries: int = 60) -> QuantizedMatrix:
    """Read a quantized matrix; reconstructs the pipeline config from the header.

    ``max_retries`` is not serialized (it only matters when encoding) and
    can be supplied for the reconstructed config.
    """
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < _QM_HEADER.size:
        raise ValueError("truncated quantized-matrix file")
    (
        magic, version, fam_id, d, n, cols, q, M,
        alpha, beta0, rotate, dither_code, rotation_seed, dither_seed,
    ) = _QM_HEADER.unpack_from(raw)
    if magic != _QM_MAGIC:
        raise ValueError("bad magic, not a quantized-matrix file")
    if version != 1:
        raise ValueError(f"unsupported version {version}")
    families = {v: k for k, v in FAMILY_IDS.items()}
    if fam_id not in families:
        raise ValueError(f"unknown lattice id {fam_id}")
    mode = {v: k for k, v in _DITHER_CODE.items()}.get(dither_code)
    if mode is None:
        raise ValueError(f"unknown dither mode {dither_code}")
    off = _QM_HEADER.size
    fixed_ids = None
    if mode == "fixed":
        fixed_ids = np.frombuffer(raw, dtype=np.uint8, count=d, offset=off).astype(np.int64)
        off += d
    lat = make_lattice(families[fam_id], d)
    params = HierarchicalParams(lat, q, M)
    cfg = PipelineConfig(
        params=params,
        scaling=ScalingConfig(beta0=beta0, alpha=alpha, max_retries=max_retries),
        n=n,
        rotate=bool(rotate),
        rotation_seed=rotation_seed,
        dither_mode=mode,
        dither_ids=fixed_ids,
        dither_seed=dither_seed,
    )
    K = cfg.chunks
    nrec = _digit_record_bytes(q, d)
    count = cols * K * M * nrec
    payload = np.frombuffer(raw, dtype=np.uint8, count=count, offset=off)
    off += count
    shifts = 8 * np.arange(nrec, dtype=np.uint64)
    vals = (payload.reshape(cols, K, M, nrec).astype(np.uint64) << shifts).sum(
        axis=-1, dtype=np.uint64
    )
    # Unpack base-q values back into digit vectors, most significant first.
    digits = np.empty((cols, K, M, d), dtype=np.int64)
    v = vals.astype(np.int64)
    for i in range(d - 1, -1, -1):
        digits[..., i] = v % q
        v //= q
    T = np.frombuffer(raw, dtype=np.uint8, count=cols * K, offset=off).astype(np.int64)
    off += cols * K
    T = T.reshape(cols, K)
    norms = None
    if rotate:
        norms = np.frombuffer(raw, dtype="<f8", count=cols, offset=off).copy()
        off += cols * 8
    if off != len(raw):
        raise ValueError("trailing bytes in quantized-matrix file")
    ids = None
    if mode != "none":
        ids = np.stack([_dither_digit_ids(cfg, j, K) for j in range(cols)])
    return QuantizedMatrix(cfg=cfg, digits=digits, T=T, norms=norms, dither_ids=ids)
