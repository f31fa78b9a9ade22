"""Hierarchical nested-lattice quantization with lookup-table inner products."""

from .codec import (
    HierarchicalEncoding,
    HierarchicalParams,
    SandwichReport,
    enumerate_codebook,
    h_decode,
    h_decode_exact,
    h_decode_partial,
    h_decode_partial_exact,
    h_encode,
    h_encode_many,
    nesting_radius_ratio,
    q_circ,
    reduced_nesting_ratio,
    verify_sandwich,
)
from .errors import UnencodableError
from .lattices import (
    Lattice,
    LatticePoint,
    coords_of,
    default_tie_breaker,
    in_scaled_voronoi,
    make_lattice,
    nn_quantize,
    second_moment,
)
from .lut import (
    InnerProductLUT,
    OneSidedLUT,
    build_lut,
    build_one_sided,
    digits_to_index,
    index_to_digits,
    load_lut,
    lut_ip,
    lut_ip_dithered,
    one_sided_ip,
    save_lut,
)
from .pipeline import (
    PipelineConfig,
    QuantizedMatrix,
    QuantizedVector,
    ip_approx,
    load_quantized_matrix,
    matmul_approx,
    quantize_matrix,
    quantize_vector,
    random_rotation,
    reconstruct_chunks,
    save_quantized_matrix,
)
from .scaling import (
    ScaledEncoding,
    ScalingConfig,
    decode_scaled,
    dither_point,
    empirical_rate,
    encode_scaled,
)
from .voronoi import VoronoiCodeParams, vc_decode, vc_encode

__version__ = "0.1.0"

__all__ = [
    "HierarchicalEncoding",
    "HierarchicalParams",
    "InnerProductLUT",
    "Lattice",
    "LatticePoint",
    "OneSidedLUT",
    "PipelineConfig",
    "QuantizedMatrix",
    "QuantizedVector",
    "SandwichReport",
    "ScaledEncoding",
    "ScalingConfig",
    "UnencodableError",
    "VoronoiCodeParams",
    "build_lut",
    "build_one_sided",
    "coords_of",
    "decode_scaled",
    "default_tie_breaker",
    "digits_to_index",
    "dither_point",
    "empirical_rate",
    "encode_scaled",
    "enumerate_codebook",
    "h_decode",
    "h_decode_exact",
    "h_decode_partial",
    "h_decode_partial_exact",
    "h_encode",
    "h_encode_many",
    "in_scaled_voronoi",
    "index_to_digits",
    "ip_approx",
    "load_lut",
    "load_quantized_matrix",
    "lut_ip",
    "lut_ip_dithered",
    "make_lattice",
    "matmul_approx",
    "nesting_radius_ratio",
    "nn_quantize",
    "one_sided_ip",
    "q_circ",
    "quantize_matrix",
    "quantize_vector",
    "random_rotation",
    "reconstruct_chunks",
    "reduced_nesting_ratio",
    "save_lut",
    "save_quantized_matrix",
    "second_moment",
    "vc_decode",
    "vc_encode",
    "verify_sandwich",
]
