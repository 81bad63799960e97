"""Codec for pixel-aligned 3D Gaussian-splat scenes.

The pipeline view-transforms each view's Gaussian map into camera-local
planes, reduces spherical-harmonic color coefficients to the components the
cameras can actually see, quantizes every plane to 14-bit indices, and
entropy-codes them (losslessly, with an optional lossy divisor stage, or via
an external HEVC binary) into a single container file.
"""

from .basis_reduction import (
    ReductionBasis,
    fit_reduction_basis,
    sample_view_directions,
    visibility_weights,
)
from .container import (
    CompressedScene,
    bit_allocation_report,
    container_size,
    read_container,
    write_container,
)
from .errors import (
    BackendUnavailableError,
    BehindCameraError,
    BitstreamError,
    CorruptionError,
    ExternalCodecError,
    FormatError,
    SplatCodecError,
    ValidationError,
)
from .metrics import load_pfm, psnr, save_pfm, save_png, ssim
from .pipeline import (
    EncodeSettings,
    decode_scene,
    encode_scene,
    evaluate,
    raw_scene_bytes,
    sweep,
)
from .plane_codec import (
    BACKEND_HEVC,
    BACKEND_LOSSLESS,
    BACKEND_LOSSY,
    EncodedPlane,
    QpConfig,
    decode_plane,
    divisor_for_qp,
    encode_plane_lossless,
    encode_plane_lossy,
)
from .quantize import QuantMeta, default_alpha, dequantize_plane, quantize_plane
from .render import RenderTarget, render
from .scene import (
    CameraView,
    GaussianCloud,
    GaussianMap,
    SceneModel,
    SceneView,
    export_ply,
    import_ply,
    load_scene,
    save_scene,
)
from .synth import SynthSpec, generate

__version__ = "0.1.0"

__all__ = [
    "BACKEND_HEVC",
    "BACKEND_LOSSLESS",
    "BACKEND_LOSSY",
    "BackendUnavailableError",
    "BehindCameraError",
    "BitstreamError",
    "CameraView",
    "CompressedScene",
    "CorruptionError",
    "EncodeSettings",
    "EncodedPlane",
    "ExternalCodecError",
    "FormatError",
    "GaussianCloud",
    "GaussianMap",
    "QpConfig",
    "QuantMeta",
    "ReductionBasis",
    "RenderTarget",
    "SceneModel",
    "SceneView",
    "SplatCodecError",
    "SynthSpec",
    "ValidationError",
    "bit_allocation_report",
    "container_size",
    "decode_plane",
    "decode_scene",
    "default_alpha",
    "dequantize_plane",
    "divisor_for_qp",
    "encode_plane_lossless",
    "encode_plane_lossy",
    "encode_scene",
    "evaluate",
    "export_ply",
    "fit_reduction_basis",
    "generate",
    "import_ply",
    "load_pfm",
    "load_scene",
    "psnr",
    "quantize_plane",
    "raw_scene_bytes",
    "read_container",
    "render",
    "sample_view_directions",
    "save_pfm",
    "save_png",
    "save_scene",
    "ssim",
    "sweep",
    "visibility_weights",
    "write_container",
]
