"""Region-aware, instruction-driven image retouching engine."""

from .imagecore import Image, LumaPlane, gaussian_blur, psnr, to_luma
from .parammap import ParameterMap, build_map, default_map
from .retouch import TransferConfig, render
from .scoring import ATTRIBUTES, AttributeVector, score_region
from .segmentation import SegmentationMap, grid_segmentation, load_segmentation

__version__ = "0.1.0"

__all__ = [
    "ATTRIBUTES",
    "AttributeVector",
    "Image",
    "LumaPlane",
    "ParameterMap",
    "SegmentationMap",
    "TransferConfig",
    "build_map",
    "default_map",
    "gaussian_blur",
    "grid_segmentation",
    "load_segmentation",
    "psnr",
    "render",
    "score_region",
    "to_luma",
]
