"""Foveated image tokenization toolkit.

Variable-resolution patch grids around a point prompt, exact box-filter
downsampling, soft segmentation losses, a single-point evaluation protocol,
an analytic transformer FLOPs model, and a miniature encoder/decoder with
numeric self-checks.
"""

from .pattern import (
    FoveationLevel,
    FoveationPattern,
    PatchSpec,
    PatternError,
    default_pattern,
    enumerate_patches,
    kept_counts,
    make_pattern,
    parse_pattern,
    pattern_size,
    pixel_count,
    serialize_pattern,
    stride_at,
    token_count,
    validate,
)
from .tokenizer import (
    CropPlacement,
    FoveatedMask,
    Image,
    IntegralImage,
    TokenTensor,
    crop_with_padding,
    detokenize,
    downsample_mask,
    tokenize,
)
from .tokenfile import TokenFileError, read_tokens, write_tokens
from .metrics import (
    LossWeights,
    combined_loss,
    dice_loss,
    expected_iou,
    focal_loss,
    perturb_prompt,
    select_prompt,
)
from .evaluate import OracleModel, evaluate_dataset, reproject_mask

__version__ = "0.1.0"

__all__ = [
    "FoveationLevel",
    "FoveationPattern",
    "PatchSpec",
    "PatternError",
    "default_pattern",
    "enumerate_patches",
    "kept_counts",
    "make_pattern",
    "parse_pattern",
    "pattern_size",
    "pixel_count",
    "serialize_pattern",
    "stride_at",
    "token_count",
    "validate",
    "CropPlacement",
    "FoveatedMask",
    "Image",
    "IntegralImage",
    "TokenTensor",
    "crop_with_padding",
    "detokenize",
    "downsample_mask",
    "tokenize",
    "TokenFileError",
    "read_tokens",
    "write_tokens",
    "LossWeights",
    "combined_loss",
    "dice_loss",
    "expected_iou",
    "focal_loss",
    "perturb_prompt",
    "select_prompt",
    "OracleModel",
    "evaluate_dataset",
    "reproject_mask",
]
