"""Touchless-fingerprint image toolkit.

Two image chains (photometric augmentation and multi-stage ridge
enhancement), dataset inventory/splitting, and classifier evaluation
reports, tied together by the `touchprint` CLI.
"""

from .dataset import Manifest, SampleRecord, assign_splits, read_manifest, scan_root, write_manifest
from .errors import (
    ConfigError,
    ImageError,
    ManifestError,
    MetricsError,
    PipelineError,
    ToolError,
)
from .image import Image, Kernel, SignedImage, StructuringElement, load_image, save_image
from .metrics import (
    ConfusionMatrix,
    EvalSummary,
    HistoryCurve,
    PredictionRecord,
    compare_reports,
    confusion,
    export_curves,
    summarize,
)
from .ops import (
    Rect,
    clahe,
    convolve,
    crop,
    dilate,
    invert,
    laplacian,
    normalize_stretch,
    normalize_unit,
    photometric_adjust,
    resize_bilinear,
    roi_from_mask,
    sharpen,
    threshold_otsu,
    to_grayscale,
)
from .pipeline import (
    PipelineConfig,
    StageSpec,
    VariantSpec,
    default_direct_config,
    default_indirect_config,
    run_batch,
    run_pipeline,
)
from .sift import (
    Keypoint,
    SiftParams,
    build_scale_space,
    compute_descriptors,
    detect_and_describe,
    detect_keypoints,
    match_descriptors,
)

__version__ = "0.1.0"
