"""wedgealign: snap skeleton-annotated prototype glyphs onto sign images.

The pipeline aligns a prototype glyph (font image plus stroke skeleton) to
a photographed handwritten sign in three stages: dense feature similarities
feed mutual nearest-neighbor correspondences, a multi-run RANSAC affine fit
gives the global placement, and per-stroke projective refinement snaps
individual strokes into place.
"""

__version__ = "0.1.0"

from . import errors
from .correspondence import Correspondence, best_buddies, filter_foreground
from .evaluation import (
    Annotation,
    MetricReport,
    evaluate_corpus,
    match_keypoints,
)
from .features import (
    FeatureMap,
    SimilarityVolume,
    extract_builtin_features,
    grid_to_pixel,
    load_feature_map,
    pixel_to_grid,
    save_feature_map,
    similarity_volume,
)
from .geometry import (
    AffineTransform,
    Point,
    Skeleton,
    Stroke,
    StrokeTransform,
    apply_affine,
    apply_projective,
    fit_affine_least_squares,
    load_skeleton,
    save_skeleton,
    transform_skeleton,
)
from .global_align import (
    GlobalAlignment,
    RansacConfig,
    global_align,
    ransac_affine,
    spread_score,
)
from .pipeline import AlignmentResult, PipelineConfig, align_sign, align_tablet
from .refine import (
    RefineConfig,
    RefinementResult,
    loss_and_gradient,
    refine,
    sample_skeleton_points,
    softmax_field,
)
from .saliency import SaliencyMap, compute_saliency
from .synth import PerturbSpec, SynthCase, demo_skeleton, make_case, render_skeleton

__all__ = [
    "__version__",
    "errors",
    "AffineTransform",
    "AlignmentResult",
    "Annotation",
    "Correspondence",
    "FeatureMap",
    "GlobalAlignment",
    "MetricReport",
    "PerturbSpec",
    "PipelineConfig",
    "Point",
    "RansacConfig",
    "RefineConfig",
    "RefinementResult",
    "SaliencyMap",
    "SimilarityVolume",
    "Skeleton",
    "Stroke",
    "StrokeTransform",
    "SynthCase",
    "align_sign",
    "align_tablet",
    "apply_affine",
    "apply_projective",
    "best_buddies",
    "compute_saliency",
    "demo_skeleton",
    "evaluate_corpus",
    "extract_builtin_features",
    "filter_foreground",
    "fit_affine_least_squares",
    "global_align",
    "grid_to_pixel",
    "load_feature_map",
    "load_skeleton",
    "loss_and_gradient",
    "make_case",
    "match_keypoints",
    "pixel_to_grid",
    "ransac_affine",
    "refine",
    "render_skeleton",
    "sample_skeleton_points",
    "save_feature_map",
    "save_skeleton",
    "similarity_volume",
    "softmax_field",
    "spread_score",
    "transform_skeleton",
]
