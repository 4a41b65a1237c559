"""End-to-end orchestration: single-sign alignment and tablet hand copies."""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Union

import numpy as np
from PIL import Image

from .errors import StageError, WedgeAlignError
from .features import FeatureMap, extract_builtin_features, load_feature_map
from .geometry import AffineTransform, Skeleton, StrokeTransform, load_skeleton, transform_skeleton
from .global_align import GlobalAlignment, RansacConfig, global_align
from .refine import RefineConfig, RefinementResult, refine
from .render import PALETTE, skeleton_svg_group, svg_document
from .saliency import SaliencyMap, compute_saliency


@dataclass(frozen=True)
class PipelineConfig:
    """Configuration for the full alignment pipeline."""

    ransac: RansacConfig = field(default_factory=RansacConfig)
    refine: RefineConfig = field(default_factory=RefineConfig)
    grid: tuple[int, int] = (64, 64)
    feature_mode: str = "builtin"  # "builtin" | "file"
    proto_fmap: Optional[str] = None
    target_fmap: Optional[str] = None
    refine_enabled: bool = True
    fg_threshold: float = 128.0
    workers: int = 1

    def with_seed(self, seed: int) -> "PipelineConfig":
        return replace(
            self,
            ransac=replace(self.ransac, rng_seed=seed),
            refine=replace(self.refine, rng_seed=seed),
        )


@dataclass(frozen=True)
class AlignmentResult:
    """Everything the pipeline produced for one sign."""

    sign_name: str
    global_alignment: GlobalAlignment
    global_skeleton: Skeleton
    final_skeleton: Skeleton
    saliency: Optional[SaliencyMap] = None
    refinement: Optional[RefinementResult] = None

    @property
    def locals(self) -> Optional[tuple[StrokeTransform, ...]]:
        return self.refinement.locals if self.refinement else None

    def diagnostics(self) -> dict:
        g = self.global_alignment
        out = {
            "sign": self.sign_name,
            "inliers": len(g.inliers),
            "spread_score": g.spread_score,
            "p_proto": g.p_proto,
            "p_scan": g.p_scan,
            "runs": [s.to_jsonable() for s in g.run_summaries],
            "refined": self.refinement is not None,
        }
        if self.refinement:
            out["final_loss"] = self.refinement.loss_trace[-1].total
        return out


def _stage(stage_name: str):
    class _StageContext:
        def __enter__(self):
            return self

        def __exit__(self, exc_type, exc, tb):
            if exc is not None and not isinstance(exc, StageError):
                raise StageError(stage_name, exc) from exc
            return False

    return _StageContext()


def load_grayscale(path: str | Path) -> np.ndarray:
    with Image.open(path) as img:
        return np.asarray(img.convert("L"))


def _features_for(
    image: Optional[np.ndarray],
    fmap_path: Optional[str],
    cfg: PipelineConfig,
) -> FeatureMap:
    if cfg.feature_mode == "file":
        if fmap_path is None:
            raise ValueError("feature_mode 'file' requires an FMAP path")
        return load_feature_map(fmap_path)
    if image is None:
        raise ValueError("builtin features require an image")
    return extract_builtin_features(image, cfg.grid)


def align_sign(
    proto_image: np.ndarray,
    proto_skeleton: Skeleton,
    target: Union[np.ndarray, FeatureMap],
    cfg: PipelineConfig,
) -> AlignmentResult:
    """Full pipeline for one sign.

    Stages: feature extraction (or loading), multi-run global alignment,
    saliency, per-stroke refinement. With cfg.refine_enabled False the
    result stops after the global stage. Component failures are re-raised
    as StageError with the failing stage's label.
    """
    with _stage("features"):
        proto_fm = _features_for(proto_image, cfg.proto_fmap, cfg)
        if isinstance(target, FeatureMap):
            target_fm = target
        else:
            target_fm = _features_for(np.asarray(target), cfg.target_fmap, cfg)

    with _stage("global_align"):
        galign = global_align(
            lambda run: proto_fm, lambda run: target_fm, proto_image, cfg.ransac
        )
        global_skeleton = transform_skeleton(proto_skeleton, galign.transform)

    if not cfg.refine_enabled:
        return AlignmentResult(
            sign_name=proto_skeleton.sign_name,
            global_alignment=galign,
            global_skeleton=global_skeleton,
            final_skeleton=global_skeleton,
        )

    with _stage("saliency"):
        sal = compute_saliency(galign.volume, proto_image, cfg.fg_threshold)

    with _stage("refine"):
        result = refine(galign.volume, sal, proto_skeleton, galign.transform, cfg.refine)

    return AlignmentResult(
        sign_name=proto_skeleton.sign_name,
        global_alignment=galign,
        global_skeleton=global_skeleton,
        final_skeleton=result.final_skeleton,
        saliency=sal,
        refinement=result,
    )


# ---------------------------------------------------------------------------
# Tablet processing
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Box:
    x: float
    y: float
    w: float
    h: float
    sign_name: str


@dataclass(frozen=True)
class TabletSpec:
    """A tablet image with sign bounding boxes and a prototype directory.

    Each sign name must resolve to <proto_dir>/<name>.png and
    <proto_dir>/<name>.json.
    """

    image_path: str
    boxes: tuple[Box, ...]
    proto_dir: str


def load_tablet_spec(path: str | Path) -> TabletSpec:
    with open(path, "r", encoding="utf-8") as fh:
        d = json.load(fh)
    boxes = tuple(
        Box(float(b["x"]), float(b["y"]), float(b["w"]), float(b["h"]), str(b["sign_name"]))
        for b in d["boxes"]
    )
    return TabletSpec(
        image_path=str(d["image_path"]), boxes=boxes, proto_dir=str(d["proto_dir"])
    )


@dataclass(frozen=True)
class BoxResult:
    index: int
    sign_name: str
    skeleton: Optional[Skeleton] = None  # tablet frame
    alignment: Optional[AlignmentResult] = None
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass(frozen=True)
class TabletResult:
    box_results: tuple[BoxResult, ...]
    svg: str

    @property
    def all_ok(self) -> bool:
        return all(r.ok for r in self.box_results)


# Alignment always runs in a fixed square crop frame; skeletons are mapped
# back to the tablet through the inverse crop/resize affine.
_CROP_SIZE = 512


def _align_box(
    index: int, box: Box, tablet_image: np.ndarray, spec: TabletSpec, cfg: PipelineConfig
) -> BoxResult:
    h, w = tablet_image.shape
    if not (
        box.w > 0 and box.h > 0 and 0 <= box.x and 0 <= box.y
        and box.x + box.w <= w and box.y + box.h <= h
    ):
        return BoxResult(index, box.sign_name, error="box outside the tablet image")
    try:
        proto_img = load_grayscale(Path(spec.proto_dir) / f"{box.sign_name}.png")
        proto_skel = load_skeleton(Path(spec.proto_dir) / f"{box.sign_name}.json")
        crop = tablet_image[
            int(round(box.y)) : int(round(box.y + box.h)),
            int(round(box.x)) : int(round(box.x + box.w)),
        ]
        resized = np.asarray(
            Image.fromarray(crop).resize((_CROP_SIZE, _CROP_SIZE), Image.BILINEAR)
        )
        # Per-box seeds derive from the base seed so box order is irrelevant.
        box_cfg = cfg.with_seed(cfg.ransac.rng_seed + index)
        result = align_sign(proto_img, proto_skel, resized, box_cfg)
        to_tablet = AffineTransform(
            g11=box.w / _CROP_SIZE, g13=box.x, g22=box.h / _CROP_SIZE, g23=box.y
        )
        mapped = transform_skeleton(result.final_skeleton, to_tablet)
        return BoxResult(index, box.sign_name, skeleton=mapped, alignment=result)
    except (WedgeAlignError, OSError, ValueError, KeyError) as exc:
        return BoxResult(index, box.sign_name, error=str(exc))


def align_tablet(spec: TabletSpec, cfg: PipelineConfig) -> TabletResult:
    """Align every box on a tablet and compose the hand-copy SVG.

    Per-box failures are recorded and do not abort the remaining boxes.
    Output order follows the box list regardless of worker scheduling.
    """
    tablet_image = load_grayscale(spec.image_path)
    workers = max(1, cfg.workers)
    if workers == 1:
        results = [
            _align_box(i, b, tablet_image, spec, cfg) for i, b in enumerate(spec.boxes)
        ]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(_align_box, i, b, tablet_image, spec, cfg)
                for i, b in enumerate(spec.boxes)
            ]
            results = [f.result() for f in futures]
    results.sort(key=lambda r: r.index)

    groups = [
        skeleton_svg_group(
            r.skeleton, PALETTE[r.index % len(PALETTE)], label=f"box{r.index}:{r.sign_name}"
        )
        for r in results
        if r.skeleton is not None
    ]
    svg = svg_document(tablet_image.shape, groups, background_href=None)
    return TabletResult(box_results=tuple(results), svg=svg)
