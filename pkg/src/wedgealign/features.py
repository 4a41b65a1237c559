"""Dense descriptor maps, the FMAP file format, and the 4-D similarity volume.

The alignment pipeline only ever consumes :class:`FeatureMap`, so the
descriptor backbone is pluggable: maps may be loaded from FMAP files written
by an external extractor, or produced by the built-in patch/gradient
extractor which keeps the pipeline self-contained.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter, map_coordinates

from .errors import BadMagic, ChannelMismatch, DimMismatch, NotNormalized
from .geometry import Point

FMAP_MAGIC = b"FMAP0001"
_NORM_TOL = 1e-3

# Built-in descriptor layout: 9x9 intensity patch at three scales plus an
# 8-bin gradient-orientation histogram per scale.
_PATCH_SIDE = 9
_SCALES = (1.0, 2.0, 4.0)
_ORI_BINS = 8


@dataclass(frozen=True)
class FeatureMap:
    """C x H x W grid of unit-normalized descriptors for one image.

    source_image_size is (height, width) in pixels of the image the grid
    covers; grid cell (r, c) is centered at pixel
    ((c + 0.5) * width / W, (r + 0.5) * height / H).
    """

    data: np.ndarray
    source_image_size: tuple[int, int]

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 3 or min(data.shape) < 1:
            raise DimMismatch(f"expected a C x H x W tensor, got {data.shape}")
        norms = np.linalg.norm(data.astype(np.float64), axis=0)
        if np.any(np.abs(norms - 1.0) > _NORM_TOL):
            worst = float(np.abs(norms - 1.0).max())
            raise NotNormalized(f"vector norms deviate from 1 by up to {worst:.2e}")
        object.__setattr__(self, "data", data)
        object.__setattr__(
            self,
            "source_image_size",
            (int(self.source_image_size[0]), int(self.source_image_size[1])),
        )

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def grid_shape(self) -> tuple[int, int]:
        return (self.data.shape[1], self.data.shape[2])


@dataclass(frozen=True)
class SimilarityVolume:
    """Pairwise cosine similarities S[proto_r, proto_c, target_r, target_c]."""

    data: np.ndarray
    proto_image_size: tuple[int, int]
    target_image_size: tuple[int, int]

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 4:
            raise DimMismatch(f"expected a 4-D volume, got shape {data.shape}")
        if float(np.abs(data).max(initial=0.0)) > 1.0 + 1e-6:
            raise ValueError("cosine similarities must lie in [-1, 1]")
        object.__setattr__(self, "data", data)

    @property
    def proto_grid_shape(self) -> tuple[int, int]:
        return (self.data.shape[0], self.data.shape[1])

    @property
    def target_grid_shape(self) -> tuple[int, int]:
        return (self.data.shape[2], self.data.shape[3])


# ---------------------------------------------------------------------------
# Grid/pixel conventions (cell centers)
# ---------------------------------------------------------------------------


def grid_to_pixel_coords(rows, cols, grid_shape, image_size):
    """Vectorized cell-center mapping; returns (xs, ys) pixel arrays."""
    gh, gw = grid_shape
    ih, iw = image_size
    xs = (np.asarray(cols, dtype=float) + 0.5) * (iw / gw)
    ys = (np.asarray(rows, dtype=float) + 0.5) * (ih / gh)
    return xs, ys


def pixel_to_grid_coords(xs, ys, grid_shape, image_size):
    """Exact algebraic inverse of grid_to_pixel_coords; returns (rows, cols)."""
    gh, gw = grid_shape
    ih, iw = image_size
    cols = np.asarray(xs, dtype=float) * (gw / iw) - 0.5
    rows = np.asarray(ys, dtype=float) * (gh / ih) - 0.5
    return rows, cols


def grid_to_pixel(coord: tuple[float, float], fmap: FeatureMap) -> Point:
    xs, ys = grid_to_pixel_coords(
        coord[0], coord[1], fmap.grid_shape, fmap.source_image_size
    )
    return Point(float(xs), float(ys))


def pixel_to_grid(point: Point, fmap: FeatureMap) -> tuple[float, float]:
    rows, cols = pixel_to_grid_coords(
        point.x, point.y, fmap.grid_shape, fmap.source_image_size
    )
    return (float(rows), float(cols))


# ---------------------------------------------------------------------------
# FMAP binary format (little-endian):
#   magic "FMAP0001" . u32 C . u32 H . u32 W . u32 src_h . u32 src_w
#   . C*H*W float32 in [c][h][w] order, unit-normalized per position.
# ---------------------------------------------------------------------------


def save_feature_map(fmap: FeatureMap, path: str | Path) -> None:
    c, h, w = fmap.data.shape
    sh, sw = fmap.source_image_size
    with open(path, "wb") as fh:
        fh.write(FMAP_MAGIC)
        fh.write(struct.pack("<5I", c, h, w, sh, sw))
        fh.write(np.ascontiguousarray(fmap.data, dtype="<f4").tobytes())


def load_feature_map(path: str | Path) -> FeatureMap:
    """Read and validate an FMAP file.

    Raises:
        BadMagic: wrong leading magic bytes.
        DimMismatch: header dimensions disagree with the payload size.
        NotNormalized: any vector norm outside [0.999, 1.001].
    """
    raw = Path(path).read_bytes()
    if raw[:8] != FMAP_MAGIC:
        raise BadMagic(f"{path}: expected magic {FMAP_MAGIC!r}")
    header_end = 8 + struct.calcsize("<5I")
    if len(raw) < header_end:
        raise DimMismatch(f"{path}: truncated header")
    c, h, w, sh, sw = struct.unpack("<5I", raw[8:header_end])
    if min(c, h, w) < 1:
        raise DimMismatch(f"{path}: non-positive dimensions {(c, h, w)}")
    expected = c * h * w * 4
    payload = raw[header_end:]
    if len(payload) != expected:
        raise DimMismatch(
            f"{path}: payload holds {len(payload)} bytes, expected {expected}"
        )
    data = np.frombuffer(payload, dtype="<f4").reshape(c, h, w)
    return FeatureMap(data=data, source_image_size=(sh, sw))


# ---------------------------------------------------------------------------
# Built-in extractor
# ---------------------------------------------------------------------------


def _orientation_histograms(patches: np.ndarray) -> np.ndarray:
    """Magnitude-weighted 8-bin orientation histograms per 9x9 patch."""
    gy, gx = np.gradient(patches, axis=(-2, -1))
    mag = np.hypot(gx, gy)
    ang = np.arctan2(gy, gx)
    bins = np.floor((ang + np.pi) / (2.0 * np.pi) * _ORI_BINS).astype(int)
    bins[bins == _ORI_BINS] = _ORI_BINS - 1  # angle exactly +pi
    hist = np.zeros(patches.shape[:-2] + (_ORI_BINS,))
    for b in range(_ORI_BINS):
        hist[..., b] = np.where(bins == b, mag, 0.0).sum(axis=(-2, -1))
    return hist


def extract_builtin_features(
    image: np.ndarray, grid: tuple[int, int] = (64, 64)
) -> FeatureMap:
    """Multi-scale patch descriptors on a regular grid.

    For each grid cell, the descriptor concatenates the bilinearly resampled
    9x9 intensity patch at three scales (spanning 1x, 2x and 4x the cell
    size, each mean-subtracted) with an 8-bin gradient-orientation histogram
    per scale. The image is Gaussian-smoothed per scale before resampling so
    the sparse taps integrate rather than alias fine detail, and the patch
    and histogram halves are equalized in energy before the final L2
    normalization. Cells whose descriptor vanishes (constant input) fall
    back to a fixed uniform unit vector so that the map stays
    unit-normalized. Deterministic: no randomness is involved.
    """
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2 or img.size == 0:
        raise ValueError("expected a non-empty grayscale image")
    gh, gw = grid
    ih, iw = img.shape
    cell_h, cell_w = ih / gh, iw / gw
    cy = (np.arange(gh) + 0.5) * cell_h
    cx = (np.arange(gw) + 0.5) * cell_w

    parts = []
    hists = []
    taps = np.linspace(-0.5, 0.5, _PATCH_SIDE)
    for scale in _SCALES:
        smoothed = gaussian_filter(img, scale * max(cell_h, cell_w) / _PATCH_SIDE)
        rows = cy[:, None, None, None] + (taps * scale * cell_h)[None, None, :, None]
        cols = cx[None, :, None, None] + (taps * scale * cell_w)[None, None, None, :]
        rows, cols = np.broadcast_arrays(rows, cols)
        patches = map_coordinates(
            smoothed, [rows.ravel(), cols.ravel()], order=1, mode="nearest"
        ).reshape(gh, gw, _PATCH_SIDE, _PATCH_SIDE)
        patches = patches - patches.mean(axis=(-2, -1), keepdims=True)
        parts.append(patches.reshape(gh, gw, -1))
        hists.append(_orientation_histograms(patches))

    def _unit(block: np.ndarray) -> np.ndarray:
        return block / np.maximum(np.linalg.norm(block, axis=-1, keepdims=True), 1e-8)

    patch_part = np.concatenate(parts, axis=-1)
    hist_part = np.concatenate(hists, axis=-1)
    desc = np.concatenate([_unit(patch_part), _unit(hist_part)], axis=-1)
    norms = np.linalg.norm(desc, axis=-1, keepdims=True)
    desc = desc / np.maximum(norms, 1e-8)
    flat = norms[..., 0] < 1e-8
    if np.any(flat):
        desc[flat] = 1.0 / np.sqrt(desc.shape[-1])
    return FeatureMap(
        data=np.ascontiguousarray(desc.transpose(2, 0, 1), dtype=np.float32),
        source_image_size=(ih, iw),
    )


def similarity_volume(proto: FeatureMap, target: FeatureMap) -> SimilarityVolume:
    """Dense pairwise cosine similarities between two feature grids.

    Raises:
        ChannelMismatch: differing channel counts.
        DimMismatch: differing grid shapes.
    """
    if proto.channels != target.channels:
        raise ChannelMismatch(
            f"proto has C={proto.channels}, target has C={target.channels}"
        )
    if proto.grid_shape != target.grid_shape:
        raise DimMismatch(
            f"proto grid {proto.grid_shape} != target grid {target.grid_shape}"
        )
    c = proto.channels
    gh, gw = proto.grid_shape
    # Accumulate in float64 so stored values stay within [-1, 1] even for
    # wide descriptors; the clip only removes sub-1e-14 rounding spill.
    p = proto.data.reshape(c, -1).astype(np.float64)
    t = target.data.reshape(c, -1).astype(np.float64)
    s = np.clip(p.T @ t, -1.0, 1.0).astype(np.float32).reshape(gh, gw, gh, gw)
    return SimilarityVolume(
        data=s,
        proto_image_size=proto.source_image_size,
        target_image_size=target.source_image_size,
    )
