"""FMAP binary writer (little-endian).

Layout: magic "FMAP0001" . u32 C . u32 H . u32 W . u32 src_h . u32 src_w .
C*H*W float32 values in [c][h][w] order. Vectors must be unit-normalized
per spatial position; the consuming pipeline validates norms on load.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

FMAP_MAGIC = b"FMAP0001"


def write_fmap(path: str | Path, data: np.ndarray, source_image_size: tuple[int, int]) -> None:
    data = np.ascontiguousarray(data, dtype="<f4")
    if data.ndim != 3:
        raise ValueError(f"expected a C x H x W tensor, got shape {data.shape}")
    c, h, w = data.shape
    sh, sw = source_image_size
    with open(path, "wb") as fh:
        fh.write(FMAP_MAGIC)
        fh.write(struct.pack("<5I", c, h, w, int(sh), int(sw)))
        fh.write(data.tobytes())
