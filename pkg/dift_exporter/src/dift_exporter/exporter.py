"""Feature export: noising, capture, ensemble averaging, FMAP output."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np
import torch
from PIL import Image

from .backbones import resolve_backbone
from .errors import ShapeMismatch
from .fmap import write_fmap
from .schedule import NUM_TRAIN_TIMESTEPS, add_noise

IMAGE_SIDE = 512
GRID_SIDE = 64


@dataclass(frozen=True)
class ExportConfig:
    """Settings for one export run."""

    checkpoint: str = "builtin:small"
    timestep: int = 261
    ensemble_size: int = 4
    prompt: str = "cuneiform sign"
    rng_seed: int = 0
    device: str = "cpu"

    def __post_init__(self):
        if self.ensemble_size < 1:
            raise ValueError("ensemble_size must be at least 1")
        if not 0 <= self.timestep < NUM_TRAIN_TIMESTEPS:
            raise ValueError(
                f"timestep must lie in [0, {NUM_TRAIN_TIMESTEPS}), got {self.timestep}"
            )


def _load_image(image: Union[str, Path, np.ndarray]) -> torch.Tensor:
    """RGB tensor (1, 3, 512, 512) in [0, 1]; inputs are resized as needed."""
    if isinstance(image, (str, Path)):
        with Image.open(image) as img:
            rgb = img.convert("RGB")
            if rgb.size != (IMAGE_SIDE, IMAGE_SIDE):
                rgb = rgb.resize((IMAGE_SIDE, IMAGE_SIDE), Image.BILINEAR)
            arr = np.asarray(rgb, dtype=np.float32) / 255.0
    else:
        arr = np.asarray(image)
        if arr.ndim == 2:
            arr = np.stack([arr] * 3, axis=-1)
        if arr.shape[:2] != (IMAGE_SIDE, IMAGE_SIDE):
            pil = Image.fromarray(np.asarray(arr, dtype=np.uint8))
            arr = np.asarray(pil.resize((IMAGE_SIDE, IMAGE_SIDE), Image.BILINEAR))
        arr = arr.astype(np.float32)
        if arr.max() > 1.0:
            arr = arr / 255.0
    return torch.from_numpy(arr).permute(2, 0, 1).unsqueeze(0)


def _validate_activations(acts, expected_channels) -> None:
    if len(acts) != len(expected_channels):
        raise ShapeMismatch(
            f"expected {len(expected_channels)} captured blocks, got {len(acts)}"
        )
    for act, channels in zip(acts, expected_channels):
        if act.ndim != 4 or act.shape[1] != channels:
            raise ShapeMismatch(
                f"captured activation has shape {tuple(act.shape)}, "
                f"expected (1, {channels}, h, w)"
            )


def export_features(
    image: Union[str, Path, np.ndarray],
    cfg: ExportConfig,
    out_path: Union[str, Path, None] = None,
) -> np.ndarray:
    """Extract denoiser features for one image.

    Adds scheduled noise at cfg.timestep, runs the denoiser once per
    ensemble noise draw (seed cfg.rng_seed + draw index), captures the two
    upscaling-block activations, bilinearly resizes both to the 64x64 output
    grid and concatenates channels. The ensemble mean is re-normalized to
    unit length per position (the averaged vectors are not otherwise unit).
    When out_path is given the FMAP file plus a `<out>.json` sidecar naming
    the captured layers are written.

    Raises:
        ModelLoadError: unknown/unloadable checkpoint.
        ShapeMismatch: captured activations do not match the declared dims.
    """
    backbone = resolve_backbone(cfg.checkpoint, device=cfg.device)
    pixels = _load_image(image)
    latents = backbone.encode(pixels)

    accumulated = None
    for draw in range(cfg.ensemble_size):
        gen = torch.Generator().manual_seed(cfg.rng_seed + draw)
        noise = torch.randn(latents.shape, generator=gen).to(latents.device)
        noisy = add_noise(latents, noise, cfg.timestep)
        acts = backbone.denoise(noisy, cfg.timestep, cfg.prompt)
        _validate_activations(acts, backbone.layer_channels)
        resized = [
            torch.nn.functional.interpolate(
                act.float(), size=(GRID_SIDE, GRID_SIDE), mode="bilinear",
                align_corners=False,
            )
            for act in acts
        ]
        stacked = torch.cat(resized, dim=1)[0]
        accumulated = stacked if accumulated is None else accumulated + stacked

    mean = (accumulated / cfg.ensemble_size).cpu().double().numpy()
    norms = np.linalg.norm(mean, axis=0, keepdims=True)
    features = np.where(norms > 1e-12, mean / np.maximum(norms, 1e-12), 0.0)
    flat = norms[0] <= 1e-12
    if flat.any():
        features[:, flat] = 1.0 / np.sqrt(features.shape[0])
    features = features.astype(np.float32)

    if out_path is not None:
        write_fmap(out_path, features, (IMAGE_SIDE, IMAGE_SIDE))
        sidecar = {
            "checkpoint": cfg.checkpoint,
            "layer_names": list(backbone.layer_names),
            "channels_per_layer": list(backbone.layer_channels),
            "timestep": cfg.timestep,
            "ensemble_size": cfg.ensemble_size,
            "prompt": cfg.prompt,
            "rng_seed": cfg.rng_seed,
        }
        with open(str(out_path) + ".json", "w", encoding="utf-8") as fh:
            json.dump(sidecar, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return features
