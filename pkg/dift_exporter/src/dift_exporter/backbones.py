"""Latent-denoiser backbones that expose upscaling-block activations.

A backbone encodes a 512x512 RGB image into a 64x64 latent and exposes
`denoise(latent, timestep, prompt)`, returning the activations of its second
and third upscaling blocks. Two implementations exist:

* BuiltinBackbone - a small self-contained torch network with fixed seeded
  weights. It is not a trained generative model; it exists so exports are
  runnable and deterministic offline while honoring the capture protocol
  (noising schedule, timestep/prompt conditioning, block capture, channel
  widths 1280 + 640).
* DiffusersBackbone - an adapter for real latent text-to-image checkpoints
  via the `diffusers` library (any fine-tuned derivative works; the
  checkpoint id is passed through). Only importable when that library is
  installed.
"""

from __future__ import annotations

import hashlib
import math

import torch
from torch import nn

from .errors import ModelLoadError

BUILTIN_PREFIX = "builtin:"
# Channel widths of the captured upscaling blocks; 1280 + 640 = 1920 total,
# matching the standard latent-diffusion denoiser layout.
BUILTIN_CAPTURE_CHANNELS = (1280, 640)


def _seed_from(text: str) -> int:
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "little")


def _embed_text(prompt: str, dim: int) -> torch.Tensor:
    gen = torch.Generator().manual_seed(_seed_from("prompt:" + prompt))
    v = torch.randn(dim, generator=gen)
    return v / v.norm()


def _timestep_embedding(timestep: int, dim: int) -> torch.Tensor:
    half = dim // 2
    freqs = torch.exp(-math.log(10_000.0) * torch.arange(half, dtype=torch.float32) / half)
    angles = timestep * freqs
    return torch.cat([angles.sin(), angles.cos()])


class BuiltinBackbone(nn.Module):
    """Deterministic stand-in denoiser with the standard capture layout."""

    layer_names = ("up_blocks.1", "up_blocks.2")
    layer_channels = BUILTIN_CAPTURE_CHANNELS

    def __init__(self, variant: str = "small"):
        super().__init__()
        self.variant = variant
        self.stem = nn.Conv2d(4, 32, 3, padding=1)
        self.down1 = nn.Conv2d(32, 48, 3, stride=2, padding=1)
        self.down2 = nn.Conv2d(48, 64, 3, stride=2, padding=1)
        self.cond = nn.Linear(64, 64)
        self.up1 = nn.Conv2d(64, 48, 3, padding=1)
        self.capture1 = nn.Conv2d(48, BUILTIN_CAPTURE_CHANNELS[0], 1)
        self.up2 = nn.Conv2d(48, 32, 3, padding=1)
        self.capture2 = nn.Conv2d(32, BUILTIN_CAPTURE_CHANNELS[1], 1)
        self._init_deterministic(_seed_from("weights:" + variant))
        self.eval()

    def _init_deterministic(self, seed: int) -> None:
        gen = torch.Generator().manual_seed(seed)
        for name, param in sorted(self.named_parameters()):
            fan_in = max(1, param.numel() // param.shape[0])
            with torch.no_grad():
                param.copy_(
                    torch.randn(param.shape, generator=gen) / math.sqrt(fan_in)
                )

    @staticmethod
    def encode(images: torch.Tensor) -> torch.Tensor:
        """RGB (B, 3, 512, 512) in [0, 1] -> latent (B, 4, 64, 64)."""
        pooled = torch.nn.functional.avg_pool2d(images, 8)
        gray = pooled.mean(dim=1, keepdim=True)
        return torch.cat([pooled, gray], dim=1) * 2.0 - 1.0

    def denoise(
        self, latents: torch.Tensor, timestep: int, prompt: str
    ) -> list[torch.Tensor]:
        act = nn.functional.silu
        with torch.no_grad():
            h = act(self.stem(latents))
            h = act(self.down1(h))
            h = act(self.down2(h))
            cond = _timestep_embedding(timestep, 64) + _embed_text(prompt, 64)
            h = h + self.cond(cond).view(1, -1, 1, 1)
            h = nn.functional.interpolate(h, scale_factor=2, mode="nearest")
            h = act(self.up1(h))
            first = self.capture1(h)
            h = nn.functional.interpolate(h, scale_factor=2, mode="nearest")
            h = act(self.up2(h))
            second = self.capture2(h)
        return [first, second]


class DiffusersBackbone:
    """Adapter over a pretrained latent text-to-image checkpoint.

    Captures the outputs of the denoiser's second and third upscaling blocks
    with forward hooks. Requires the `diffusers` and `transformers`
    libraries and a fetchable checkpoint; any failure surfaces as
    ModelLoadError.
    """

    layer_names = ("up_blocks.1", "up_blocks.2")

    def __init__(self, checkpoint: str, device: str = "cpu"):
        try:
            from diffusers import AutoencoderKL, UNet2DConditionModel
            from transformers import CLIPTextModel, CLIPTokenizer
        except ImportError as exc:
            raise ModelLoadError(
                f"the 'diffusers' library is required for checkpoint {checkpoint!r}"
            ) from exc
        try:
            self.vae = AutoencoderKL.from_pretrained(checkpoint, subfolder="vae").to(device)
            self.unet = UNet2DConditionModel.from_pretrained(
                checkpoint, subfolder="unet"
            ).to(device)
            self.tokenizer = CLIPTokenizer.from_pretrained(checkpoint, subfolder="tokenizer")
            self.text_encoder = CLIPTextModel.from_pretrained(
                checkpoint, subfolder="text_encoder"
            ).to(device)
        except Exception as exc:  # checkpoint missing, offline, wrong layout
            raise ModelLoadError(f"cannot load checkpoint {checkpoint!r}: {exc}") from exc
        self.device = device
        self.vae.eval()
        self.unet.eval()
        self.text_encoder.eval()
        self.layer_channels = tuple(
            self.unet.up_blocks[i].resnets[-1].out_channels for i in (1, 2)
        )

    def encode(self, images: torch.Tensor) -> torch.Tensor:
        with torch.no_grad():
            posterior = self.vae.encode(images.to(self.device) * 2.0 - 1.0)
            return posterior.latent_dist.mean * self.vae.config.scaling_factor

    def _prompt_states(self, prompt: str) -> torch.Tensor:
        tokens = self.tokenizer(
            prompt,
            padding="max_length",
            max_length=self.tokenizer.model_max_length,
            truncation=True,
            return_tensors="pt",
        )
        with torch.no_grad():
            return self.text_encoder(tokens.input_ids.to(self.device))[0]

    def denoise(self, latents: torch.Tensor, timestep: int, prompt: str) -> list:
        captured: dict[int, torch.Tensor] = {}

        def hook(index):
            def _capture(module, args, output):
                captured[index] = output

            return _capture

        handles = [
            self.unet.up_blocks[i].register_forward_hook(hook(i)) for i in (1, 2)
        ]
        try:
            with torch.no_grad():
                self.unet(
                    latents.to(self.device),
                    torch.tensor([timestep], device=self.device),
                    encoder_hidden_states=self._prompt_states(prompt),
                )
        finally:
            for h in handles:
                h.remove()
        return [captured[1], captured[2]]


def resolve_backbone(checkpoint: str, device: str = "cpu"):
    """Map a checkpoint id to a backbone instance.

    `builtin:<variant>` ids resolve to the self-contained deterministic
    backbone; anything else is treated as a latent-diffusion checkpoint id
    for the diffusers adapter.
    """
    if checkpoint.startswith(BUILTIN_PREFIX):
        return BuiltinBackbone(variant=checkpoint[len(BUILTIN_PREFIX):] or "small")
    return DiffusersBackbone(checkpoint, device=device)
