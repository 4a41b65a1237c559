"""Forward diffusion schedule used when noising images for feature capture."""

from __future__ import annotations

import torch

# Scaled-linear schedule over 1000 steps, the latent-diffusion convention.
NUM_TRAIN_TIMESTEPS = 1000
BETA_START = 0.00085
BETA_END = 0.012


def alphas_cumprod(device: torch.device | str = "cpu") -> torch.Tensor:
    betas = (
        torch.linspace(
            BETA_START**0.5, BETA_END**0.5, NUM_TRAIN_TIMESTEPS, dtype=torch.float64
        )
        ** 2
    )
    return torch.cumprod(1.0 - betas, dim=0).to(device)


def add_noise(x0: torch.Tensor, noise: torch.Tensor, timestep: int) -> torch.Tensor:
    """x_t = sqrt(acp_t) * x0 + sqrt(1 - acp_t) * noise."""
    if not 0 <= timestep < NUM_TRAIN_TIMESTEPS:
        raise ValueError(f"timestep {timestep} outside [0, {NUM_TRAIN_TIMESTEPS})")
    acp = alphas_cumprod(x0.device)[timestep].to(x0.dtype)
    return acp.sqrt() * x0 + (1.0 - acp).sqrt() * noise
