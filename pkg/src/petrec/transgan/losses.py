"""Training objectives: Charbonnier, dual perceptual, and least-squares
adversarial losses, plus their weighted total."""

from __future__ import annotations

from dataclasses import dataclass

import torch

from ..errors import ShapeError

DEFAULT_EPS = 1e-8
DEFAULT_ALPHA = 100.0
DEFAULT_BETA = 100.0


@dataclass
class LossBundle:
    l_gan_d: float
    l_gan_g: float
    l_charbonnier: float
    l_perceptual: float
    l_total_g: float
    step: int


def charbonnier_loss(a: torch.Tensor, b: torch.Tensor, eps: float = DEFAULT_EPS) -> torch.Tensor:
    """Mean of sqrt((a-b)^2 + eps^2); a smooth L1 surrogate, >= eps with
    equality iff a == b."""
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch: {tuple(a.shape)} vs {tuple(b.shape)}")
    if eps <= 0:
        raise ValueError(f"eps must be > 0, got {eps}")
    return torch.sqrt((a - b) ** 2 + eps**2).mean()


def perceptual_loss(enc16, enc19, y: torch.Tensor, g: torch.Tensor,
                    eps: float = DEFAULT_EPS) -> torch.Tensor:
    """Charbonnier distance between frozen-encoder feature maps, summed over
    the two encoder topologies."""
    if y.shape != g.shape:
        raise ShapeError(f"shape mismatch: {tuple(y.shape)} vs {tuple(g.shape)}")
    total = charbonnier_loss(enc16(y), enc16(g), eps)
    return total + charbonnier_loss(enc19(y), enc19(g), eps)


def adversarial_losses(
    score_real: torch.Tensor, score_fake: torch.Tensor
) -> tuple[torch.Tensor, torch.Tensor]:
    """Least-squares GAN objectives.

    l_d      = mean((score_real - 1)^2) + mean(score_fake^2)
    l_g_adv  = mean((score_fake - 1)^2)

    Both are minimized (d at real==1/fake==0, g at fake==1).
    """
    if score_real.shape != score_fake.shape:
        raise ShapeError(
            f"shape mismatch: {tuple(score_real.shape)} vs {tuple(score_fake.shape)}"
        )
    l_d = ((score_real - 1.0) ** 2).mean() + (score_fake**2).mean()
    l_g_adv = ((score_fake - 1.0) ** 2).mean()
    return l_d, l_g_adv


def total_generator_loss(l_g_adv, l_charb, l_perc,
                         alpha: float = DEFAULT_ALPHA, beta: float = DEFAULT_BETA):
    """l_g_adv + alpha * Charbonnier + beta * perceptual."""
    if alpha < 0 or beta < 0:
        raise ValueError("alpha and beta must be >= 0")
    return l_g_adv + alpha * l_charb + beta * l_perc
