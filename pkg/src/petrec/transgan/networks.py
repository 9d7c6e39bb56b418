"""Generator, discriminator, and frozen perceptual encoders.

Generator: patch embedding -> multi-head self-attention encoder (pre-norm
residual form) -> token unfolding back to a spatial map -> residual conv
blocks -> softplus head (PET uptake is non-negative).

Discriminator: conditional patch discriminator. Layer table (kernel 4,
pad 1 throughout, LeakyReLU 0.2, instance norm except first/last):

    in 2ch -> C    stride 2
    C      -> 2C   stride 2
    2C     -> 4C   stride 2
    4C     -> 8C   stride 1
    8C     -> 1    stride 1

For 64x64 inputs and C=64 this yields a 6x6 score map (70x70 receptive
field, the standard PatchGAN design).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from ..errors import InvalidSpecError, ShapeError
from ..volume import SliceWindow


@dataclass
class GeneratorConfig:
    patch_size: int = 8
    embed_dim: int = 64
    n_attention_heads: int = 4
    n_encoder_layers: int = 2
    n_resnet_blocks: int = 2
    base_channels: int = 16
    input_slices: int = 3

    def validate(self) -> None:
        if self.embed_dim % self.n_attention_heads != 0:
            raise InvalidSpecError(
                f"embed_dim {self.embed_dim} not divisible by "
                f"n_attention_heads {self.n_attention_heads}"
            )
        if self.input_slices % 2 == 0 or self.input_slices < 1:
            raise InvalidSpecError(f"input_slices must be odd >= 1, got {self.input_slices}")
        for name in ("patch_size", "embed_dim", "n_encoder_layers", "n_resnet_blocks",
                     "base_channels"):
            if getattr(self, name) < 1:
                raise InvalidSpecError(f"{name} must be >= 1")


@dataclass
class DiscriminatorConfig:
    base_channels: int = 64
    in_channels: int = 2  # conditioning L-PET slice + candidate F-PET slice


class EncoderBlock(nn.Module):
    """Pre-norm self-attention + feed-forward residual block."""

    def __init__(self, dim: int, heads: int, ff_mult: int = 4):
        super().__init__()
        self.norm1 = nn.LayerNorm(dim)
        self.attn = nn.MultiheadAttention(dim, heads, batch_first=True)
        self.norm2 = nn.LayerNorm(dim)
        self.ff = nn.Sequential(
            nn.Linear(dim, ff_mult * dim),
            nn.GELU(),
            nn.Linear(ff_mult * dim, dim),
        )

    def forward(self, x):
        h = self.norm1(x)
        h, _ = self.attn(h, h, h, need_weights=False)
        x = x + h
        return x + self.ff(self.norm2(x))


class ResBlock(nn.Module):
    def __init__(self, channels: int):
        super().__init__()
        self.conv1 = nn.Conv2d(channels, channels, 3, padding=1)
        self.conv2 = nn.Conv2d(channels, channels, 3, padding=1)

    def forward(self, x):
        h = F.relu(self.conv1(x))
        return x + self.conv2(h)


class TransformerResNetGenerator(nn.Module):
    def __init__(self, cfg: GeneratorConfig):
        super().__init__()
        cfg.validate()
        self.cfg = cfg
        p = cfg.patch_size
        self.patch_embed = nn.Conv2d(cfg.input_slices, cfg.embed_dim, p, stride=p)
        self.encoder = nn.ModuleList(
            EncoderBlock(cfg.embed_dim, cfg.n_attention_heads)
            for _ in range(cfg.n_encoder_layers)
        )
        self.unfold = nn.ConvTranspose2d(cfg.embed_dim, cfg.base_channels, p, stride=p)
        self.blocks = nn.Sequential(*(ResBlock(cfg.base_channels)
                                      for _ in range(cfg.n_resnet_blocks)))
        self.head = nn.Conv2d(cfg.base_channels, 1, 3, padding=1)
        self._pos_cache: dict[int, torch.Tensor] = {}

    def _positional(self, n_tokens: int, device) -> torch.Tensor:
        # fixed sinusoidal encoding, sized to the token grid on first use
        if n_tokens not in self._pos_cache:
            dim = self.cfg.embed_dim
            pos = torch.arange(n_tokens, dtype=torch.float32)[:, None]
            idx = torch.arange(0, dim, 2, dtype=torch.float32)[None, :]
            angle = pos / torch.pow(10000.0, idx / dim)
            enc = torch.zeros(1, n_tokens, dim)
            enc[0, :, 0::2] = torch.sin(angle)
            enc[0, :, 1::2] = torch.cos(angle[:, : dim // 2])
            self._pos_cache[n_tokens] = enc
        return self._pos_cache[n_tokens].to(device)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """(B, input_slices, H, W) -> (B, 1, H, W), non-negative."""
        if x.ndim != 4 or x.shape[1] != self.cfg.input_slices:
            raise ShapeError(
                f"expected (B, {self.cfg.input_slices}, H, W), got {tuple(x.shape)}"
            )
        _, _, h, w = x.shape
        p = self.cfg.patch_size
        if h % p or w % p:
            raise ShapeError(f"H={h}, W={w} not divisible by patch size {p}")
        tok = self.patch_embed(x)  # (B, E, h/p, w/p)
        gh, gw = tok.shape[2], tok.shape[3]
        tok = tok.flatten(2).transpose(1, 2)  # (B, N, E)
        tok = tok + self._positional(gh * gw, tok.device)
        for block in self.encoder:
            tok = block(tok)
        fmap = tok.transpose(1, 2).reshape(-1, self.cfg.embed_dim, gh, gw)
        fmap = F.relu(self.unfold(fmap))
        fmap = self.blocks(fmap)
        return F.softplus(self.head(fmap))


class PatchDiscriminator(nn.Module):
    def __init__(self, cfg: DiscriminatorConfig):
        super().__init__()
        c = cfg.base_channels
        self.net = nn.Sequential(
            nn.Conv2d(cfg.in_channels, c, 4, stride=2, padding=1),
            nn.LeakyReLU(0.2),
            nn.Conv2d(c, 2 * c, 4, stride=2, padding=1),
            nn.InstanceNorm2d(2 * c),
            nn.LeakyReLU(0.2),
            nn.Conv2d(2 * c, 4 * c, 4, stride=2, padding=1),
            nn.InstanceNorm2d(4 * c),
            nn.LeakyReLU(0.2),
            nn.Conv2d(4 * c, 8 * c, 4, stride=1, padding=1),
            nn.InstanceNorm2d(8 * c),
            nn.LeakyReLU(0.2),
            nn.Conv2d(8 * c, 1, 4, stride=1, padding=1),
        )

    def forward(self, cond: torch.Tensor, candidate: torch.Tensor) -> torch.Tensor:
        """(B, 1, H, W) x2, channel-concatenated -> (B, 1, h', w') score map."""
        if cond.shape != candidate.shape:
            raise ShapeError(f"shape mismatch: {tuple(cond.shape)} vs {tuple(candidate.shape)}")
        return self.net(torch.cat([cond, candidate], dim=1))


_VGG16_PLAN = [64, 64, "M", 128, 128, "M", 256, 256, 256]
_VGG19_PLAN = [64, 64, "M", 128, 128, "M", 256, 256, 256, 256]


class PerceptualEncoder(nn.Module):
    """VGG-topology feature trunk truncated before the third pooling stage.

    Frozen: parameters never receive gradients. Weights come from an optional
    state-dict file; otherwise seeded-random initialization is used (a
    documented fidelity reduction relative to ImageNet pretraining).
    Single-channel inputs are replicated to the 3-channel stem.
    """

    def __init__(self, plan: list, weights_path: str | None = None, seed: int = 0):
        super().__init__()
        torch.manual_seed(seed)
        layers: list[nn.Module] = []
        in_ch = 3
        for item in plan:
            if item == "M":
                layers.append(nn.MaxPool2d(2))
            else:
                layers.append(nn.Conv2d(in_ch, item, 3, padding=1))
                layers.append(nn.ReLU())
                in_ch = item
        self.features = nn.Sequential(*layers)
        if weights_path is not None:
            state = torch.load(weights_path, map_location="cpu", weights_only=True)
            self.load_state_dict(state)
        self.requires_grad_(False)
        self.eval()

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.ndim == 2:
            x = x[None, None]
        elif x.ndim == 3:
            x = x[:, None]
        if x.shape[1] == 1:
            x = x.expand(-1, 3, -1, -1)
        return self.features(x)


def build_generator(cfg: GeneratorConfig, seed: int) -> TransformerResNetGenerator:
    torch.manual_seed(seed)
    return TransformerResNetGenerator(cfg)


def build_discriminator(cfg: DiscriminatorConfig, seed: int) -> PatchDiscriminator:
    torch.manual_seed(seed)
    return PatchDiscriminator(cfg)


def build_perceptual_encoders(
    vgg16_weights: str | None = None,
    vgg19_weights: str | None = None,
    seed: int = 0,
) -> tuple[PerceptualEncoder, PerceptualEncoder]:
    enc16 = PerceptualEncoder(_VGG16_PLAN, vgg16_weights, seed=seed)
    enc19 = PerceptualEncoder(_VGG19_PLAN, vgg19_weights, seed=seed + 1)
    return enc16, enc19


def generator_forward(gen: TransformerResNetGenerator, window: SliceWindow) -> np.ndarray:
    """Generate the full-dose-like slice for the window's center position."""
    if window.slices.shape[0] != gen.cfg.input_slices:
        raise ShapeError(
            f"window has {window.slices.shape[0]} slices, "
            f"generator expects {gen.cfg.input_slices}"
        )
    with torch.no_grad():
        x = torch.from_numpy(np.ascontiguousarray(window.slices, dtype=np.float32))[None]
        out = gen(x)
    return out[0, 0].numpy()


def discriminator_forward(
    disc: PatchDiscriminator, x_center: np.ndarray, y_or_g: np.ndarray
) -> np.ndarray:
    """Score map for one (conditioning slice, candidate slice) pair."""
    if x_center.shape != y_or_g.shape:
        raise ShapeError(f"shape mismatch: {x_center.shape} vs {y_or_g.shape}")
    with torch.no_grad():
        a = torch.from_numpy(np.ascontiguousarray(x_center, dtype=np.float32))[None, None]
        b = torch.from_numpy(np.ascontiguousarray(y_or_g, dtype=np.float32))[None, None]
        out = disc(a, b)
    return out[0, 0].numpy()
