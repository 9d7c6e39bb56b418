"""Offset prediction U-Net, deformable kernel, and residual reconstruction.

The offset network sees the whole concatenated window and emits the full
offset field for every slice and tap in a single forward pass. Its final
layer is zero-initialized so training starts from plain convolution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from ..errors import InvalidSpecError, ShapeError
from ..volume import SliceWindow
from .deform import deformable_aggregate


@dataclass
class SDAMConfig:
    r: int = 2
    kernel_size: int = 3  # S
    feature_channels: int = 16
    offset_base_channels: int = 16
    recon_blocks: int = 4

    def validate(self) -> None:
        if self.r < 0:
            raise InvalidSpecError("r must be >= 0")
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise InvalidSpecError(f"kernel_size must be odd >= 1, got {self.kernel_size}")
        for name in ("feature_channels", "offset_base_channels", "recon_blocks"):
            if getattr(self, name) < 1:
                raise InvalidSpecError(f"{name} must be >= 1")

    @property
    def n_slices(self) -> int:
        return 2 * self.r + 1

    @property
    def offset_channels(self) -> int:
        return self.n_slices * 2 * self.kernel_size**2


def _conv_block(in_ch, out_ch):
    return nn.Sequential(
        nn.Conv2d(in_ch, out_ch, 3, padding=1),
        nn.ReLU(),
        nn.Conv2d(out_ch, out_ch, 3, padding=1),
        nn.ReLU(),
    )


class OffsetUNet(nn.Module):
    """Depth-3 U-Net from the concatenated window to the full offset field."""

    def __init__(self, cfg: SDAMConfig):
        super().__init__()
        c = cfg.offset_base_channels
        self.cfg = cfg
        self.enc1 = _conv_block(cfg.n_slices, c)
        self.enc2 = _conv_block(c, 2 * c)
        self.enc3 = _conv_block(2 * c, 4 * c)
        self.up2 = nn.ConvTranspose2d(4 * c, 2 * c, 2, stride=2)
        self.dec2 = _conv_block(4 * c, 2 * c)
        self.up1 = nn.ConvTranspose2d(2 * c, c, 2, stride=2)
        self.dec1 = _conv_block(2 * c, c)
        self.head = nn.Conv2d(c, cfg.offset_channels, 1)
        nn.init.zeros_(self.head.weight)
        nn.init.zeros_(self.head.bias)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """(B, 2r+1, H, W) -> (B, (2r+1)*2S^2, H, W)."""
        e1 = self.enc1(x)
        e2 = self.enc2(F.max_pool2d(e1, 2))
        e3 = self.enc3(F.max_pool2d(e2, 2))
        d2 = self.dec2(torch.cat([self.up2(e3), e2], dim=1))
        d1 = self.dec1(torch.cat([self.up1(d2), e1], dim=1))
        return self.head(d1)


class ReconResNet(nn.Module):
    """Residual-block stack mapping the fused feature map to one residual slice."""

    def __init__(self, cfg: SDAMConfig):
        super().__init__()
        c = cfg.feature_channels
        self.stem = nn.Conv2d(c, c, 3, padding=1)
        blocks = []
        for _ in range(cfg.recon_blocks):
            blocks.append(_ResBlock(c))
        self.blocks = nn.Sequential(*blocks)
        self.head = nn.Conv2d(c, 1, 3, padding=1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.head(self.blocks(F.relu(self.stem(x))))


class _ResBlock(nn.Module):
    def __init__(self, channels):
        super().__init__()
        self.conv1 = nn.Conv2d(channels, channels, 3, padding=1)
        self.conv2 = nn.Conv2d(channels, channels, 3, padding=1)

    def forward(self, x):
        return x + self.conv2(F.relu(self.conv1(x)))


class SDAMModel(nn.Module):
    """Offset U-Net + deformable kernel + reconstruction network."""

    def __init__(self, cfg: SDAMConfig):
        super().__init__()
        cfg.validate()
        self.cfg = cfg
        self.offset_net = OffsetUNet(cfg)
        s = cfg.kernel_size
        kernel = torch.empty(cfg.feature_channels, cfg.n_slices, s, s)
        nn.init.kaiming_uniform_(kernel, a=5**0.5)
        self.kernel = nn.Parameter(kernel)
        self.recon_net = ReconResNet(cfg)

    def forward(self, window: torch.Tensor) -> torch.Tensor:
        """(B, 2r+1, H, W) -> (B, 1, H, W) refined center slice."""
        if window.ndim != 4 or window.shape[1] != self.cfg.n_slices:
            raise ShapeError(
                f"expected (B, {self.cfg.n_slices}, H, W), got {tuple(window.shape)}"
            )
        s = self.cfg.kernel_size
        bsz, t_count, h, w = window.shape
        raw = self.offset_net(window)
        offsets = raw.view(bsz, t_count, 2 * s * s, h, w)
        fused = deformable_aggregate(window, offsets, self.kernel)
        residual = self.recon_net(fused)
        target = window[:, self.cfg.r : self.cfg.r + 1]
        return residual + target


def build_sdam(cfg: SDAMConfig, seed: int) -> SDAMModel:
    torch.manual_seed(seed)
    return SDAMModel(cfg)


def predict_offsets(offset_net: OffsetUNet, window: SliceWindow) -> np.ndarray:
    """One forward pass yields the full offset field (2r+1, 2S^2, H, W)."""
    cfg = offset_net.cfg
    if window.slices.shape[0] != cfg.n_slices:
        raise ShapeError(
            f"window has {window.slices.shape[0]} slices, expected {cfg.n_slices}"
        )
    _, h, w = window.slices.shape
    with torch.no_grad():
        x = torch.from_numpy(np.ascontiguousarray(window.slices, dtype=np.float32))[None]
        raw = offset_net(x)
    return raw[0].view(cfg.n_slices, 2 * cfg.kernel_size**2, h, w).numpy()
