"""Position-specific deformable aggregation over a slice window.

The fused feature map at position p is

    F(p) = sum_t sum_s K[t, s] * C_t(p + p_s + delta[t, p, s])

where p_s ranges over the regular S x S taps and delta is the predicted
per-position offset. Fractional sample positions are evaluated by bilinear
interpolation; samples outside [0, H) x [0, W) contribute zero, so the
zero-offset case reduces exactly to zero-padded convolution. Everything is
differentiable w.r.t. the window, the offsets, and the kernel.

Offset channel layout: for tap s (row-major over the S x S grid), channels
(2s, 2s+1) hold (dy, dx).
"""

from __future__ import annotations

import torch

from ..errors import ShapeError


def bilinear_sample_zero(img: torch.Tensor, ys: torch.Tensor, xs: torch.Tensor) -> torch.Tensor:
    """Sample img (..., H, W) at fractional (ys, xs); zero outside bounds.

    img may be batched (B, H, W) with ys/xs of shape (B, H, W), or plain
    (H, W) with matching coordinate shapes.
    """
    h, w = img.shape[-2], img.shape[-1]
    y0 = torch.floor(ys)
    x0 = torch.floor(xs)
    wy = ys - y0
    wx = xs - x0

    out = torch.zeros_like(ys)
    for dy, dx, wgt in (
        (0, 0, (1 - wy) * (1 - wx)),
        (0, 1, (1 - wy) * wx),
        (1, 0, wy * (1 - wx)),
        (1, 1, wy * wx),
    ):
        yy = y0 + dy
        xx = x0 + dx
        inside = (yy >= 0) & (yy < h) & (xx >= 0) & (xx < w)
        yc = yy.clamp(0, h - 1).long()
        xc = xx.clamp(0, w - 1).long()
        if img.ndim == 3:
            b = torch.arange(img.shape[0], device=img.device).view(-1, 1, 1)
            vals = img[b, yc, xc]
        else:
            vals = img[yc, xc]
        out = out + wgt * inside.to(ys.dtype) * vals
    return out


def deformable_aggregate(
    window: torch.Tensor, offsets: torch.Tensor, kernel: torch.Tensor
) -> torch.Tensor:
    """Fuse a slice window with per-position deformable sampling.

    window:  (T, H, W) or (B, T, H, W)
    offsets: (T, 2*S*S, H, W) or (B, T, 2*S*S, H, W)
    kernel:  (O, T, S, S)

    Returns (O, H, W) or (B, O, H, W).
    """
    batched = window.ndim == 4
    if not batched:
        window = window[None]
        offsets = offsets[None]
    if window.ndim != 4 or offsets.ndim != 5 or kernel.ndim != 4:
        raise ShapeError("window/offsets/kernel ranks must be 3or4 / 4or5 / 4")
    bsz, t_count, h, w = window.shape
    o_count, kt, s, s2 = kernel.shape
    if s != s2 or s % 2 == 0:
        raise ShapeError(f"kernel taps must be odd square, got {s}x{s2}")
    if kt != t_count:
        raise ShapeError(f"kernel covers {kt} slices, window has {t_count}")
    if offsets.shape != (bsz, t_count, 2 * s * s, h, w):
        raise ShapeError(
            f"offsets shape {tuple(offsets.shape)} != "
            f"({bsz}, {t_count}, {2 * s * s}, {h}, {w})"
        )

    half = s // 2
    base_y = torch.arange(h, dtype=window.dtype, device=window.device).view(1, h, 1)
    base_x = torch.arange(w, dtype=window.dtype, device=window.device).view(1, 1, w)

    samples = []
    for t in range(t_count):
        for tap in range(s * s):
            i, j = divmod(tap, s)
            ys = base_y + (i - half) + offsets[:, t, 2 * tap]
            xs = base_x + (j - half) + offsets[:, t, 2 * tap + 1]
            samples.append(bilinear_sample_zero(window[:, t], ys, xs))
    stacked = torch.stack(samples, dim=1)  # (B, T*S*S, H, W)
    fused = torch.einsum("ok,bkhw->bohw", kernel.reshape(o_count, -1), stacked)
    return fused if batched else fused[0]
