"""Image quality metrics: PSNR, SSIM, and VSMD.

VSMD (voxel-scale metabolic difference) is defined here as the relative
total absolute difference over the brain mask:

    vsmd = sum_{v in mask} |ref_v - test_v| / sum_{v in mask} ref_v

This definition is OURS: the name appears in the low-dose PET literature
without a published formula. It is dimensionless and scale-equivariant in
the error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import ShapeError
from .volume import Volume3D


@dataclass
class MetricsReport:
    psnr_db: float  # may be +inf when test == ref bitwise
    ssim: float
    vsmd: float
    n_voxels: int
    mask_coverage: float

    def to_json_dict(self) -> dict:
        infinite = math.isinf(self.psnr_db)
        return {
            "psnr_db": None if infinite else self.psnr_db,
            "psnr_infinite": infinite,
            "ssim": self.ssim,
            "vsmd": self.vsmd,
            "n_voxels": self.n_voxels,
            "mask_coverage": self.mask_coverage,
        }


def _check_same_shape(ref, test):
    if ref.shape != test.shape:
        raise ShapeError(f"shape mismatch: {ref.shape} vs {test.shape}")


def psnr(ref: np.ndarray, test: np.ndarray, data_range: float | None = None) -> float:
    """10*log10(data_range^2 / MSE); +inf when MSE is exactly zero."""
    ref = np.asarray(ref, dtype=np.float64)
    test = np.asarray(test, dtype=np.float64)
    _check_same_shape(ref, test)
    if data_range is None:
        data_range = float(ref.max() - ref.min())
    if data_range <= 0:
        raise ValueError(f"data_range must be > 0, got {data_range}")
    mse = float(np.mean((ref - test) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(data_range**2 / mse)


def _gaussian_kernel_1d(window_size: int, sigma: float) -> np.ndarray:
    half = window_size // 2
    x = np.arange(-half, half + 1, dtype=np.float64)
    k = np.exp(-(x**2) / (2 * sigma**2))
    return k / k.sum()


def ssim(
    ref: np.ndarray,
    test: np.ndarray,
    window_size: int = 7,
    k1: float = 0.01,
    k2: float = 0.03,
    data_range: float | None = None,
    sigma: float = 1.5,
) -> float:
    """Mean local SSIM over Gaussian-weighted windows."""
    ref = np.asarray(ref, dtype=np.float64)
    test = np.asarray(test, dtype=np.float64)
    _check_same_shape(ref, test)
    if window_size % 2 == 0:
        raise ValueError("window_size must be odd")
    if data_range is None:
        data_range = float(ref.max() - ref.min())
        if data_range == 0:
            data_range = 1.0
    c1 = (k1 * data_range) ** 2
    c2 = (k2 * data_range) ** 2

    kern = _gaussian_kernel_1d(window_size, sigma)

    def smooth(img):
        out = img
        for axis in range(img.ndim):
            out = ndimage.correlate1d(out, kern, axis=axis, mode="reflect")
        return out

    mu_a = smooth(ref)
    mu_b = smooth(test)
    mu_aa = smooth(ref * ref)
    mu_bb = smooth(test * test)
    mu_ab = smooth(ref * test)

    var_a = mu_aa - mu_a * mu_a
    var_b = mu_bb - mu_b * mu_b
    cov = mu_ab - mu_a * mu_b

    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def vsmd(ref: np.ndarray, test: np.ndarray, mask: np.ndarray) -> float:
    """Relative total absolute difference over the mask (see module docs)."""
    ref = np.asarray(ref, dtype=np.float64)
    test = np.asarray(test, dtype=np.float64)
    _check_same_shape(ref, test)
    mask = np.asarray(mask, dtype=bool)
    _check_same_shape(ref, mask)
    if not mask.any():
        raise ValueError("mask is empty")
    denom = float(ref[mask].sum())
    if denom == 0.0:
        raise ValueError("reference uptake sums to zero over the mask")
    return float(np.abs(ref[mask] - test[mask]).sum() / denom)


def evaluate_volume(ref: Volume3D, test: Volume3D, mask: np.ndarray) -> MetricsReport:
    """Per-slice PSNR/SSIM averaged over mask-intersecting slices, plus
    volume-level VSMD."""
    if ref.dims != test.dims:
        raise ShapeError(f"dim mismatch: {ref.dims} vs {test.dims}")
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != ref.dims:
        raise ShapeError(f"mask shape {mask.shape} != volume dims {ref.dims}")

    masked = ref.data[mask]
    data_range = float(masked.max() - masked.min()) if masked.size else 1.0
    if data_range <= 0:
        data_range = 1.0

    psnr_vals, ssim_vals = [], []
    for t in range(ref.dims[0]):
        if not mask[t].any():
            continue
        psnr_vals.append(psnr(ref.data[t], test.data[t], data_range=data_range))
        ssim_vals.append(ssim(ref.data[t], test.data[t], data_range=data_range))
    if not psnr_vals:
        raise ValueError("mask intersects no slices")

    mean_psnr = math.inf if any(math.isinf(p) for p in psnr_vals) else float(np.mean(psnr_vals))
    return MetricsReport(
        psnr_db=mean_psnr,
        ssim=float(np.mean(ssim_vals)),
        vsmd=vsmd(ref.data, test.data, mask),
        n_voxels=int(mask.sum()),
        mask_coverage=float(mask.mean()),
    )
