"""Synthetic paired full-dose / low-dose PET volumes.

A phantom is an ellipsoidal "brain" inside the volume, partitioned into
contiguous labeled regions (Voronoi cells of seeded points, so each cell is
convex and connected) with constant per-region uptake, optionally smoothed.
Low-dose volumes are simulated by Poisson count thinning of the full-dose
intensity, the standard desk-scale surrogate for list-mode undersampling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import InvalidSpecError
from .volume import Modality, Volume3D

DEFAULT_DOSE_FRACTION = 0.05
DEFAULT_SCALE_COUNTS = 100.0


@dataclass
class PhantomSpec:
    dims: tuple[int, int, int] = (32, 64, 64)
    n_regions: int = 8
    uptake_range: tuple[float, float] = (0.5, 2.0)
    smoothing_sigma_vox: float = 1.5
    background_level: float = 0.0

    def validate(self) -> None:
        if len(self.dims) != 3 or any(d < 1 for d in self.dims):
            raise InvalidSpecError(f"dims must be three positive integers, got {self.dims}")
        if not 2 <= self.n_regions <= 255:
            raise InvalidSpecError(f"n_regions must be in [2, 255], got {self.n_regions}")
        lo, hi = self.uptake_range
        if not (0 < lo <= hi):
            raise InvalidSpecError(f"uptake_range must satisfy 0 < lo <= hi, got {self.uptake_range}")
        if lo == hi and self.n_regions > 1:
            pass  # degenerate range is allowed: all regions share the uptake
        if self.smoothing_sigma_vox < 0:
            raise InvalidSpecError("smoothing_sigma_vox must be >= 0")
        if self.background_level < 0:
            raise InvalidSpecError("background_level must be >= 0")


def _ellipsoid_mask(dims: tuple[int, int, int]) -> np.ndarray:
    d, h, w = dims
    zz, yy, xx = np.meshgrid(
        np.arange(d), np.arange(h), np.arange(w), indexing="ij"
    )
    cz, cy, cx = (d - 1) / 2.0, (h - 1) / 2.0, (w - 1) / 2.0
    # semi-axes at 80% of the half-extent leave a background margin
    rz, ry, rx = max(d * 0.4, 0.5), max(h * 0.4, 0.5), max(w * 0.4, 0.5)
    return ((zz - cz) / rz) ** 2 + ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 <= 1.0


def generate_phantom(spec: PhantomSpec, seed: int) -> tuple[Volume3D, np.ndarray]:
    """Build an F-PET-like volume and its paired integer label atlas.

    Returns (volume, atlas). Atlas label 0 is background; labels 1..n_regions
    are sorted by descending voxel count, so label 1 is the largest region
    (used downstream as the SUVR reference region).
    """
    spec.validate()
    rng = np.random.default_rng(seed)

    mask = _ellipsoid_mask(spec.dims)
    n_in_mask = int(mask.sum())
    if n_in_mask < spec.n_regions:
        raise InvalidSpecError(
            f"dims {spec.dims} give an ellipsoid of {n_in_mask} voxels, "
            f"too small for {spec.n_regions} regions"
        )

    in_coords = np.argwhere(mask)
    seed_idx = rng.choice(n_in_mask, size=spec.n_regions, replace=False)
    seeds = in_coords[seed_idx].astype(np.float64)

    # Voronoi partition of the mask: nearest seed point wins
    d2 = ((in_coords[:, None, :] - seeds[None, :, :]) ** 2).sum(axis=2)
    nearest = d2.argmin(axis=1)

    # relabel by descending region size; ties broken by original seed order
    counts = np.bincount(nearest, minlength=spec.n_regions)
    order = np.argsort(-counts, kind="stable")
    rank_of = np.empty(spec.n_regions, dtype=np.int64)
    rank_of[order] = np.arange(1, spec.n_regions + 1)

    atlas = np.zeros(spec.dims, dtype=np.uint8)
    atlas[tuple(in_coords.T)] = rank_of[nearest]

    lo, hi = spec.uptake_range
    uptake_by_rank = rng.uniform(lo, hi, size=spec.n_regions)

    data = np.full(spec.dims, spec.background_level, dtype=np.float64)
    for rank in range(1, spec.n_regions + 1):
        data[atlas == rank] = uptake_by_rank[rank - 1]
    if spec.smoothing_sigma_vox > 0:
        data = ndimage.gaussian_filter(data, sigma=spec.smoothing_sigma_vox)
    data = np.maximum(data, 0.0)

    vol = Volume3D(data=data, subject_id="", modality=Modality.FPET)
    return vol, atlas


def simulate_low_dose(
    fpet: Volume3D,
    dose_fraction: float = DEFAULT_DOSE_FRACTION,
    scale_counts: float = DEFAULT_SCALE_COUNTS,
    seed: int = 0,
) -> Volume3D:
    """Poisson count thinning: draws Poisson(dose_fraction * scale_counts * v)
    per voxel and rescales back to the F-PET intensity scale."""
    if not 0 < dose_fraction <= 1:
        raise ValueError(f"dose_fraction must be in (0, 1], got {dose_fraction}")
    if scale_counts <= 0:
        raise ValueError(f"scale_counts must be > 0, got {scale_counts}")
    rng = np.random.default_rng(seed)
    lam = dose_fraction * scale_counts * fpet.data.astype(np.float64)
    counts = rng.poisson(lam)
    data = counts / (dose_fraction * scale_counts)
    return Volume3D(
        data=data,
        voxel_size_mm=fpet.voxel_size_mm,
        subject_id=fpet.subject_id,
        modality=Modality.LPET,
    )
