"""Per-ROI standard uptake value ratios and Bland-Altman agreement."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .volume import Volume3D


@dataclass
class ROIAtlas:
    """Integer label volume; label 0 is background."""

    labels: np.ndarray
    reference_region_id: int = 1

    def __post_init__(self):
        self.labels = np.asarray(self.labels)
        if self.labels.ndim != 3:
            raise ShapeError(f"atlas labels must be 3D, got {self.labels.shape}")
        if self.reference_region_id not in self.region_ids:
            raise ValueError(
                f"reference region {self.reference_region_id} has no voxels in the atlas"
            )

    @property
    def region_ids(self) -> set[int]:
        return {int(r) for r in np.unique(self.labels) if r != 0}

    @property
    def brain_mask(self) -> np.ndarray:
        return self.labels != 0


@dataclass
class SUVRTable:
    values: dict[int, float]  # region_id -> suvr
    subject_id: str = ""
    modality: str = ""


@dataclass
class AgreementStats:
    mean_diff: float
    loa_low: float
    loa_high: float
    ci_low: float
    ci_high: float
    pearson_r: float  # nan when either series is constant
    n_points: int
    pearson_defined: bool = True

    def to_json_dict(self) -> dict:
        return {
            "mean_diff": self.mean_diff,
            "loa_low": self.loa_low,
            "loa_high": self.loa_high,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "pearson_r": None if not self.pearson_defined else self.pearson_r,
            "pearson_defined": self.pearson_defined,
            "n_points": self.n_points,
        }


def compute_suvr(vol: Volume3D, atlas: ROIAtlas) -> SUVRTable:
    """Region mean uptake divided by reference-region mean uptake."""
    if atlas.labels.shape != vol.dims:
        raise ShapeError(f"atlas shape {atlas.labels.shape} != volume dims {vol.dims}")
    ref_mean = float(vol.data[atlas.labels == atlas.reference_region_id].mean())
    if ref_mean <= 0:
        raise ValueError("reference region mean uptake must be > 0")
    values = {}
    for region in sorted(atlas.region_ids):
        values[region] = float(vol.data[atlas.labels == region].mean()) / ref_mean
    return SUVRTable(values=values, subject_id=vol.subject_id, modality=vol.modality.value)


def _agreement_from_pairs(a: np.ndarray, b: np.ndarray) -> AgreementStats:
    d = a - b
    n = d.size
    mean_diff = float(d.mean())
    sd = float(d.std(ddof=1)) if n > 1 else 0.0
    loa = 1.96 * sd
    ci = 1.96 * sd / math.sqrt(n)
    const = np.all(a == a[0]) or np.all(b == b[0])
    if const:
        r, defined = float("nan"), False
    else:
        r, defined = float(np.corrcoef(a, b)[0, 1]), True
    return AgreementStats(
        mean_diff=mean_diff,
        loa_low=mean_diff - loa,
        loa_high=mean_diff + loa,
        ci_low=mean_diff - ci,
        ci_high=mean_diff + ci,
        pearson_r=r,
        n_points=n,
        pearson_defined=defined,
    )


def bland_altman(a: SUVRTable, b: SUVRTable) -> AgreementStats:
    """Limits of agreement (mean +- 1.96 sd of paired differences a-b), the
    95% CI of the mean difference, and the Pearson correlation of (a, b)."""
    if set(a.values) != set(b.values):
        raise ValueError("SUVR tables cover different region sets")
    regions = sorted(a.values)
    if len(regions) < 3:
        raise ValueError(f"need >= 3 matched regions, got {len(regions)}")
    av = np.array([a.values[r] for r in regions], dtype=np.float64)
    bv = np.array([b.values[r] for r in regions], dtype=np.float64)
    return _agreement_from_pairs(av, bv)


def agreement_report(
    pairs: list[tuple[SUVRTable, SUVRTable]],
) -> tuple[AgreementStats, np.ndarray]:
    """Pool per-region SUVR pairs across subjects.

    Returns the pooled stats and an (n_points, 2) array of Bland-Altman
    scatter coordinates (pair mean, pair difference a-b).
    """
    if not pairs:
        raise ValueError("need at least one subject pair")
    a_all, b_all = [], []
    for a, b in pairs:
        if set(a.values) != set(b.values):
            raise ValueError(f"region mismatch for subject {a.subject_id!r}")
        for region in sorted(a.values):
            a_all.append(a.values[region])
            b_all.append(b.values[region])
    av = np.array(a_all, dtype=np.float64)
    bv = np.array(b_all, dtype=np.float64)
    stats = _agreement_from_pairs(av, bv)
    scatter = np.column_stack(((av + bv) / 2.0, av - bv))
    return stats, scatter
