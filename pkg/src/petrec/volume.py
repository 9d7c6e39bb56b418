"""3D volumes, slice windows, and the .pvol on-disk format.

A .pvol file is a single UTF-8 JSON header line terminated by '\\n' with keys
{magic, dims, voxel_size_mm, dtype, subject_id, modality}, followed
immediately by the raw voxel payload in (D, H, W) row-major order.
Image volumes use dtype "f32le" (little-endian float32); label atlases use
dtype "u8".
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import ShapeError, VolumeParseError

PVOL_MAGIC = "PVOL1"
_DTYPES = {"f32le": np.dtype("<f4"), "u8": np.dtype("u1")}


class Modality(str, Enum):
    FPET = "FPET"
    LPET = "LPET"
    GENERATED = "GENERATED"
    REFINED = "REFINED"


@dataclass
class Volume3D:
    """Non-negative scalar uptake field with voxel spacing metadata."""

    data: np.ndarray  # (D, H, W) float32
    voxel_size_mm: tuple[float, float, float] = (1.0, 1.0, 1.0)
    subject_id: str = ""
    modality: Modality = Modality.FPET

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.float32)
        if self.data.ndim != 3:
            raise ShapeError(f"volume data must be 3D, got shape {self.data.shape}")
        if min(self.data.shape) < 1:
            raise ShapeError(f"volume dims must be >= 1, got {self.data.shape}")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("volume contains non-finite voxels")
        if np.any(self.data < 0):
            raise ValueError("volume contains negative voxels")
        self.modality = Modality(self.modality)

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.data.shape


@dataclass
class SliceWindow:
    """Ordered stack of 2r+1 contiguous slices centered on a target slice."""

    slices: np.ndarray  # (2r+1, H, W)
    center_index: int
    subject_id: str = ""
    t0: int = 0

    def __post_init__(self):
        if self.slices.ndim != 3 or self.slices.shape[0] % 2 == 0:
            raise ShapeError(
                f"window must stack an odd number of 2D slices, got {self.slices.shape}"
            )
        if self.center_index != self.slices.shape[0] // 2:
            raise ShapeError("center_index must be the middle of the stack")

    @property
    def radius(self) -> int:
        return self.slices.shape[0] // 2

    @property
    def center(self) -> np.ndarray:
        return self.slices[self.center_index]


def extract_window(vol: Volume3D, t0: int, r: int) -> SliceWindow:
    """Slices [t0-r, ..., t0+r] with edge replication past the volume ends."""
    depth = vol.dims[0]
    if not 0 <= t0 < depth:
        raise IndexError(f"t0={t0} outside [0, {depth})")
    if r < 0:
        raise ValueError("r must be >= 0")
    idx = np.clip(np.arange(t0 - r, t0 + r + 1), 0, depth - 1)
    return SliceWindow(
        slices=vol.data[idx].copy(),
        center_index=r,
        subject_id=vol.subject_id,
        t0=t0,
    )


def _write_pvol(path, dims, voxel_size_mm, dtype_name, subject_id, modality, payload):
    header = {
        "magic": PVOL_MAGIC,
        "dims": list(dims),
        "voxel_size_mm": list(voxel_size_mm),
        "dtype": dtype_name,
        "subject_id": subject_id,
        "modality": modality,
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(json.dumps(header).encode("utf-8") + b"\n")
        f.write(np.ascontiguousarray(payload, dtype=_DTYPES[dtype_name]).tobytes())


def _read_pvol(path):
    with open(path, "rb") as f:
        line = f.readline()
        payload = f.read()
    try:
        header = json.loads(line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise VolumeParseError("header", f"not a JSON line: {exc}") from exc
    if not isinstance(header, dict) or header.get("magic") != PVOL_MAGIC:
        raise VolumeParseError("magic", f"expected {PVOL_MAGIC!r}, got {header.get('magic')!r}")
    dims = header.get("dims")
    if (
        not isinstance(dims, list)
        or len(dims) != 3
        or not all(isinstance(d, int) and d >= 1 for d in dims)
    ):
        raise VolumeParseError("dims", f"expected three positive integers, got {dims!r}")
    vsz = header.get("voxel_size_mm")
    if not isinstance(vsz, list) or len(vsz) != 3:
        raise VolumeParseError("voxel_size_mm", f"expected a length-3 list, got {vsz!r}")
    dtype_name = header.get("dtype")
    if dtype_name not in _DTYPES:
        raise VolumeParseError("dtype", f"unknown dtype {dtype_name!r}")
    dtype = _DTYPES[dtype_name]
    expected = dims[0] * dims[1] * dims[2] * dtype.itemsize
    if len(payload) != expected:
        raise VolumeParseError(
            "payload", f"expected {expected} bytes for dims {dims}, got {len(payload)}"
        )
    data = np.frombuffer(payload, dtype=dtype).reshape(dims)
    return header, data


def write_volume(vol: Volume3D, path) -> None:
    _write_pvol(
        path, vol.dims, vol.voxel_size_mm, "f32le", vol.subject_id, vol.modality.value, vol.data
    )


def read_volume(path) -> Volume3D:
    header, data = _read_pvol(path)
    if header["dtype"] != "f32le":
        raise VolumeParseError("dtype", f"expected f32le image volume, got {header['dtype']!r}")
    try:
        modality = Modality(header.get("modality"))
    except ValueError:
        raise VolumeParseError("modality", f"unknown modality {header.get('modality')!r}")
    return Volume3D(
        data=data.copy(),
        voxel_size_mm=tuple(float(v) for v in header["voxel_size_mm"]),
        subject_id=str(header.get("subject_id", "")),
        modality=modality,
    )


def write_atlas(labels: np.ndarray, path, subject_id: str = "",
                voxel_size_mm=(1.0, 1.0, 1.0)) -> None:
    """Persist an integer label atlas as a u8 .pvol."""
    labels = np.asarray(labels)
    if labels.ndim != 3:
        raise ShapeError(f"atlas must be 3D, got {labels.shape}")
    if labels.min() < 0 or labels.max() > 255:
        raise ValueError("atlas labels must fit in u8")
    _write_pvol(path, labels.shape, voxel_size_mm, "u8", subject_id, "ATLAS", labels)


def read_atlas(path) -> np.ndarray:
    header, data = _read_pvol(path)
    if header["dtype"] != "u8":
        raise VolumeParseError("dtype", f"expected u8 atlas, got {header['dtype']!r}")
    return data.copy()
