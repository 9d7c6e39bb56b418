"""Declarative run configuration: JSON document, defaults, validation.

Validation errors name the exact JSON path of the offending field
(e.g. "phantom.n_regions").
"""

from __future__ import annotations

import copy
import hashlib
import json
from pathlib import Path

from .errors import ConfigError

DESK_DEFAULTS: dict = {
    "seed": 1234,
    "output_dir": "runs/desk",
    "phantom": {
        "dims": [32, 64, 64],
        "n_regions": 8,
        "uptake_range": [0.5, 2.0],
        "smoothing_sigma_vox": 1.5,
        "background_level": 0.0,
        "n_subjects": 6,
    },
    "dose": {"dose_fraction": 0.05, "scale_counts": 100.0},
    "folds": {"k": 3, "folds_to_run": [0, 1]},
    "generator": {
        "patch_size": 8,
        "embed_dim": 64,
        "n_attention_heads": 4,
        "n_encoder_layers": 2,
        "n_resnet_blocks": 2,
        "base_channels": 16,
        "input_slices": 3,
    },
    "discriminator": {"base_channels": 32},
    "sdam": {
        "r": 2,
        "kernel_size": 3,
        "feature_channels": 16,
        "offset_base_channels": 16,
        "recon_blocks": 4,
    },
    "training": {
        "transgan": {
            "epochs": 40,
            "batch_size": 8,
            "lr": 2e-4,
            "betas": [0.5, 0.999],
            "alpha": 100.0,
            "beta": 100.0,
            "eps": 1e-8,
        },
        "sdam": {
            "epochs": 20,
            "batch_size": 8,
            "lr": 1e-4,
            "betas": [0.9, 0.999],
            "mean_loss": True,
        },
    },
    "perceptual": {"vgg16_weights": None, "vgg19_weights": None},
    "plots": {"difference_maps": True, "bland_altman": True},
}

# full-size slice geometry and the 10-fold protocol, without claiming any
# published numbers
PAPER_SHAPE_OVERRIDES: dict = {
    "output_dir": "runs/paper-shape",
    "phantom": {"dims": [16, 256, 256], "n_subjects": 10},
    "folds": {"k": 10, "folds_to_run": [0]},
}

PROFILES = {"desk": {}, "paper-shape": PAPER_SHAPE_OVERRIDES}


def _deep_merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _require(cond: bool, path: str, message: str) -> None:
    if not cond:
        raise ConfigError(f"{path}: {message}")


def _check_number(cfg, path, lo=None, hi=None, integer=False):
    node = cfg
    for part in path.split("."):
        if not isinstance(node, dict) or part not in node:
            raise ConfigError(f"{path}: missing")
        node = node[part]
    kind = (int,) if integer else (int, float)
    _require(isinstance(node, kind) and not isinstance(node, bool), path,
             f"expected {'an integer' if integer else 'a number'}, got {node!r}")
    if lo is not None:
        _require(node >= lo, path, f"must be >= {lo}, got {node}")
    if hi is not None:
        _require(node <= hi, path, f"must be <= {hi}, got {node}")
    return node


def validate_config(cfg: dict) -> None:
    _check_number(cfg, "seed", integer=True)
    _require(isinstance(cfg.get("output_dir"), str) and cfg["output_dir"],
             "output_dir", "expected a non-empty string")

    dims = cfg["phantom"].get("dims")
    _require(isinstance(dims, list) and len(dims) == 3
             and all(isinstance(d, int) and d >= 1 for d in dims),
             "phantom.dims", f"expected three positive integers, got {dims!r}")
    _check_number(cfg, "phantom.n_regions", lo=2, hi=255, integer=True)
    ur = cfg["phantom"].get("uptake_range")
    _require(isinstance(ur, list) and len(ur) == 2 and 0 < ur[0] <= ur[1],
             "phantom.uptake_range", f"expected [lo, hi] with 0 < lo <= hi, got {ur!r}")
    _check_number(cfg, "phantom.smoothing_sigma_vox", lo=0)
    _check_number(cfg, "phantom.background_level", lo=0)
    _check_number(cfg, "phantom.n_subjects", lo=3, integer=True)

    df = _check_number(cfg, "dose.dose_fraction")
    _require(0 < df <= 1, "dose.dose_fraction", f"must be in (0, 1], got {df}")
    _check_number(cfg, "dose.scale_counts", lo=1e-12)

    k = _check_number(cfg, "folds.k", lo=3, integer=True)
    _require(cfg["phantom"]["n_subjects"] >= k, "folds.k",
             f"k={k} exceeds n_subjects={cfg['phantom']['n_subjects']}")
    ftr = cfg["folds"].get("folds_to_run")
    _require(isinstance(ftr, list) and ftr
             and all(isinstance(f, int) and 0 <= f < k for f in ftr),
             "folds.folds_to_run", f"expected fold indices in [0, {k}), got {ftr!r}")

    for name in ("patch_size", "embed_dim", "n_attention_heads", "n_encoder_layers",
                 "n_resnet_blocks", "base_channels", "input_slices"):
        _check_number(cfg, f"generator.{name}", lo=1, integer=True)
    _require(cfg["generator"]["embed_dim"] % cfg["generator"]["n_attention_heads"] == 0,
             "generator.embed_dim", "must be divisible by n_attention_heads")
    _require(cfg["generator"]["input_slices"] % 2 == 1,
             "generator.input_slices", "must be odd")
    for axis in (1, 2):
        _require(dims[axis] % cfg["generator"]["patch_size"] == 0,
                 "generator.patch_size",
                 f"phantom dims[{axis}]={dims[axis]} not divisible by patch size")

    _check_number(cfg, "discriminator.base_channels", lo=1, integer=True)

    _check_number(cfg, "sdam.r", lo=0, integer=True)
    s = _check_number(cfg, "sdam.kernel_size", lo=1, integer=True)
    _require(s % 2 == 1, "sdam.kernel_size", "must be odd")
    for name in ("feature_channels", "offset_base_channels", "recon_blocks"):
        _check_number(cfg, f"sdam.{name}", lo=1, integer=True)

    for phase in ("transgan", "sdam"):
        _check_number(cfg, f"training.{phase}.epochs", lo=1, integer=True)
        _check_number(cfg, f"training.{phase}.batch_size", lo=1, integer=True)
        _check_number(cfg, f"training.{phase}.lr", lo=1e-12)

    for key in ("vgg16_weights", "vgg19_weights"):
        val = cfg["perceptual"].get(key)
        if val is not None:
            _require(isinstance(val, str), f"perceptual.{key}",
                     f"expected a path string or null, got {val!r}")
            _require(Path(val).exists(), f"perceptual.{key}", f"file not found: {val}")


def load_config(path, profile: str = "desk", seed_override: int | None = None) -> dict:
    if profile not in PROFILES:
        raise ConfigError(f"profile: unknown profile {profile!r}, "
                          f"choose from {sorted(PROFILES)}")
    base = _deep_merge(DESK_DEFAULTS, PROFILES[profile])
    if path is not None:
        try:
            with open(path) as f:
                user = json.load(f)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}")
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}")
        if not isinstance(user, dict):
            raise ConfigError("config root must be a JSON object")
        base = _deep_merge(base, user)
    if seed_override is not None:
        base["seed"] = int(seed_override)
    validate_config(base)
    return base


def config_hash(cfg: dict) -> str:
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()
