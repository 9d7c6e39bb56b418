"""Self-describing checkpoint container.

A checkpoint is a torch-serialized dict:

    {
      "format": "petrec-ckpt-1",
      "kind": "transgan" | "sdam",
      "config": <network config dict>,
      "norm_constant": float,       # per-volume [0,1] scaling constant
      "seed": int,
      "state": {name: state_dict},  # parameter tensors per sub-network
      "meta": {...}                 # best_val_psnr, best_step, steps, ...
    }
"""

from __future__ import annotations

from pathlib import Path

import torch

from .errors import PetrecError

FORMAT_TAG = "petrec-ckpt-1"


def save_checkpoint(path, kind: str, config: dict, norm_constant: float,
                    seed: int, state: dict, meta: dict | None = None) -> None:
    payload = {
        "format": FORMAT_TAG,
        "kind": kind,
        "config": config,
        "norm_constant": float(norm_constant),
        "seed": int(seed),
        "state": state,
        "meta": meta or {},
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(payload, path)


def load_checkpoint(path, expected_kind: str | None = None) -> dict:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    payload = torch.load(path, map_location="cpu", weights_only=False)
    if not isinstance(payload, dict) or payload.get("format") != FORMAT_TAG:
        raise PetrecError(f"{path} is not a {FORMAT_TAG} checkpoint")
    if expected_kind is not None and payload.get("kind") != expected_kind:
        raise PetrecError(
            f"{path} holds a {payload.get('kind')!r} checkpoint, expected {expected_kind!r}"
        )
    return payload
