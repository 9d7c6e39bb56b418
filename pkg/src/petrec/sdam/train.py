"""SDAM training and volume refinement.

Trained after the generator, on its outputs (two-step schedule): windows of
generated slices in, squared error against the ground-truth center slice.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass

import numpy as np
import torch

from ..errors import DatasetError, ShapeError
from ..metrics import psnr
from ..volume import Modality, Volume3D, extract_window
from .networks import SDAMConfig, SDAMModel, build_sdam


@dataclass
class RefinedSlice:
    data: np.ndarray
    residual: np.ndarray
    target_index: int


@dataclass
class SDAMHyper:
    epochs: int = 10
    batch_size: int = 8
    lr: float = 1e-4
    betas: tuple[float, float] = (0.9, 0.999)
    seed: int = 0
    mean_loss: bool = False  # Eq-faithful summed SSE by default


def sdam_loss(refined: torch.Tensor, y: torch.Tensor, mean: bool = False) -> torch.Tensor:
    """Sum of squared error between the refined slice and the ground truth;
    set mean=True for a size-normalized variant (stabler learning rates)."""
    if refined.shape != y.shape:
        raise ShapeError(f"shape mismatch: {tuple(refined.shape)} vs {tuple(y.shape)}")
    sq = (y - refined) ** 2
    return sq.mean() if mean else sq.sum()


def reconstruct_residual(recon_net, fused: torch.Tensor, target: np.ndarray) -> RefinedSlice:
    """Residual from the fused feature map, added back to the target slice."""
    if fused.shape[-2:] != target.shape:
        raise ShapeError(
            f"fused spatial dims {tuple(fused.shape[-2:])} != target {target.shape}"
        )
    with torch.no_grad():
        residual = recon_net(fused[None] if fused.ndim == 3 else fused)
    residual = residual.reshape(target.shape).numpy()
    return RefinedSlice(data=residual + target, residual=residual, target_index=0)


def refine_window(model: SDAMModel, window: np.ndarray) -> np.ndarray:
    with torch.no_grad():
        x = torch.from_numpy(np.ascontiguousarray(window, dtype=np.float32))[None]
        return model(x)[0, 0].numpy()


def refine_volume(model: SDAMModel, generated: Volume3D, norm: float = 1.0) -> Volume3D:
    """Refine every slice of a generated volume; negative refined values are
    clipped to zero (uptake is non-negative)."""
    model.eval()
    r = model.cfg.r
    out = np.empty(generated.dims, dtype=np.float32)
    for t0 in range(generated.dims[0]):
        win = extract_window(generated, t0, r).slices / norm
        out[t0] = refine_window(model, win) * norm
    return Volume3D(
        data=np.maximum(out, 0.0),
        voxel_size_mm=generated.voxel_size_mm,
        subject_id=generated.subject_id,
        modality=Modality.REFINED,
    )


def _validation_psnr(model, generated, truth, subjects, norm) -> float:
    vals = []
    for s in subjects:
        refined = refine_volume(model, generated[s], norm)
        ref = truth[s]
        rng_ = float(ref.data.max() - ref.data.min())
        vals.append(psnr(ref.data, refined.data, data_range=rng_ if rng_ > 0 else 1.0))
    finite = [v for v in vals if math.isfinite(v)]
    return float(np.mean(finite)) if finite else math.inf


def train_sdam(
    generated: dict[str, Volume3D],
    truth: dict[str, Volume3D],
    split: dict[str, list[str]],
    cfg: SDAMConfig,
    hyper: SDAMHyper,
):
    """Returns (model, history, info); model holds validation-best weights.

    history entries are (step, loss); info carries best_val_psnr / best_step.
    """
    train_subjects = split["train"]
    if not train_subjects:
        raise DatasetError("training split is empty")
    for s in train_subjects + split.get("val", []):
        if s not in generated:
            raise DatasetError(f"generated volume for subject {s!r} is missing")
        if s not in truth:
            raise DatasetError(f"ground-truth volume for subject {s!r} is missing")

    # reuse the scale of the ground-truth training volumes
    from ..transgan.train import normalization_constant

    norm = normalization_constant([truth[s] for s in train_subjects])

    model = build_sdam(cfg, hyper.seed)
    opt = torch.optim.Adam(model.parameters(), lr=hyper.lr, betas=hyper.betas)

    items = [(s, t0) for s in train_subjects for t0 in range(generated[s].dims[0])]
    rng = np.random.default_rng(hyper.seed)
    torch.manual_seed(hyper.seed)

    history: list[tuple[int, float]] = []
    best_psnr, best_state, best_step = -math.inf, None, -1
    step = 0
    for _epoch in range(hyper.epochs):
        order = rng.permutation(len(items))
        for start in range(0, len(items), hyper.batch_size):
            batch = [items[i] for i in order[start : start + hyper.batch_size]]
            xs = np.stack(
                [extract_window(generated[s], t0, cfg.r).slices / norm for s, t0 in batch]
            )
            ys = np.stack([truth[s].data[t0] / norm for s, t0 in batch])
            x = torch.from_numpy(np.ascontiguousarray(xs, dtype=np.float32))
            y = torch.from_numpy(np.ascontiguousarray(ys, dtype=np.float32))[:, None]

            model.train()
            opt.zero_grad()
            loss = sdam_loss(model(x), y, mean=hyper.mean_loss)
            if not math.isfinite(loss.item()):
                raise RuntimeError(f"non-finite SDAM loss at step {step}")
            loss.backward()
            opt.step()
            history.append((step, loss.item()))
            step += 1

        if split.get("val"):
            val_psnr = _validation_psnr(model, generated, truth, split["val"], norm)
            if val_psnr > best_psnr:
                best_psnr, best_step = val_psnr, step - 1
                best_state = copy.deepcopy(model.state_dict())

    if best_state is not None:
        model.load_state_dict(best_state)
    info = {
        "norm_constant": norm,
        "best_val_psnr": best_psnr if math.isfinite(best_psnr) else None,
        "best_step": best_step,
        "steps": step,
    }
    return model, history, info
