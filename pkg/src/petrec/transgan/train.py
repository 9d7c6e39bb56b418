"""Adversarial training loop: alternating discriminator / generator steps.

Slices are scaled to roughly [0, 1] by the 99.5th percentile of the
full-dose training volumes; the constant travels with the checkpoint so
generated volumes can be mapped back to the uptake scale.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass

import numpy as np
import torch

from ..errors import DatasetError
from ..metrics import psnr
from ..volume import Modality, Volume3D, extract_window
from .losses import (
    DEFAULT_ALPHA,
    DEFAULT_BETA,
    DEFAULT_EPS,
    LossBundle,
    adversarial_losses,
    charbonnier_loss,
    perceptual_loss,
    total_generator_loss,
)
from .networks import (
    DiscriminatorConfig,
    GeneratorConfig,
    build_discriminator,
    build_generator,
)

NORM_PERCENTILE = 99.5


@dataclass
class TransGANHyper:
    epochs: int = 10
    batch_size: int = 8
    lr: float = 2e-4
    betas: tuple[float, float] = (0.5, 0.999)
    alpha: float = DEFAULT_ALPHA
    beta: float = DEFAULT_BETA
    eps: float = DEFAULT_EPS
    seed: int = 0


def normalization_constant(volumes: list[Volume3D]) -> float:
    values = np.concatenate([v.data.ravel() for v in volumes])
    c = float(np.percentile(values, NORM_PERCENTILE))
    return c if c > 0 else 1.0


def _window_batch(dataset, items, norm, r):
    """items: list of (subject_id, t0) -> (windows, conditioning centers, targets)."""
    xs, conds, ys = [], [], []
    for subject_id, t0 in items:
        lpet = dataset[subject_id]["lpet"]
        fpet = dataset[subject_id]["fpet"]
        win = extract_window(lpet, t0, r).slices / norm
        xs.append(win)
        conds.append(win[r])
        ys.append(fpet.data[t0] / norm)
    to = lambda a: torch.from_numpy(np.ascontiguousarray(a, dtype=np.float32))
    return to(np.stack(xs)), to(np.stack(conds))[:, None], to(np.stack(ys))[:, None]


def generate_volume(gen, lpet: Volume3D, norm: float, r: int) -> Volume3D:
    """Run the generator over every slice position of a low-dose volume."""
    gen.eval()
    depth = lpet.dims[0]
    out = np.empty(lpet.dims, dtype=np.float32)
    with torch.no_grad():
        for t0 in range(depth):
            win = extract_window(lpet, t0, r).slices / norm
            x = torch.from_numpy(np.ascontiguousarray(win, dtype=np.float32))[None]
            out[t0] = gen(x)[0, 0].numpy() * norm
    return Volume3D(
        data=out,
        voxel_size_mm=lpet.voxel_size_mm,
        subject_id=lpet.subject_id,
        modality=Modality.GENERATED,
    )


def _validation_psnr(gen, dataset, subjects, norm, r) -> float:
    vals = []
    for s in subjects:
        generated = generate_volume(gen, dataset[s]["lpet"], norm, r)
        ref = dataset[s]["fpet"]
        rng_ = float(ref.data.max() - ref.data.min())
        vals.append(psnr(ref.data, generated.data, data_range=rng_ if rng_ > 0 else 1.0))
    finite = [v for v in vals if math.isfinite(v)]
    return float(np.mean(finite)) if finite else math.inf


def train_transgan(
    dataset: dict[str, dict[str, Volume3D]],
    split: dict[str, list[str]],
    gen_cfg: GeneratorConfig,
    disc_cfg: DiscriminatorConfig,
    hyper: TransGANHyper,
    encoders: tuple | None = None,
):
    """Train generator and discriminator on the train split.

    Returns (generator, discriminator, history, info) where info carries the
    normalization constant, best validation PSNR, and the step it occurred at.
    The returned generator holds the validation-best weights.
    """
    train_subjects = split["train"]
    if not train_subjects:
        raise DatasetError("training split is empty")
    for s in train_subjects + split.get("val", []):
        if s not in dataset:
            raise DatasetError(f"subject {s!r} missing from dataset")

    r = gen_cfg.input_slices // 2
    norm = normalization_constant([dataset[s]["fpet"] for s in train_subjects])

    gen = build_generator(gen_cfg, hyper.seed)
    disc = build_discriminator(disc_cfg, hyper.seed + 1)
    if encoders is None:
        from .networks import build_perceptual_encoders

        encoders = build_perceptual_encoders(seed=hyper.seed + 2)
    enc16, enc19 = encoders

    opt_g = torch.optim.Adam(gen.parameters(), lr=hyper.lr, betas=hyper.betas)
    opt_d = torch.optim.Adam(disc.parameters(), lr=hyper.lr, betas=hyper.betas)

    items = [
        (s, t0) for s in train_subjects for t0 in range(dataset[s]["lpet"].dims[0])
    ]
    rng = np.random.default_rng(hyper.seed)
    torch.manual_seed(hyper.seed)

    history: list[LossBundle] = []
    best_psnr, best_state, best_step = -math.inf, None, -1
    step = 0
    for _epoch in range(hyper.epochs):
        order = rng.permutation(len(items))
        for start in range(0, len(items), hyper.batch_size):
            batch = [items[i] for i in order[start : start + hyper.batch_size]]
            x, cond, y = _window_batch(dataset, batch, norm, r)

            gen.train()
            fake = gen(x)

            # discriminator step
            opt_d.zero_grad()
            l_d, _ = adversarial_losses(disc(cond, y), disc(cond, fake.detach()))
            l_d.backward()
            opt_d.step()

            # generator step
            opt_g.zero_grad()
            _, l_g_adv = adversarial_losses(disc(cond, y).detach(), disc(cond, fake))
            l_charb = charbonnier_loss(fake, y, hyper.eps)
            l_perc = perceptual_loss(enc16, enc19, y, fake, hyper.eps)
            l_total = total_generator_loss(l_g_adv, l_charb, l_perc, hyper.alpha, hyper.beta)
            l_total.backward()
            opt_g.step()

            bundle = LossBundle(
                l_gan_d=l_d.item(),
                l_gan_g=l_g_adv.item(),
                l_charbonnier=l_charb.item(),
                l_perceptual=l_perc.item(),
                l_total_g=l_total.item(),
                step=step,
            )
            if not all(
                math.isfinite(v)
                for v in (bundle.l_gan_d, bundle.l_gan_g, bundle.l_charbonnier,
                          bundle.l_perceptual, bundle.l_total_g)
            ):
                raise RuntimeError(f"non-finite loss at step {step}: {bundle}")
            history.append(bundle)
            step += 1

        if split.get("val"):
            val_psnr = _validation_psnr(gen, dataset, split["val"], norm, r)
            if val_psnr > best_psnr:
                best_psnr, best_step = val_psnr, step - 1
                best_state = copy.deepcopy(gen.state_dict())

    if best_state is not None:
        gen.load_state_dict(best_state)
    info = {
        "norm_constant": norm,
        "best_val_psnr": best_psnr if math.isfinite(best_psnr) else None,
        "best_step": best_step,
        "steps": step,
    }
    return gen, disc, history, info
