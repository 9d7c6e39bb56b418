"""End-to-end orchestration behind the CLI: data generation, two-phase
training, evaluation with metric/SUVR reporting, and plot emission.

Directory layout under the configured output_dir:

    data/<subject_id>/{fpet,lpet,atlas}.pvol + data_manifest.json
    checkpoints/fold<t>/{transgan,sdam}.pt + *_history.csv
    eval/manifest.json, metrics.csv, suvr/*.csv, volumes/*.pvol, plots/*.png
"""

from __future__ import annotations

import csv
import json
import time
from pathlib import Path

import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .config import config_hash
from .errors import DatasetError, PetrecError, PrerequisiteError
from .folds import FoldAssignment, make_folds
from .metrics import evaluate_volume
from .phantom import PhantomSpec, generate_phantom, simulate_low_dose
from .sdam import SDAMConfig, SDAMHyper, build_sdam, refine_volume, train_sdam
from .suvr import ROIAtlas, agreement_report, compute_suvr
from .transgan import (
    DiscriminatorConfig,
    GeneratorConfig,
    TransGANHyper,
    build_discriminator,
    build_generator,
    build_perceptual_encoders,
    generate_volume,
    train_transgan,
)
from .volume import Volume3D, read_atlas, read_volume, write_atlas, write_volume


def count_parameters(model) -> int:
    """Total trainable scalar parameters; frozen modules contribute zero."""
    return sum(p.numel() for p in model.parameters() if p.requires_grad)


def _out_dir(cfg) -> Path:
    return Path(cfg["output_dir"])


def _subject_ids(cfg) -> list[str]:
    return [f"subj{i:03d}" for i in range(cfg["phantom"]["n_subjects"])]


def _refuse_overwrite(path: Path, force: bool, what: str) -> None:
    if path.exists() and not force:
        raise PetrecError(f"{what} already exists at {path}; pass --force to overwrite")


def _phantom_spec(cfg) -> PhantomSpec:
    p = cfg["phantom"]
    return PhantomSpec(
        dims=tuple(p["dims"]),
        n_regions=p["n_regions"],
        uptake_range=tuple(p["uptake_range"]),
        smoothing_sigma_vox=p["smoothing_sigma_vox"],
        background_level=p["background_level"],
    )


def cmd_generate_data(cfg: dict, force: bool = False) -> Path:
    data_dir = _out_dir(cfg) / "data"
    _refuse_overwrite(data_dir, force, "dataset")
    spec = _phantom_spec(cfg)
    seed = cfg["seed"]
    manifest = {
        "config_hash": config_hash(cfg),
        "dose_fraction": cfg["dose"]["dose_fraction"],
        "scale_counts": cfg["dose"]["scale_counts"],
        "subjects": {},
    }
    for i, subject_id in enumerate(_subject_ids(cfg)):
        phantom_seed = seed + 1000 * i
        dose_seed = seed + 1000 * i + 500
        fpet, atlas = generate_phantom(spec, phantom_seed)
        fpet.subject_id = subject_id
        lpet = simulate_low_dose(
            fpet,
            dose_fraction=cfg["dose"]["dose_fraction"],
            scale_counts=cfg["dose"]["scale_counts"],
            seed=dose_seed,
        )
        sdir = data_dir / subject_id
        write_volume(fpet, sdir / "fpet.pvol")
        write_volume(lpet, sdir / "lpet.pvol")
        write_atlas(atlas, sdir / "atlas.pvol", subject_id=subject_id)
        manifest["subjects"][subject_id] = {
            "phantom_seed": phantom_seed,
            "dose_seed": dose_seed,
        }
    with open(data_dir / "data_manifest.json", "w") as f:
        json.dump(manifest, f, indent=2)
    return data_dir


def load_dataset(cfg: dict) -> dict[str, dict]:
    data_dir = _out_dir(cfg) / "data"
    dataset = {}
    for subject_id in _subject_ids(cfg):
        sdir = data_dir / subject_id
        for name in ("fpet.pvol", "lpet.pvol", "atlas.pvol"):
            if not (sdir / name).exists():
                raise PrerequisiteError(
                    f"missing {sdir / name}; run 'petrec generate-data' first"
                )
        dataset[subject_id] = {
            "fpet": read_volume(sdir / "fpet.pvol"),
            "lpet": read_volume(sdir / "lpet.pvol"),
            "atlas": read_atlas(sdir / "atlas.pvol"),
        }
    return dataset


def _folds(cfg) -> FoldAssignment:
    return make_folds(_subject_ids(cfg), cfg["folds"]["k"], cfg["seed"])


def _gen_cfg(cfg) -> GeneratorConfig:
    return GeneratorConfig(**cfg["generator"])


def _sdam_cfg(cfg) -> SDAMConfig:
    return SDAMConfig(**cfg["sdam"])


def _write_history_csv(path: Path, header: list[str], rows: list) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        writer.writerows(rows)


def _load_generator(ckpt_path: Path):
    payload = load_checkpoint(ckpt_path, expected_kind="transgan")
    gen = build_generator(GeneratorConfig(**payload["config"]["generator"]), payload["seed"])
    gen.load_state_dict(payload["state"]["generator"])
    gen.eval()
    return gen, payload


def _load_sdam(ckpt_path: Path):
    payload = load_checkpoint(ckpt_path, expected_kind="sdam")
    model = build_sdam(SDAMConfig(**payload["config"]["sdam"]), payload["seed"])
    model.load_state_dict(payload["state"]["sdam"])
    model.eval()
    return model, payload


def cmd_train(cfg: dict, phase: str, force: bool = False) -> list[Path]:
    if phase not in ("transgan", "sdam"):
        raise PetrecError(f"unknown training phase {phase!r}")
    dataset = load_dataset(cfg)
    folds = _folds(cfg)
    written = []
    for test_fold in cfg["folds"]["folds_to_run"]:
        fold_dir = _out_dir(cfg) / "checkpoints" / f"fold{test_fold}"
        ckpt_path = fold_dir / f"{phase}.pt"
        _refuse_overwrite(ckpt_path, force, f"{phase} checkpoint")
        split = folds.split_subjects(test_fold)

        if phase == "transgan":
            hyper_cfg = cfg["training"]["transgan"]
            hyper = TransGANHyper(
                epochs=hyper_cfg["epochs"],
                batch_size=hyper_cfg["batch_size"],
                lr=hyper_cfg["lr"],
                betas=tuple(hyper_cfg["betas"]),
                alpha=hyper_cfg["alpha"],
                beta=hyper_cfg["beta"],
                eps=hyper_cfg["eps"],
                seed=cfg["seed"] + test_fold,
            )
            encoders = build_perceptual_encoders(
                cfg["perceptual"]["vgg16_weights"],
                cfg["perceptual"]["vgg19_weights"],
                seed=cfg["seed"],
            )
            gen, disc, history, info = train_transgan(
                dataset, split, _gen_cfg(cfg), DiscriminatorConfig(**cfg["discriminator"]),
                hyper, encoders,
            )
            save_checkpoint(
                ckpt_path, "transgan", cfg, info["norm_constant"], hyper.seed,
                {"generator": gen.state_dict(), "discriminator": disc.state_dict()},
                meta={k: info[k] for k in ("best_val_psnr", "best_step", "steps")},
            )
            _write_history_csv(
                fold_dir / "transgan_history.csv",
                ["step", "l_gan_d", "l_gan_g", "l_charbonnier", "l_perceptual", "l_total_g"],
                [(b.step, b.l_gan_d, b.l_gan_g, b.l_charbonnier, b.l_perceptual, b.l_total_g)
                 for b in history],
            )
        else:
            transgan_path = fold_dir / "transgan.pt"
            if not transgan_path.exists():
                raise PrerequisiteError(
                    f"missing transGAN checkpoint {transgan_path}; "
                    "run 'petrec train --phase transgan' first"
                )
            gen, gen_payload = _load_generator(transgan_path)
            norm = gen_payload["norm_constant"]
            r_gen = gen.cfg.input_slices // 2
            needed = split["train"] + split["val"]
            generated = {
                s: generate_volume(gen, dataset[s]["lpet"], norm, r_gen) for s in needed
            }
            truth = {s: dataset[s]["fpet"] for s in needed}
            hyper_cfg = cfg["training"]["sdam"]
            hyper = SDAMHyper(
                epochs=hyper_cfg["epochs"],
                batch_size=hyper_cfg["batch_size"],
                lr=hyper_cfg["lr"],
                betas=tuple(hyper_cfg["betas"]),
                mean_loss=hyper_cfg.get("mean_loss", True),
                seed=cfg["seed"] + 7000 + test_fold,
            )
            model, history, info = train_sdam(generated, truth, split, _sdam_cfg(cfg), hyper)
            save_checkpoint(
                ckpt_path, "sdam", cfg, info["norm_constant"], hyper.seed,
                {"sdam": model.state_dict()},
                meta={k: info[k] for k in ("best_val_psnr", "best_step", "steps")},
            )
            _write_history_csv(
                fold_dir / "sdam_history.csv", ["step", "loss"], history
            )
        written.append(ckpt_path)
    return written


def _mean_std(values: list[float]) -> dict:
    arr = np.asarray(values, dtype=np.float64)
    return {"mean": float(arr.mean()), "std": float(arr.std(ddof=1)) if arr.size > 1 else 0.0}


def _difference_map(ref: Volume3D, test: Volume3D, path: Path, title: str) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    mid = ref.dims[0] // 2
    diff = np.abs(ref.data[mid] - test.data[mid])
    fig, ax = plt.subplots(figsize=(4, 4))
    im = ax.imshow(diff, cmap="jet", vmin=0.0)  # blue = small, red = large
    ax.set_title(title)
    ax.axis("off")
    fig.colorbar(im, ax=ax, fraction=0.046)
    fig.savefig(path, dpi=100, bbox_inches="tight")
    plt.close(fig)


def _bland_altman_plot(scatter: np.ndarray, stats, path: Path, title: str) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 4))
    ax.scatter(scatter[:, 0], scatter[:, 1], s=12, color="green", alpha=0.7)
    for y, style in ((stats.mean_diff, "-"), (stats.loa_low, "--"), (stats.loa_high, "--")):
        ax.axhline(y, linestyle=style, color="gray")
    ax.set_xlabel("mean of paired SUVRs")
    ax.set_ylabel("difference of paired SUVRs")
    ax.set_title(title)
    fig.savefig(path, dpi=100, bbox_inches="tight")
    plt.close(fig)


def cmd_evaluate(cfg: dict, force: bool = False) -> dict:
    eval_dir = _out_dir(cfg) / "eval"
    _refuse_overwrite(eval_dir / "manifest.json", force, "evaluation manifest")
    dataset = load_dataset(cfg)
    folds = _folds(cfg)

    t_start = time.monotonic()
    metric_rows = []
    suvr_rows = []
    per_modality_metrics: dict[str, dict[str, list[float]]] = {}
    suvr_pairs: dict[str, list] = {"lpet": [], "generated": [], "refined": []}
    param_counts = None

    plots_dir = eval_dir / "plots"
    vols_dir = eval_dir / "volumes"
    suvr_dir = eval_dir / "suvr"
    for d in (plots_dir, vols_dir, suvr_dir):
        d.mkdir(parents=True, exist_ok=True)

    for test_fold in cfg["folds"]["folds_to_run"]:
        fold_dir = _out_dir(cfg) / "checkpoints" / f"fold{test_fold}"
        for name in ("transgan.pt", "sdam.pt"):
            if not (fold_dir / name).exists():
                raise PrerequisiteError(
                    f"missing checkpoint {fold_dir / name}; run 'petrec train' first"
                )
        gen, gen_payload = _load_generator(fold_dir / "transgan.pt")
        sdam_model, sdam_payload = _load_sdam(fold_dir / "sdam.pt")
        norm = gen_payload["norm_constant"]
        sdam_norm = sdam_payload["norm_constant"]
        r_gen = gen.cfg.input_slices // 2

        if param_counts is None:
            disc = build_discriminator(DiscriminatorConfig(**cfg["discriminator"]),
                                       gen_payload["seed"] + 1)
            enc16, enc19 = build_perceptual_encoders(seed=cfg["seed"])
            param_counts = {
                "generator": count_parameters(gen),
                "discriminator": count_parameters(disc),
                "sdam": count_parameters(sdam_model),
                "perceptual_encoders": count_parameters(enc16) + count_parameters(enc19),
            }
            param_counts["total_trainable"] = (
                param_counts["generator"] + param_counts["discriminator"]
                + param_counts["sdam"]
            )

        for subject_id in folds.split_subjects(test_fold)["test"]:
            entry = dataset[subject_id]
            fpet = entry["fpet"]
            atlas = ROIAtlas(labels=entry["atlas"])
            mask = atlas.brain_mask

            generated = generate_volume(gen, entry["lpet"], norm, r_gen)
            refined = refine_volume(sdam_model, generated, sdam_norm)
            write_volume(generated, vols_dir / f"{subject_id}_generated.pvol")
            write_volume(refined, vols_dir / f"{subject_id}_refined.pvol")

            truth_suvr = compute_suvr(fpet, atlas)
            for modality, vol in (
                ("lpet", entry["lpet"]), ("generated", generated), ("refined", refined)
            ):
                report = evaluate_volume(fpet, vol, mask)
                metric_rows.append(
                    [test_fold, subject_id, modality, report.psnr_db, report.ssim,
                     report.vsmd, report.n_voxels]
                )
                bucket = per_modality_metrics.setdefault(
                    modality, {"psnr": [], "ssim": [], "vsmd": []}
                )
                bucket["psnr"].append(report.psnr_db)
                bucket["ssim"].append(report.ssim)
                bucket["vsmd"].append(report.vsmd)

                table = compute_suvr(vol, atlas)
                suvr_pairs[modality].append((table, truth_suvr))
                for region, value in table.values.items():
                    suvr_rows.append([subject_id, modality, region, value])

                if cfg["plots"]["difference_maps"]:
                    _difference_map(
                        fpet, vol, plots_dir / f"{subject_id}_{modality}_diff.png",
                        f"{subject_id} {modality} |difference|",
                    )

    agreement = {}
    for modality, pairs in suvr_pairs.items():
        stats, scatter = agreement_report(pairs)
        agreement[modality] = stats.to_json_dict()
        np.savetxt(
            suvr_dir / f"bland_altman_scatter_{modality}.csv",
            scatter, delimiter=",", header="pair_mean,pair_diff", comments="",
        )
        if cfg["plots"]["bland_altman"]:
            _bland_altman_plot(
                scatter, stats, plots_dir / f"bland_altman_{modality}.png",
                f"SUVR agreement: {modality} vs ground truth",
            )

    _write_history_csv(
        eval_dir / "metrics.csv",
        ["test_fold", "subject_id", "modality", "psnr_db", "ssim", "vsmd", "n_voxels"],
        metric_rows,
    )
    _write_history_csv(
        suvr_dir / "suvr_tables.csv",
        ["subject_id", "modality", "region_id", "suvr"],
        suvr_rows,
    )

    manifest = {
        "config_hash": config_hash(cfg),
        "seed": cfg["seed"],
        "folds_evaluated": cfg["folds"]["folds_to_run"],
        "metrics": {
            modality: {name: _mean_std(values) for name, values in buckets.items()}
            for modality, buckets in per_modality_metrics.items()
        },
        "suvr_agreement": agreement,
        "parameter_counts": param_counts,
        "wall_clock_seconds": time.monotonic() - t_start,
    }
    with open(eval_dir / "manifest.json", "w") as f:
        json.dump(manifest, f, indent=2)
    return manifest


def cmd_suvr_report(cfg: dict, force: bool = False) -> dict:
    """Standalone SUVR agreement report from previously evaluated volumes."""
    eval_dir = _out_dir(cfg) / "eval"
    vols_dir = eval_dir / "volumes"
    if not vols_dir.exists():
        raise PrerequisiteError(
            f"missing evaluated volumes at {vols_dir}; run 'petrec evaluate' first"
        )
    report_path = eval_dir / "suvr_report.json"
    _refuse_overwrite(report_path, force, "SUVR report")
    dataset = load_dataset(cfg)

    out = {}
    for modality in ("generated", "refined"):
        pairs = []
        for subject_id, entry in dataset.items():
            path = vols_dir / f"{subject_id}_{modality}.pvol"
            if not path.exists():
                continue
            atlas = ROIAtlas(labels=entry["atlas"])
            pairs.append(
                (compute_suvr(read_volume(path), atlas), compute_suvr(entry["fpet"], atlas))
            )
        if pairs:
            stats, _ = agreement_report(pairs)
            out[modality] = stats.to_json_dict()
    if not out:
        raise DatasetError(f"no evaluated volumes found under {vols_dir}")
    with open(report_path, "w") as f:
        json.dump(out, f, indent=2)
    return out


def cmd_info(cfg: dict) -> dict:
    gen = build_generator(_gen_cfg(cfg), cfg["seed"])
    # positional encoding depends only on geometry; size with a probe forward
    import torch

    dims = cfg["phantom"]["dims"]
    with torch.no_grad():
        gen(torch.zeros(1, gen.cfg.input_slices, dims[1], dims[2]))
    disc = build_discriminator(DiscriminatorConfig(**cfg["discriminator"]), cfg["seed"] + 1)
    sdam_model = build_sdam(_sdam_cfg(cfg), cfg["seed"] + 2)
    enc16, enc19 = build_perceptual_encoders(seed=cfg["seed"])
    info = {
        "config_hash": config_hash(cfg),
        "output_dir": cfg["output_dir"],
        "subjects": _subject_ids(cfg),
        "parameter_counts": {
            "generator": count_parameters(gen),
            "discriminator": count_parameters(disc),
            "sdam": count_parameters(sdam_model),
            "perceptual_encoders": count_parameters(enc16) + count_parameters(enc19),
        },
    }
    info["parameter_counts"]["total_trainable"] = (
        info["parameter_counts"]["generator"]
        + info["parameter_counts"]["discriminator"]
        + info["parameter_counts"]["sdam"]
    )
    return info
