from .deform import bilinear_sample_zero, deformable_aggregate
from .networks import OffsetUNet, ReconResNet, SDAMConfig, SDAMModel, build_sdam, predict_offsets
from .train import (
    RefinedSlice,
    SDAMHyper,
    reconstruct_residual,
    refine_volume,
    sdam_loss,
    train_sdam,
)

__all__ = [
    "bilinear_sample_zero",
    "deformable_aggregate",
    "OffsetUNet",
    "ReconResNet",
    "SDAMConfig",
    "SDAMModel",
    "build_sdam",
    "predict_offsets",
    "RefinedSlice",
    "SDAMHyper",
    "reconstruct_residual",
    "refine_volume",
    "sdam_loss",
    "train_sdam",
]
