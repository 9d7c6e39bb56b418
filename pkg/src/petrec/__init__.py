"""petrec: low-dose PET slice synthesis and refinement at desk scale.

Synthetic phantom data, a transformer-encoded adversarial generator, joint
deformable multi-slice refinement, quality metrics (PSNR/SSIM/VSMD), and
whole-volume SUVR agreement analysis, driven by a single CLI.
"""

from .errors import (
    ConfigError,
    DatasetError,
    InvalidSpecError,
    PetrecError,
    PrerequisiteError,
    ShapeError,
    VolumeParseError,
)
from .folds import FoldAssignment, make_folds
from .metrics import MetricsReport, evaluate_volume, psnr, ssim, vsmd
from .phantom import PhantomSpec, generate_phantom, simulate_low_dose
from .suvr import AgreementStats, ROIAtlas, SUVRTable, agreement_report, bland_altman, compute_suvr
from .volume import (
    Modality,
    SliceWindow,
    Volume3D,
    extract_window,
    read_atlas,
    read_volume,
    write_atlas,
    write_volume,
)

__version__ = "0.1.0"
