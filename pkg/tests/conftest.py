import numpy as np
import pytest

from petrec.phantom import PhantomSpec, generate_phantom, simulate_low_dose
from petrec.volume import Modality, Volume3D


@pytest.fixture(scope="session")
def small_phantom():
    spec = PhantomSpec(dims=(16, 64, 64), n_regions=8, uptake_range=(0.5, 2.0),
                       smoothing_sigma_vox=1.5)
    vol, atlas = generate_phantom(spec, seed=7)
    return vol, atlas


@pytest.fixture(scope="session")
def paired_volumes(small_phantom):
    fpet, atlas = small_phantom
    lpet = simulate_low_dose(fpet, dose_fraction=0.05, scale_counts=100.0, seed=11)
    return fpet, lpet, atlas


@pytest.fixture()
def random_volume():
    rng = np.random.default_rng(3)
    return Volume3D(data=rng.uniform(0, 2, size=(6, 16, 16)), subject_id="rand",
                    modality=Modality.FPET)
