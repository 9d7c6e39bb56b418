import numpy as np
import pytest

from petrec.errors import InvalidSpecError
from petrec.phantom import PhantomSpec, generate_phantom, simulate_low_dose
from petrec.volume import Modality, Volume3D


class TestGeneratePhantom:
    def test_degenerate_uptake_range_gives_constant_mask(self):
        spec = PhantomSpec(dims=(8, 16, 16), n_regions=2, uptake_range=(1.0, 1.0),
                           smoothing_sigma_vox=0.0)
        vol, atlas = generate_phantom(spec, seed=0)
        assert np.all(vol.data[atlas > 0] == 1.0)
        assert np.all(vol.data[atlas == 0] == spec.background_level)

    def test_deterministic(self):
        spec = PhantomSpec(dims=(8, 32, 32), n_regions=4)
        v1, a1 = generate_phantom(spec, seed=42)
        v2, a2 = generate_phantom(spec, seed=42)
        assert np.array_equal(v1.data, v2.data)
        assert np.array_equal(a1, a2)

    def test_atlas_has_exactly_n_regions(self):
        spec = PhantomSpec(dims=(16, 64, 64), n_regions=8)
        _, atlas = generate_phantom(spec, seed=7)
        labels = set(np.unique(atlas)) - {0}
        assert labels == set(range(1, 9))

    def test_label_one_is_largest_region(self):
        spec = PhantomSpec(dims=(16, 64, 64), n_regions=8)
        _, atlas = generate_phantom(spec, seed=7)
        counts = np.bincount(atlas.ravel())[1:]
        assert counts[0] == counts.max()

    def test_too_small_dims_rejected(self):
        with pytest.raises(InvalidSpecError):
            generate_phantom(PhantomSpec(dims=(1, 2, 2), n_regions=200), seed=0)

    def test_invalid_spec_rejected(self):
        with pytest.raises(InvalidSpecError):
            PhantomSpec(uptake_range=(2.0, 1.0)).validate()
        with pytest.raises(InvalidSpecError):
            PhantomSpec(n_regions=1).validate()

    def test_non_negative_and_finite(self, small_phantom):
        vol, _ = small_phantom
        assert np.all(vol.data >= 0)
        assert np.all(np.isfinite(vol.data))


class TestSimulateLowDose:
    def test_converges_to_fpet_at_full_dose_high_counts(self, small_phantom):
        fpet, atlas = small_phantom
        lpet = simulate_low_dose(fpet, dose_fraction=1.0, scale_counts=1e6, seed=5)
        inside = atlas > 0
        assert inside.sum() >= 10_000
        rel = np.abs(lpet.data[inside] - fpet.data[inside]) / fpet.data[inside]
        assert rel.mean() < 0.01

    def test_zero_volume_stays_zero(self):
        zeros = Volume3D(data=np.zeros((4, 8, 8)), modality=Modality.FPET)
        out = simulate_low_dose(zeros, seed=1)
        assert np.all(out.data == 0)

    def test_raw_count_mean_matches_poisson_expectation(self, small_phantom):
        fpet, atlas = small_phantom
        dose, scale = 0.05, 100.0
        lpet = simulate_low_dose(fpet, dose_fraction=dose, scale_counts=scale, seed=9)
        inside = atlas > 0
        lam = dose * scale * fpet.data[inside].astype(np.float64)
        raw = lpet.data[inside].astype(np.float64) * dose * scale
        # mean of Poisson draws vs mean rate, within 3 standard errors
        se = np.sqrt(lam.sum()) / lam.size
        assert abs(raw.mean() - lam.mean()) <= 3 * se

    def test_invalid_dose_fraction(self, small_phantom):
        fpet, _ = small_phantom
        for bad in (0.0, -0.1, 1.5):
            with pytest.raises(ValueError):
                simulate_low_dose(fpet, dose_fraction=bad, seed=0)

    def test_zero_regions_preserved_exactly(self, small_phantom):
        fpet, _ = small_phantom
        lpet = simulate_low_dose(fpet, seed=3)
        assert np.all(lpet.data[fpet.data == 0] == 0)

    def test_lower_dose_has_larger_relative_variance(self, small_phantom):
        fpet, atlas = small_phantom
        inside = atlas > 0
        assert inside.sum() >= 10_000
        errs = {}
        for dose in (0.05, 0.5):
            lp = simulate_low_dose(fpet, dose_fraction=dose, scale_counts=100.0, seed=13)
            errs[dose] = np.var(lp.data[inside] - fpet.data[inside])
        assert errs[0.05] > errs[0.5]

    def test_deterministic_given_seed(self, small_phantom):
        fpet, _ = small_phantom
        a = simulate_low_dose(fpet, seed=21)
        b = simulate_low_dose(fpet, seed=21)
        assert np.array_equal(a.data, b.data)
