import numpy as np
import pytest
import torch

from petrec.errors import ShapeError
from petrec.sdam import (
    SDAMConfig,
    build_sdam,
    predict_offsets,
    reconstruct_residual,
    refine_volume,
    sdam_loss,
)
from petrec.volume import Modality, SliceWindow, Volume3D, extract_window


def _window(rng, n, h=64, w=64):
    return SliceWindow(slices=rng.uniform(0, 1, (n, h, w)).astype(np.float32),
                       center_index=n // 2)


class TestPredictOffsets:
    @pytest.mark.parametrize("r,s", [(0, 1), (1, 3), (2, 3)])
    def test_offset_field_shape(self, r, s):
        cfg = SDAMConfig(r=r, kernel_size=s)
        model = build_sdam(cfg, seed=0)
        win = _window(np.random.default_rng(0), 2 * r + 1)
        delta = predict_offsets(model.offset_net, win)
        assert delta.shape == (2 * r + 1, 2 * s * s, 64, 64)

    def test_zero_initialized_head_gives_zero_offsets(self):
        model = build_sdam(SDAMConfig(r=1, kernel_size=3), seed=1)
        win = _window(np.random.default_rng(1), 3)
        delta = predict_offsets(model.offset_net, win)
        assert np.all(delta == 0)

    def test_deterministic(self):
        win = _window(np.random.default_rng(2), 5)
        a = predict_offsets(build_sdam(SDAMConfig(), 3).offset_net, win)
        b = predict_offsets(build_sdam(SDAMConfig(), 3).offset_net, win)
        assert np.array_equal(a, b)

    def test_wrong_slice_count_rejected(self):
        model = build_sdam(SDAMConfig(r=2), seed=0)
        with pytest.raises(ShapeError):
            predict_offsets(model.offset_net, _window(np.random.default_rng(0), 3))


class TestReconstructResidual:
    def test_zeroed_net_returns_target(self):
        cfg = SDAMConfig()
        model = build_sdam(cfg, seed=0)
        for p in model.recon_net.parameters():
            torch.nn.init.zeros_(p)
        rng = np.random.default_rng(4)
        fused = torch.rand(cfg.feature_channels, 16, 16)
        target = rng.uniform(0, 1, (16, 16)).astype(np.float32)
        refined = reconstruct_residual(model.recon_net, fused, target)
        assert np.array_equal(refined.data, target)
        assert np.all(refined.residual == 0)

    def test_identity_holds_bitwise(self):
        cfg = SDAMConfig()
        model = build_sdam(cfg, seed=5)
        rng = np.random.default_rng(5)
        fused = torch.rand(cfg.feature_channels, 16, 16)
        target = rng.uniform(0, 1, (16, 16)).astype(np.float32)
        refined = reconstruct_residual(model.recon_net, fused, target)
        assert refined.data.shape == (16, 16)
        assert np.array_equal(refined.data, refined.residual + target)

    def test_dim_mismatch(self):
        cfg = SDAMConfig()
        model = build_sdam(cfg, seed=0)
        with pytest.raises(ShapeError):
            reconstruct_residual(
                model.recon_net, torch.rand(cfg.feature_channels, 16, 16),
                np.zeros((8, 8), dtype=np.float32),
            )


class TestSDAMLoss:
    def test_zero_at_equality(self):
        a = torch.rand(4, 4)
        assert sdam_loss(a, a.clone()).item() == 0.0

    def test_unit_difference_on_2x2(self):
        y = torch.ones(2, 2)
        refined = torch.zeros(2, 2)
        assert sdam_loss(refined, y).item() == 4.0

    def test_mean_variant(self):
        y = torch.ones(2, 2)
        refined = torch.zeros(2, 2)
        assert sdam_loss(refined, y, mean=True).item() == 1.0

    def test_gradient_matches_finite_differences(self):
        rng = torch.Generator().manual_seed(6)
        refined = torch.rand(6, 6, generator=rng, dtype=torch.float64, requires_grad=True)
        y = torch.rand(6, 6, generator=rng, dtype=torch.float64)
        (grad,) = torch.autograd.grad(sdam_loss(refined, y), refined)
        fd = torch.zeros_like(grad)
        x = refined.detach().clone()
        step = 1e-3
        for i in range(x.numel()):
            orig = x.reshape(-1)[i].item()
            x.reshape(-1)[i] = orig + step
            fp = sdam_loss(x, y).item()
            x.reshape(-1)[i] = orig - step
            fm = sdam_loss(x, y).item()
            x.reshape(-1)[i] = orig
            fd.reshape(-1)[i] = (fp - fm) / (2 * step)
        assert (grad - fd).norm().item() / grad.norm().item() <= 1e-4

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            sdam_loss(torch.zeros(2, 2), torch.zeros(3, 3))


class TestRefineVolume:
    def _volume(self, depth=4):
        rng = np.random.default_rng(8)
        return Volume3D(data=rng.uniform(0, 1, (depth, 32, 32)),
                        subject_id="v", modality=Modality.GENERATED)

    def test_single_slice_volume_with_r2(self):
        model = build_sdam(SDAMConfig(r=2), seed=0)
        out = refine_volume(model, self._volume(depth=1))
        assert out.dims == (1, 32, 32)
        assert out.modality is Modality.REFINED

    def test_output_dims_match_input(self):
        model = build_sdam(SDAMConfig(r=2), seed=0)
        vol = self._volume()
        assert refine_volume(model, vol).dims == vol.dims

    def test_zeroed_recon_net_is_identity(self):
        model = build_sdam(SDAMConfig(r=1), seed=0)
        for p in model.recon_net.parameters():
            torch.nn.init.zeros_(p)
        vol = self._volume()
        out = refine_volume(model, vol)
        assert np.allclose(out.data, vol.data, atol=1e-6)

    def test_window_forward_equals_residual_plus_target(self):
        cfg = SDAMConfig(r=1)
        model = build_sdam(cfg, seed=9)
        vol = self._volume()
        win = extract_window(vol, 2, 1).slices
        x = torch.from_numpy(win)[None]
        with torch.no_grad():
            refined = model(x)
            offsets = model.offset_net(x).view(1, cfg.n_slices, -1, 32, 32)
            from petrec.sdam import deformable_aggregate

            fused = deformable_aggregate(x, offsets, model.kernel)
            residual = model.recon_net(fused)
        assert torch.equal(refined, residual + x[:, 1:2])
