import numpy as np
import pytest
import torch

from petrec.errors import InvalidSpecError, ShapeError
from petrec.transgan import (
    DiscriminatorConfig,
    GeneratorConfig,
    build_discriminator,
    build_generator,
    discriminator_forward,
    generator_forward,
)
from petrec.volume import SliceWindow


def _window(rng, n=3, h=64, w=64):
    return SliceWindow(slices=rng.uniform(0, 1, (n, h, w)).astype(np.float32),
                       center_index=n // 2)


class TestGenerator:
    def test_token_count_64_over_8(self):
        cfg = GeneratorConfig(patch_size=8)
        gen = build_generator(cfg, 0)
        x = torch.rand(1, 3, 64, 64)
        tok = gen.patch_embed(x)
        assert tok.shape[2] * tok.shape[3] == 64

    def test_output_shape_and_nonnegativity(self):
        gen = build_generator(GeneratorConfig(), 0)
        out = generator_forward(gen, _window(np.random.default_rng(0)))
        assert out.shape == (64, 64)
        assert np.all(out >= 0)
        assert np.all(np.isfinite(out))

    def test_build_deterministic(self):
        rng = np.random.default_rng(1)
        win = _window(rng)
        a = generator_forward(build_generator(GeneratorConfig(), 5), win)
        b = generator_forward(build_generator(GeneratorConfig(), 5), win)
        assert np.array_equal(a, b)

    def test_single_pixel_perturbation_propagates_globally(self):
        gen = build_generator(GeneratorConfig(), 0)
        rng = np.random.default_rng(2)
        win = _window(rng)
        base = generator_forward(gen, win)
        perturbed = win.slices.copy()
        perturbed[1, 3, 3] += 0.5
        out = generator_forward(
            gen, SliceWindow(slices=perturbed, center_index=1)
        )
        delta = np.abs(out - base)
        assert delta.max() > 0
        # attention mixes all patches: a far-away patch must also move
        assert delta[48:, 48:].max() > 0

    def test_divisibility_enforced(self):
        gen = build_generator(GeneratorConfig(patch_size=8), 0)
        with pytest.raises(ShapeError):
            gen(torch.rand(1, 3, 60, 60))

    def test_embed_dim_head_mismatch_rejected(self):
        with pytest.raises(InvalidSpecError):
            build_generator(GeneratorConfig(embed_dim=65, n_attention_heads=4), 0)

    def test_wrong_window_width_rejected(self):
        gen = build_generator(GeneratorConfig(input_slices=3), 0)
        with pytest.raises(ShapeError):
            generator_forward(gen, _window(np.random.default_rng(0), n=5))


class TestDiscriminator:
    def test_64x64_score_map_is_6x6(self):
        disc = build_discriminator(DiscriminatorConfig(base_channels=64), 0)
        rng = np.random.default_rng(3)
        scores = discriminator_forward(
            disc, rng.uniform(0, 1, (64, 64)), rng.uniform(0, 1, (64, 64))
        )
        assert scores.shape == (6, 6)
        assert np.all(np.isfinite(scores))

    def test_candidate_swap_changes_scores(self):
        disc = build_discriminator(DiscriminatorConfig(), 0)
        rng = np.random.default_rng(4)
        cond = rng.uniform(0, 1, (64, 64))
        a = discriminator_forward(disc, cond, rng.uniform(0, 1, (64, 64)))
        b = discriminator_forward(disc, cond, rng.uniform(0, 1, (64, 64)))
        assert not np.array_equal(a, b)

    def test_shape_mismatch_rejected(self):
        disc = build_discriminator(DiscriminatorConfig(), 0)
        with pytest.raises(ShapeError):
            discriminator_forward(disc, np.zeros((64, 64)), np.zeros((32, 32)))


@pytest.mark.slow
def test_full_size_256_slice_path():
    """The 256x256 slice geometry must work end to end."""
    gen = build_generator(GeneratorConfig(patch_size=8), 0)
    rng = np.random.default_rng(5)
    out = generator_forward(gen, _window(rng, h=256, w=256))
    assert out.shape == (256, 256)
    assert np.all(out >= 0)
    disc = build_discriminator(DiscriminatorConfig(), 0)
    scores = discriminator_forward(
        disc, rng.uniform(0, 1, (256, 256)), rng.uniform(0, 1, (256, 256))
    )
    assert scores.shape == (30, 30)
