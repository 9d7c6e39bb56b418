from .losses import (
    LossBundle,
    adversarial_losses,
    charbonnier_loss,
    perceptual_loss,
    total_generator_loss,
)
from .networks import (
    GeneratorConfig,
    DiscriminatorConfig,
    TransformerResNetGenerator,
    PatchDiscriminator,
    build_generator,
    build_discriminator,
    build_perceptual_encoders,
    generator_forward,
    discriminator_forward,
)
from .train import TransGANHyper, train_transgan, generate_volume

__all__ = [
    "LossBundle",
    "adversarial_losses",
    "charbonnier_loss",
    "perceptual_loss",
    "total_generator_loss",
    "GeneratorConfig",
    "DiscriminatorConfig",
    "TransformerResNetGenerator",
    "PatchDiscriminator",
    "build_generator",
    "build_discriminator",
    "build_perceptual_encoders",
    "generator_forward",
    "discriminator_forward",
    "TransGANHyper",
    "train_transgan",
    "generate_volume",
]
