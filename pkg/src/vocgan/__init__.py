"""Multi-scale GAN vocoder built on a small numpy autodiff engine."""

from .discriminator import DiscriminatorConfig, build_discriminators, discriminate
from .generator import GeneratorConfig, build_generator, generate, generate_full, load_generator
from .trainer import Ablation, TrainConfig, run_training

__version__ = "0.1.0"

__all__ = [
    "Ablation", "DiscriminatorConfig", "GeneratorConfig", "TrainConfig",
    "build_discriminators", "build_generator", "discriminate", "generate",
    "generate_full", "load_generator", "run_training",
]
