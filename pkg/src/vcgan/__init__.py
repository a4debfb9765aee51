"""F0 contour conversion with a cycle-consistent adversarial pair of warp generators.

The generators predict momenta that drive a kernel-based geodesic warp of the
source contour in Hz; a discriminator over (source, converted) pairs supplies
the adversarial signal. Everything runs on a small reverse-mode autodiff
engine over numpy.
"""
from .corpus import load_corpus, synth_corpus
from .evaluate import evaluate, mae
from .trainer import TrainState, train
from .warp import WarpConfig, generate_f0

__version__ = "0.1.0"

__all__ = [
    "TrainState",
    "WarpConfig",
    "evaluate",
    "generate_f0",
    "load_corpus",
    "mae",
    "synth_corpus",
    "train",
]
