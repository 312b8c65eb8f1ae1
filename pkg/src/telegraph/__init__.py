"""Exact simulation and Kac-limit error bounds for the Goldstein-Kac telegraph process."""

from .core_model import (
    Affine,
    CallFloor,
    Identity,
    ModelParams,
    ObservableSpec,
    Scalings,
    SimVariant,
    derive_scalings,
    eval_f,
    eval_g,
    lipschitz_kappa,
)
from .rng import RngStream

__version__ = "0.1.0"
