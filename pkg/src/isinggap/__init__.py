"""Ising models on the hypercube: Glauber spectral gaps, influence
certificates, stochastic localization and needle decompositions."""

__version__ = "0.1.0"

from ._backend import BACKEND
from .errors import (CapExceededError, CertificateUnavailable, DimensionError, EigenSolverError,
                     IsingGapError, ModelFormatError, NumericalError)
from .model import (CanonicalizationResult, IsingModel, RankOnePair, canonicalize, conditional_mean,
                    decode, encode, energy, load_model, rank_one_model, save_model)
from .rng import SeededRng

__all__ = [
    "BACKEND",
    "CanonicalizationResult",
    "CapExceededError",
    "CertificateUnavailable",
    "DimensionError",
    "EigenSolverError",
    "IsingGapError",
    "IsingModel",
    "ModelFormatError",
    "NumericalError",
    "RankOnePair",
    "SeededRng",
    "canonicalize",
    "conditional_mean",
    "decode",
    "encode",
    "energy",
    "load_model",
    "rank_one_model",
    "save_model",
]
