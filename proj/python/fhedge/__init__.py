"""Homomorphically protected dense-network inference.

The C++ core handles the lattice arithmetic; this package exposes the main
operations: the leveled scheme (Scheme), plaintext model training (train,
load_model), and the protected inference pipeline (ProtectedPipeline) with
its exact integer oracle.
"""

from fhedge._core import (
    Ciphertext,
    Model,
    ParameterError,
    ProtectedPipeline,
    RangeError,
    Scheme,
    load_model,
    square_plus_two,
    train,
)

__all__ = [
    "Ciphertext",
    "Model",
    "ParameterError",
    "ProtectedPipeline",
    "RangeError",
    "Scheme",
    "load_model",
    "square_plus_two",
    "train",
]

__version__ = "0.1.0"
