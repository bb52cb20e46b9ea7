"""Commuting isometric pairs: models, defect classes and Koszul spectra."""
from .bcl import BclTriple, DefectClass, classify, finite_triple, random_triple
from .defect import (defect_window_matrix, equivalence_suite, fringe_matrices,
                     verify_projection_identities, wold)
from .models import ModelPair, resolve, shipped_models

__version__ = "0.1.0"

__all__ = ["BclTriple", "DefectClass", "ModelPair", "classify", "defect_window_matrix",
           "equivalence_suite", "finite_triple", "fringe_matrices", "random_triple", "resolve",
           "shipped_models", "verify_projection_identities", "wold"]
