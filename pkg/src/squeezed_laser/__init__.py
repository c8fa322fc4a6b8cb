"""Squeezed-laser simulation toolkit: Lindblad numerics, spectra and phase metrology."""

from .operators import HilbertSpace, TruncationError, TruncationWarning, suggest_cutoff
from .model import ModelParams, derived
from .liouvillian import Superoperator, SolverError, steady_state, evolve, liouvillian_gap

__version__ = "0.1.0"

__all__ = [
    "HilbertSpace",
    "TruncationError",
    "TruncationWarning",
    "suggest_cutoff",
    "ModelParams",
    "derived",
    "Superoperator",
    "SolverError",
    "steady_state",
    "evolve",
    "liouvillian_gap",
]
