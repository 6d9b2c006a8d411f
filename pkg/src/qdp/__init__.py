"""Differential privacy of noisy quantum measurements on small dense simulations."""

from .qstate import DensityMatrix, OutcomeDistribution, PauliObservable, QubitSubset
from .encodings import ClassicalNeighbourSpec, NeighbourRelation
from .privacy import PrivacyGuarantee, PrivacyProfile

__all__ = [
    "ClassicalNeighbourSpec",
    "DensityMatrix",
    "NeighbourRelation",
    "OutcomeDistribution",
    "PauliObservable",
    "PrivacyGuarantee",
    "PrivacyProfile",
    "QubitSubset",
]

__version__ = "0.1.0"
