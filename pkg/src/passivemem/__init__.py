"""Simulation toolkit for adversarial perturbations of passive quantum memories."""

from .analytics import BoundReport, report
from .decoders import Matching, decode_l1, decode_linf, verdict
from .experiments import ExperimentConfig, TrialStatistics
from .pauli import PauliString, ToricLattice, build_toric, syndrome
from .ring import PathEnsemble, RingSample, sample

__all__ = [
    "BoundReport", "report", "Matching", "decode_l1", "decode_linf", "verdict",
    "ExperimentConfig", "TrialStatistics", "PauliString", "ToricLattice", "build_toric",
    "syndrome", "PathEnsemble", "RingSample", "sample",
]
