"""Sparse random matrices, their corrected equilibrium measure and edge statistics."""

from . import ensemble, forests, freeconv, measure, polynomial, spectra, stats
from .ensemble import EnsembleParams, Model, SymmetricMatrix, sample, sample_erdos_renyi, sample_goe
from .errors import *  # noqa: F401,F403
from .forests import ForestTerm, WeightedForest, build_correction, forest_weight
from .freeconv import edge_t, edge_velocity, solve_stieltjes_t
from .measure import EquilibriumMeasure, find_edge, solve_stieltjes
from .polynomial import CorrectionPolynomial
from .spectra import eigen_decompose, greens_function
from .stats import ExperimentConfig, ExperimentReport, ks_two_sample

__version__ = "0.1.0"
