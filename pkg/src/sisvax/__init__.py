"""Learn an unknown contact graph from SIS infection data, then vaccinate it.

Submodules: ``graph`` and ``spectral`` (graph substrate), ``sis`` (epidemic
simulation), ``learn`` (structure learning), ``treedec`` and ``srm``
(spectral radius minimization), ``experiments`` and ``cli`` (orchestration).
"""

from .graph import Graph, load_edge_list, save_edge_list
from .learn import LearnConfig, TransitionDataset, f1_score, sis_learn
from .sis import SisParams, Trajectory, simulate
from .spectral import spectral_radius
from .srm import (
    VaccinationResult,
    baseline_largest_degree,
    baseline_random,
    baseline_walk,
    dp_vaccinate,
    exhaustive_srm,
    greedy_vaccinate,
    tree_vaccinate,
)

__all__ = [
    "Graph", "load_edge_list", "save_edge_list",
    "LearnConfig", "TransitionDataset", "f1_score", "sis_learn",
    "SisParams", "Trajectory", "simulate",
    "spectral_radius",
    "VaccinationResult", "baseline_largest_degree", "baseline_random", "baseline_walk",
    "dp_vaccinate", "exhaustive_srm", "greedy_vaccinate", "tree_vaccinate",
]
__version__ = "0.1.0"
