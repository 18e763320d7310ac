"""Joint PMF estimation by partially coupled factorization of 3D marginals."""

from .coupling import (Coupling, degree_sequence, gen_balanced, gen_full, gen_plus1,
                       gen_plus2, gen_random, is_connected, lyndon_words, step)
from .marginals import BinnedDataset, bin_dataset, estimate_marginals, marginalize_model_3d
from .metrics import err_1d, err_3d, evaluate, fms
from .simplex import simplex_project
from .solver import FactorModel, FitReport, SolverConfig, fit, init_model, objective

__version__ = "0.1.0"

__all__ = [
    "Coupling", "degree_sequence", "gen_balanced", "gen_full", "gen_plus1", "gen_plus2",
    "gen_random", "is_connected", "lyndon_words", "step",
    "BinnedDataset", "bin_dataset", "estimate_marginals", "marginalize_model_3d",
    "err_1d", "err_3d", "evaluate", "fms", "simplex_project",
    "FactorModel", "FitReport", "SolverConfig", "fit", "init_model", "objective",
]
