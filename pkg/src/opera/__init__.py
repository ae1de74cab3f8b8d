"""Stacked off-policy evaluation.

Base estimators (IS, WIS, FQE, model-based, DR, kernel direct method) are
bootstrapped on shared subsamples; the resulting error matrix gives
sum-to-one weights that combine their estimates into one lower-MSE value.
"""
from .aggregate import (EnsembleScore, WeightVector, avg_ope_score, best_ope_score, opera_magic_score,
                        opera_score, solve_weights)
from .bootstrap import (BootstrapPlan, ErrorMatrix, EstimatorReport, build_error_matrix, collect_reports,
                        magic_mse_hat, mse_hat, resample)
from .core import (BanditDataset, Dataset, Step, TabularMdp, TabularPolicy, Trajectory, discounted_return,
                   load_mdp, rollout, save_mdp, true_value_dp, true_value_mc)
from .ensemble import OPERA, AvgOPE, BestOPE, OPERAMagic
from .estimators import (OpeEstimator, dm_kernel_estimate, dr_estimate, fqe_estimate, is_estimate,
                         make_estimator, mb_estimate, wis_estimate)
from .exceptions import (ConfigError, DegenerateWeightsError, InsufficientDataError, InvalidErrorMatrixError,
                         OpeError, SupportViolationError, UnstableEstimatorError)

__version__ = "0.1.0"

__all__ = [
    "OPERA", "AvgOPE", "BanditDataset", "BestOPE", "BootstrapPlan", "ConfigError", "Dataset",
    "DegenerateWeightsError", "EnsembleScore", "ErrorMatrix", "EstimatorReport", "InsufficientDataError",
    "InvalidErrorMatrixError", "OPERAMagic", "OpeError", "OpeEstimator", "Step", "SupportViolationError",
    "TabularMdp", "TabularPolicy", "Trajectory", "UnstableEstimatorError", "WeightVector", "avg_ope_score",
    "best_ope_score", "build_error_matrix", "collect_reports", "discounted_return", "dm_kernel_estimate",
    "dr_estimate", "fqe_estimate", "is_estimate", "load_mdp", "magic_mse_hat", "make_estimator", "mb_estimate",
    "mse_hat", "opera_magic_score", "opera_score", "resample", "rollout", "save_mdp", "solve_weights",
    "true_value_dp", "true_value_mc", "wis_estimate",
]
