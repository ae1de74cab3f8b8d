"""Ensemble weights and scorers.

The weights minimize ``alpha' A alpha`` subject to ``sum(alpha) = 1`` with
free signs. That is a single equality constraint, so the minimizer solves the
``(k + 1) x (k + 1)`` KKT system

    [[2A, 1], [1', 0]] @ [alpha; lam] = [0; 1]

and no QP solver is needed. Singular matrices (duplicated or constant
estimators) take a ridge path; see :func:`solve_weights`.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .bootstrap import ErrorMatrix, EstimatorReport, magic_bias
from .exceptions import InvalidErrorMatrixError

METHODS = ("opera", "opera_is", "opera_magic", "best_ope", "avg_ope")
COND_LIMIT = 1e12
SYMMETRY_TOL = 1e-12
PSD_TOL = 1e-10
PROXIMAL_STEPS = 50


@dataclass(frozen=True)
class WeightVector:
    alpha: np.ndarray
    ridge_used: float = 0.0
    objective_value: float = 0.0

    def __post_init__(self):
        a = np.array(self.alpha, dtype=float)
        a.setflags(write=False)
        object.__setattr__(self, "alpha", a)


def validate_error_matrix(a) -> np.ndarray:
    """Return ``a`` as a float array after checking it is symmetric PSD.

    Raises
    ------
    InvalidErrorMatrixError
        If ``a`` is not square, not finite, asymmetric beyond ``1e-12``
        relative, or has an eigenvalue below ``-1e-10`` relative.
    """
    A = np.asarray(a.a_hat if isinstance(a, ErrorMatrix) else a, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] == 0:
        raise InvalidErrorMatrixError(f"invalid error matrix: expected a nonempty square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InvalidErrorMatrixError("invalid error matrix: non-finite entries")
    scale = max(1.0, float(np.abs(A).max()))
    if np.abs(A - A.T).max() > SYMMETRY_TOL * scale:
        raise InvalidErrorMatrixError("invalid error matrix: not symmetric")
    if np.linalg.eigvalsh(A).min() < -PSD_TOL * scale:
        raise InvalidErrorMatrixError("invalid error matrix: not positive semidefinite")
    return A


def _kkt_solve(A: np.ndarray, rhs_top: np.ndarray) -> np.ndarray:
    k = len(A)
    K = np.zeros((k + 1, k + 1))
    K[:k, :k] = 2 * A
    K[:k, k] = 1.0
    K[k, :k] = 1.0
    return np.linalg.solve(K, np.append(rhs_top, 1.0))[:k]


def _kkt_cond(A: np.ndarray) -> float:
    k = len(A)
    K = np.zeros((k + 1, k + 1))
    K[:k, :k] = 2 * A
    K[:k, k] = K[k, :k] = 1.0
    return float(np.linalg.cond(K))


def solve_weights(a_hat) -> WeightVector:
    """Minimum of ``alpha' A alpha`` over ``sum(alpha) = 1``.

    The system is solved on ``A / (trace(A) / k)`` so that rescaling ``A``
    leaves the weights unchanged. When the KKT matrix is ill conditioned
    (condition number above 1e12), ``A + eps * I`` with
    ``eps = 1e-8 * max(trace(A) / k, 1)`` is solved instead and ``eps`` is
    reported as ``ridge_used``. Proximal-point steps then walk the ridge
    solution to a minimizer of the unridged objective, which keeps the
    result stable when estimators are duplicated.

    Parameters
    ----------
    a_hat : ErrorMatrix or array of shape (k, k)

    Returns
    -------
    WeightVector
    """
    A = validate_error_matrix(a_hat)
    k = len(A)
    if k == 1:
        return WeightVector(np.ones(1), 0.0, float(A[0, 0]))
    mean_diag = float(np.trace(A)) / k
    s = mean_diag if mean_diag > 0 else 1.0
    An = A / s
    ridge = 0.0
    cond = _kkt_cond(An)
    if np.isfinite(cond) and cond <= COND_LIMIT:
        alpha = _kkt_solve(An, np.zeros(k))
    else:
        ridge = 1e-8 * max(mean_diag, 1.0)
        eps = ridge / s
        Ar = An + eps * np.eye(k)
        alpha = _kkt_solve(Ar, np.zeros(k))
        for _ in range(PROXIMAL_STEPS):
            nxt = _kkt_solve(Ar, 2 * eps * alpha)
            done = np.abs(nxt - alpha).max() <= 1e-15 * max(1.0, np.abs(alpha).max())
            alpha = nxt
            if done:
                break
    alpha = alpha + (1.0 - alpha.sum()) / k
    return WeightVector(alpha, ridge, float(alpha @ A @ alpha))


@dataclass(frozen=True)
class EnsembleScore:
    """One combined estimate with the inputs that produced it."""

    method: str
    value: float
    weights: np.ndarray
    estimator_ids: tuple[str, ...]
    points: np.ndarray
    ridge_used: float = 0.0
    mse_hat_diagonal: np.ndarray = field(default_factory=lambda: np.zeros(0))
    selected: int | None = None

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "value": self.value,
            "weights": np.asarray(self.weights).tolist(),
            "ridge_used": self.ridge_used,
            "estimator_ids": list(self.estimator_ids),
            "points": np.asarray(self.points).tolist(),
            "mse_hat_diagonal": np.asarray(self.mse_hat_diagonal).tolist(),
        }

    def to_json(self, path: str | Path | None = None) -> str:
        text = json.dumps(self.to_dict())
        if path is not None:
            Path(path).write_text(text + "\n")
        return text


def _points(reports: Sequence[EstimatorReport]) -> np.ndarray:
    if not reports:
        raise ValueError("need at least one estimator report")
    return np.array([r.point for r in reports])


def _ids(reports) -> tuple[str, ...]:
    return tuple(r.estimator_id for r in reports)


def combine(method: str, reports: Sequence[EstimatorReport], a, diagonal=None) -> EnsembleScore:
    """Solve weights for matrix ``a`` and combine the full-data points."""
    points = _points(reports)
    w = solve_weights(a)
    A = np.asarray(a.a_hat if isinstance(a, ErrorMatrix) else a)
    diag = np.diag(A).copy() if diagonal is None else diagonal
    return EnsembleScore(method, float(w.alpha @ points), w.alpha, _ids(reports), points,
                         w.ridge_used, diag)


def opera_score(reports: Sequence[EstimatorReport], a_hat: ErrorMatrix) -> EnsembleScore:
    """Combined estimate ``alpha' points``; labelled ``opera_is`` under consistent centering."""
    method = "opera_is" if a_hat.plan.centering == "consistent" else "opera"
    return combine(method, reports, a_hat)


def best_ope_score(reports: Sequence[EstimatorReport], a_hat) -> EnsembleScore:
    """Point of the estimator with the smallest diagonal entry; ties go to the lowest index."""
    points = _points(reports)
    diag = np.diag(np.asarray(a_hat.a_hat if isinstance(a_hat, ErrorMatrix) else a_hat)).copy()
    i = int(np.argmin(diag))
    w = np.zeros(len(points))
    w[i] = 1.0
    return EnsembleScore("best_ope", float(points[i]), w, _ids(reports), points, 0.0, diag, i)


def avg_ope_score(reports: Sequence[EstimatorReport]) -> EnsembleScore:
    points = _points(reports)
    k = len(points)
    return EnsembleScore("avg_ope", float(points.mean()), np.full(k, 1.0 / k), _ids(reports), points)


def magic_error_matrix(reports: Sequence[EstimatorReport], wis_replicates, scale: float = 1.0,
                       v_max: float = 1.0) -> np.ndarray:
    """Surrogate error matrix ``scale * Cov(replicates) + b b'``.

    ``b`` holds each estimator's signed distance to the interquartile interval
    of the WIS replicates, so the diagonal equals
    :func:`~opera.bootstrap.magic_mse_hat`. Everything is divided by ``v_max``.
    """
    R = np.stack([r.replicates for r in reports]) / v_max
    wis = np.asarray(wis_replicates, dtype=float) / v_max
    b = np.array([magic_bias(r.point / v_max, wis) for r in reports])
    cov = np.atleast_2d(np.cov(R, ddof=1)) if R.shape[1] > 1 else np.zeros((len(reports),) * 2)
    a = scale * cov + np.outer(b, b)
    return 0.5 * (a + a.T)


def opera_magic_score(reports: Sequence[EstimatorReport], wis_replicates, scale: float = 1.0,
                      v_max: float = 1.0) -> EnsembleScore:
    return combine("opera_magic", reports, magic_error_matrix(reports, wis_replicates, scale, v_max))
