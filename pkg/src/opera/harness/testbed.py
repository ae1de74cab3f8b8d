"""Synthetic Gaussian testbed with a known error matrix.

Estimates are drawn as ``V_hat ~ N(true_value + bias, Cov)``. The error
matrix is then known in closed form, ``A = Cov + bias bias'``, so weights
from the true ``A`` can be compared with weights from a simulated estimate
of it. Draws for the simulated matrix and for the MSE evaluation come from
separate streams.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..aggregate import WeightVector, solve_weights
from ..core import block_rng
from ..exceptions import ConfigError

STREAM_ESTIMATION, STREAM_EVALUATION = 0, 1


@dataclass(frozen=True)
class GaussianTestbedConfig:
    """Parameters of the testbed.

    ``correlations`` may be a full ``(k, k)`` matrix or a single off-diagonal
    value shared by all pairs.
    """

    biases: tuple[float, ...]
    variances: tuple[float, ...]
    correlations: object = 0.0
    true_value: float = 0.0
    trials: int = 10_000
    estimation_draws: int = 1_000
    seed: int = 0
    names: tuple[str, ...] = ()

    def __post_init__(self):
        k = len(self.biases)
        if k < 1 or len(self.variances) != k:
            raise ConfigError("biases and variances must have the same nonzero length")
        if min(self.variances) < 0:
            raise ConfigError("variances must be >= 0")
        if self.trials < 2 or self.estimation_draws < 2:
            raise ConfigError("trials and estimation_draws must be >= 2")
        if self.names and len(self.names) != k:
            raise ConfigError("names must match the number of estimators")
        cov = self.covariance
        if np.linalg.eigvalsh(cov).min() < -1e-12 * max(1.0, np.abs(cov).max()):
            raise ConfigError("covariance matrix is not positive semidefinite")

    @property
    def k(self) -> int:
        return len(self.biases)

    @property
    def covariance(self) -> np.ndarray:
        sd = np.sqrt(np.asarray(self.variances, dtype=float))
        corr = np.asarray(self.correlations, dtype=float)
        if corr.ndim == 0:
            corr = np.full((self.k, self.k), float(corr))
            np.fill_diagonal(corr, 1.0)
        if corr.shape != (self.k, self.k):
            raise ConfigError(f"correlations must be a scalar or a {self.k}x{self.k} matrix")
        return sd[:, None] * corr * sd[None, :]

    @property
    def analytic_error_matrix(self) -> np.ndarray:
        b = np.asarray(self.biases, dtype=float)
        return self.covariance + np.outer(b, b)

    @property
    def labels(self) -> list[str]:
        return list(self.names) or [f"estimator_{i + 1}" for i in range(self.k)]


def draw_estimates(config: GaussianTestbedConfig, size: int, stream: int) -> np.ndarray:
    """``size`` joint draws of the k estimates, shape ``(size, k)``."""
    rng = block_rng(config.seed, stream)
    mean = config.true_value + np.asarray(config.biases, dtype=float)
    # eigh tolerates singular covariances where Cholesky would fail
    w, V = np.linalg.eigh(config.covariance)
    root = V * np.sqrt(np.clip(w, 0.0, None))
    return mean + rng.standard_normal((size, config.k)) @ root.T


@dataclass
class GaussianTestbedResult:
    config: GaussianTestbedConfig
    analytic: WeightVector
    simulated: WeightVector
    simulated_error_matrix: np.ndarray
    rows: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "labels": self.config.labels,
            "analytic_error_matrix": self.config.analytic_error_matrix.tolist(),
            "simulated_error_matrix": self.simulated_error_matrix.tolist(),
            "analytic_weights": self.analytic.alpha.tolist(),
            "simulated_weights": self.simulated.alpha.tolist(),
            "rows": self.rows,
        }


def _row(name: str, sq: np.ndarray, draws: int) -> dict:
    mse = float(sq.mean())
    return {"env": "gaussian", "policy": "-", "n": draws, "method": name, "mse": mse, "rmse": math.sqrt(mse),
            "stderr": float(sq.std(ddof=1) / math.sqrt(len(sq))), "trials": len(sq)}


def run_gaussian_testbed(config: GaussianTestbedConfig) -> GaussianTestbedResult:
    """Weights from the analytic and simulated matrices and their evaluation MSE.

    Rows cover each estimator alone, the analytic-weight combination
    (``opera_analytic``), the simulated-weight combination (``opera``) and the
    plain average (``avg_ope``), all scored on the evaluation draws.
    """
    est = draw_estimates(config, config.estimation_draws, STREAM_ESTIMATION)
    err = est - config.true_value
    a_sim = err.T @ err / len(err)
    analytic = solve_weights(config.analytic_error_matrix)
    simulated = solve_weights(0.5 * (a_sim + a_sim.T))
    draws = draw_estimates(config, config.trials, STREAM_EVALUATION)
    err = draws - config.true_value
    rows = [_row(name, err[:, i] ** 2, config.estimation_draws) for i, name in enumerate(config.labels)]
    rows.append(_row("opera_analytic", (err @ analytic.alpha) ** 2, config.estimation_draws))
    rows.append(_row("opera", (err @ simulated.alpha) ** 2, config.estimation_draws))
    rows.append(_row("avg_ope", err.mean(axis=1) ** 2, config.estimation_draws))
    return GaussianTestbedResult(config, analytic, simulated, a_sim, rows)


def gaussian_config_from_dict(d: dict) -> GaussianTestbedConfig:
    known = {"biases", "variances", "correlations", "true_value", "trials", "estimation_draws", "seed", "names"}
    unknown = set(d) - known
    if unknown:
        raise ConfigError(f"unknown testbed keys: {sorted(unknown)}")
    try:
        return GaussianTestbedConfig(
            biases=tuple(float(b) for b in d["biases"]),
            variances=tuple(float(v) for v in d["variances"]),
            correlations=d.get("correlations", 0.0),
            true_value=float(d.get("true_value", 0.0)),
            trials=int(d.get("trials", 10_000)),
            estimation_draws=int(d.get("estimation_draws", 1_000)),
            seed=int(d.get("seed", 0)),
            names=tuple(d.get("names", ())),
        )
    except KeyError as exc:
        raise ConfigError(f"missing testbed key {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid testbed config: {exc}") from None
