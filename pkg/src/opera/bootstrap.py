"""Subsample bootstrap of base estimators and the cross-estimator error matrix.

For a dataset of ``n`` trajectories, every resample draws ``n1 = ceil(n**eta)``
trajectories with replacement. Resample ``j`` is drawn once from the stream
``(seed, j)`` and shared by all estimators, so the replicate vectors of two
estimators are paired. With ``delta = replicates - center`` (one row per
estimator), the error matrix is

    A_hat = (1 / B) * (n1 / n) * delta @ delta.T

The ``n1 / n`` factor rescales subsample spread to the full-sample size. Any
positive factor leaves the ensemble weights unchanged.

Anything with ``__len__`` and ``subset(indices)`` can be bootstrapped, which
includes :class:`~opera.core.Dataset` and :class:`~opera.core.BanditDataset`.
"""
from __future__ import annotations

import csv
import itertools
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import block_rng, derive_seed
from .exceptions import OpeError, UnstableEstimatorError

CENTERINGS = ("self", "consistent")


@dataclass(frozen=True)
class BootstrapPlan:
    """How to resample.

    Parameters
    ----------
    n_bootstrap : int
        Number of resamples ``B``; ignored when ``exhaustive``.
    eta : float
        Subsample exponent, ``n1 = ceil(n ** eta)``.
    seed : int
        Root of the per-resample streams.
    centering : {"self", "consistent"}
        Center each estimator's replicates on its own full-data estimate, or
        on the full-data estimate of ``center_estimator`` for every estimator.
    n1 : int, optional
        Fixed subsample size overriding ``eta``.
    exhaustive : bool
        Enumerate every ordered index tuple (``n ** n1`` resamples) instead of
        sampling; the error matrix then equals its conditional expectation.
    max_fallback_rate : float
        Largest tolerated share of failed resamples per estimator.
    """

    n_bootstrap: int = 200
    eta: float = 0.5
    seed: int = 0
    centering: str = "self"
    center_estimator: str | None = None
    n1: int | None = None
    exhaustive: bool = False
    max_fallback_rate: float = 0.2

    def __post_init__(self):
        if self.n_bootstrap < 2:
            raise ValueError("n_bootstrap must be >= 2")
        if not 0.0 < self.eta <= 1.0:
            raise ValueError("eta must be in (0, 1]")
        if self.centering not in CENTERINGS:
            raise ValueError(f"centering must be one of {CENTERINGS}")
        if self.centering == "consistent" and not self.center_estimator:
            raise ValueError("consistent centering needs center_estimator")
        if self.n1 is not None and self.n1 < 1:
            raise ValueError("n1 must be >= 1")
        if not 0.0 <= self.max_fallback_rate <= 1.0:
            raise ValueError("max_fallback_rate must be in [0, 1]")

    def subsample_size(self, n: int) -> int:
        if self.n1 is not None:
            return self.n1
        # the small slack keeps exact powers (n = m**2 at eta = 0.5) from rounding up
        return max(1, math.ceil(n ** self.eta - 1e-9))

    def num_resamples(self, n: int) -> int:
        return n ** self.subsample_size(n) if self.exhaustive else self.n_bootstrap

    def resample_indices(self, n: int) -> np.ndarray:
        """Index matrix of shape ``(B, n1)``; row ``j`` is resample ``j``."""
        n1 = self.subsample_size(n)
        if self.exhaustive:
            return np.array(list(itertools.product(range(n), repeat=n1)), dtype=np.int64).reshape(-1, n1)
        return np.stack([block_rng(self.seed, j).integers(0, n, n1) for j in range(self.n_bootstrap)])


def resample(dataset, n1: int, seed: int):
    """``n1`` trajectories drawn uniformly with replacement; deterministic in ``seed``."""
    if n1 < 1:
        raise ValueError("n1 must be >= 1")
    return dataset.subset(block_rng(seed).integers(0, len(dataset), n1))


@dataclass(frozen=True)
class EstimatorReport:
    estimator_id: str
    point: float
    replicates: np.ndarray
    n_fallback: int = 0

    def __post_init__(self):
        r = np.array(self.replicates, dtype=float)
        r.setflags(write=False)
        object.__setattr__(self, "replicates", r)

    @property
    def n_bootstrap(self) -> int:
        return len(self.replicates)


def _evaluate(estimator, policy, data, seed):
    try:
        value = float(estimator(policy, data, seed))
    except (OpeError, ArithmeticError, np.linalg.LinAlgError):
        return None
    return value if math.isfinite(value) else None


def collect_reports(estimators: Sequence, policy, dataset, plan: BootstrapPlan,
                    n_jobs: int = 1) -> list[EstimatorReport]:
    """Evaluate every estimator on the full data and on the shared resamples.

    A failed or non-finite replicate is replaced by the estimator's
    full-data estimate and counted.

    Raises
    ------
    UnstableEstimatorError
        If an estimator fails on more than ``plan.max_fallback_rate`` of the
        resamples.
    """
    n = len(dataset)
    points = [float(est(policy, dataset, plan.seed)) for est in estimators]
    idx = plan.resample_indices(n)

    def run(j):
        sub = dataset.subset(idx[j])
        seed = derive_seed(plan.seed, j)
        return [_evaluate(est, policy, sub, seed) for est in estimators]

    if n_jobs > 1:
        with ThreadPoolExecutor(n_jobs) as pool:
            rows = list(pool.map(run, range(len(idx))))
    else:
        rows = [run(j) for j in range(len(idx))]

    reports = []
    for i, est in enumerate(estimators):
        column = [row[i] for row in rows]
        failures = sum(v is None for v in column)
        if failures > plan.max_fallback_rate * len(column):
            raise UnstableEstimatorError(
                f"unstable estimator under subsampling: {est.id} failed on {failures} of {len(column)} resamples")
        reps = [points[i] if v is None else v for v in column]
        reports.append(EstimatorReport(est.id, points[i], np.array(reps), failures))
    return reports


@dataclass(frozen=True)
class ErrorMatrix:
    a_hat: np.ndarray
    k: int
    plan: BootstrapPlan
    scale_applied: float
    estimator_ids: tuple[str, ...] = ()
    n: int = 0
    v_max: float = 1.0

    @property
    def diagonal(self) -> np.ndarray:
        return np.diag(self.a_hat).copy()

    def to_dict(self) -> dict:
        plan = asdict(self.plan)
        plan["n1"] = self.plan.subsample_size(self.n) if self.n else self.plan.n1
        plan["num_resamples"] = self.plan.num_resamples(self.n) if self.n else self.plan.n_bootstrap
        return {
            "estimator_ids": list(self.estimator_ids),
            "a_hat": self.a_hat.tolist(),
            "k": self.k,
            "n": self.n,
            "scale_applied": self.scale_applied,
            "v_max": self.v_max,
            "plan": plan,
        }

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")


def _centers(reports: Sequence[EstimatorReport], plan: BootstrapPlan) -> np.ndarray:
    if plan.centering == "self":
        return np.array([r.point for r in reports])
    for r in reports:
        if r.estimator_id == plan.center_estimator:
            return np.full(len(reports), r.point)
    raise ValueError(f"center estimator {plan.center_estimator!r} is not among the reports")


def _deltas(reports, centers, v_max):
    B = {r.n_bootstrap for r in reports}
    if len(B) != 1:
        raise ValueError(f"reports have mismatched replicate counts {sorted(B)}")
    return (np.stack([r.replicates for r in reports]) - centers[:, None]) / v_max


def _diag_entry(delta_row: np.ndarray, scale: float) -> float:
    return float(scale * (delta_row @ delta_row) / len(delta_row))


def build_error_matrix(reports: Sequence[EstimatorReport], plan: BootstrapPlan, n: int,
                       v_max: float = 1.0) -> ErrorMatrix:
    """Error matrix from paired replicates, on the ``v_max``-normalized scale."""
    if not reports:
        raise ValueError("need at least one estimator report")
    if not v_max > 0:
        raise ValueError("v_max must be positive")
    delta = _deltas(reports, _centers(reports, plan), v_max)
    scale = plan.subsample_size(n) / n
    a = scale * (delta @ delta.T) / delta.shape[1]
    a = 0.5 * (a + a.T)
    # the diagonal is recomputed row by row so it matches mse_hat bit for bit
    for i in range(len(reports)):
        a[i, i] = _diag_entry(delta[i], scale)
    a.setflags(write=False)
    return ErrorMatrix(a, len(reports), plan, scale, tuple(r.estimator_id for r in reports), n, float(v_max))


def mse_hat(report: EstimatorReport, plan: BootstrapPlan, n: int, v_max: float = 1.0,
            center: float | None = None) -> float:
    """Bootstrap MSE of one estimator; equals its diagonal entry of the error matrix."""
    c = report.point if center is None else center
    delta = (report.replicates - c) / v_max
    return _diag_entry(delta, plan.subsample_size(n) / n)


def magic_bias(point: float, wis_replicates) -> float:
    """Signed distance from ``point`` to the interquartile interval of the WIS replicates."""
    w = np.asarray(wis_replicates, dtype=float)
    if w.size == 0:
        raise ValueError("wis_replicates must be nonempty")
    lo, hi = np.percentile(w, [25, 75])
    if point < lo:
        return float(point - lo)
    if point > hi:
        return float(point - hi)
    return 0.0


def magic_mse_hat(estimator_point: float, wis_replicates, estimator_replicates,
                  scale: float = 1.0) -> float:
    """Squared distance to the WIS interquartile interval plus scaled replicate variance.

    ``scale`` is normally ``n1 / n``, bringing subsample variance to the
    full-sample size.
    """
    reps = np.asarray(estimator_replicates, dtype=float)
    if reps.size == 0:
        raise ValueError("estimator_replicates must be nonempty")
    var = float(reps.var(ddof=1)) if reps.size > 1 else 0.0
    return magic_bias(estimator_point, wis_replicates) ** 2 + scale * var


def write_replicates_csv(reports: Sequence[EstimatorReport], path: str | Path) -> None:
    """One row per estimator, one column per resample."""
    B = reports[0].n_bootstrap
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["estimator", "point", *[f"r{j}" for j in range(B)]])
        for r in reports:
            w.writerow([r.estimator_id, repr(r.point), *map(repr, r.replicates.tolist())])
