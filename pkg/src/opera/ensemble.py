"""Estimator-style wrappers around the bootstrap and the scorers.

Each class follows the scikit-learn conventions: hyperparameters in
``__init__``, ``fit`` returns ``self``, fitted state in attributes with a
trailing underscore, and ``get_params``/``set_params`` come from
:class:`sklearn.base.BaseEstimator`.

    >>> from opera.envs import make_environment
    >>> env = make_environment("graph")
    >>> pi_b, pi_e = env.policy("noised:0.5"), env.policy("noised:0.1")
    >>> data = env.sample(pi_b, 256, seed=0)
    >>> model = OPERA(["is", "wis", "fqe"], n_bootstrap=50).fit(data, pi_e)
    >>> round(float(model.weights_.sum()), 12)
    1.0

:func:`score_methods` is the shared path: one bootstrap pass, every method.
"""
from __future__ import annotations

from dataclasses import replace
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator

from .aggregate import (METHODS, EnsembleScore, avg_ope_score, best_ope_score, opera_magic_score,
                        opera_score, solve_weights)
from .bootstrap import BootstrapPlan, EstimatorReport, build_error_matrix, collect_reports
from .estimators import OpeEstimator, make_estimator


def resolve_estimators(estimators) -> list[OpeEstimator]:
    """Accept ids, ``(id, params)`` pairs or :class:`OpeEstimator` objects."""
    out = []
    for e in estimators:
        if isinstance(e, OpeEstimator):
            out.append(e)
        elif isinstance(e, str):
            out.append(make_estimator(e))
        else:
            eid, params = e
            out.append(make_estimator(eid, **dict(params)))
    if not out:
        raise ValueError("need at least one base estimator")
    return out


def auxiliary_ids(methods: Sequence[str], base_ids: Sequence[str], center_estimator: str = "is",
                  wis_estimator: str = "wis") -> list[str]:
    """Estimators the methods need that are not in the base list."""
    need = []
    if "opera_is" in methods:
        need.append(center_estimator)
    if "opera_magic" in methods:
        need.append(wis_estimator)
    return [e for e in dict.fromkeys(need) if e not in base_ids]


def score_methods(methods: Sequence[str], reports: Sequence[EstimatorReport], plan: BootstrapPlan, n: int,
                  v_max: float = 1.0, k: int | None = None, center_estimator: str = "is",
                  wis_estimator: str = "wis") -> dict[str, EnsembleScore]:
    """Score every requested method from one set of paired reports.

    Only the first ``k`` reports enter the ensembles; later ones are
    auxiliary (the centering estimator or WIS when not part of the base list).
    """
    unknown = set(methods) - set(METHODS)
    if unknown:
        raise ValueError(f"unknown methods {sorted(unknown)}")
    k = len(reports) if k is None else k
    base = list(reports[:k])
    by_id = {r.estimator_id: r for r in reports}
    out = {}
    self_plan = replace(plan, centering="self", center_estimator=None)
    a_self = build_error_matrix(base, self_plan, n, v_max) if {"opera", "best_ope"} & set(methods) else None
    for m in methods:
        if m == "opera":
            out[m] = opera_score(base, a_self)
        elif m == "best_ope":
            out[m] = best_ope_score(base, a_self)
        elif m == "avg_ope":
            out[m] = avg_ope_score(base)
        elif m == "opera_is":
            center = by_id[center_estimator]
            cplan = replace(plan, centering="consistent", center_estimator=center_estimator)
            a = build_error_matrix([*base, center], cplan, n, v_max)
            sub = replace(a, a_hat=a.a_hat[:k, :k], k=k, estimator_ids=a.estimator_ids[:k])
            out[m] = opera_score(base, sub)
        elif m == "opera_magic":
            wis = by_id[wis_estimator]
            out[m] = opera_magic_score(base, wis.replicates, plan.subsample_size(n) / n, v_max)
    return out


class _BootstrapEnsemble(BaseEstimator):
    """Shared fit logic; subclasses pick the method."""

    _method = "opera"

    def _plan(self) -> BootstrapPlan:
        return BootstrapPlan(n_bootstrap=self.n_bootstrap, eta=self.eta, seed=self.random_state,
                             n1=self.n1)

    def _extra(self) -> dict:
        return {}

    def fit(self, dataset, policy):
        """Bootstrap the base estimators on ``dataset`` for ``policy`` and combine."""
        ests = resolve_estimators(self.estimators)
        base_ids = [e.id for e in ests]
        extra = self._extra()
        aux = auxiliary_ids([self._method], base_ids, **extra)
        all_ests = ests + [make_estimator(e) for e in aux]
        plan = self._plan()
        reports = collect_reports(all_ests, policy, dataset, plan, n_jobs=self.n_jobs)
        n = len(dataset)
        self.reports_ = reports[:len(ests)]
        self.error_matrix_ = build_error_matrix(self.reports_, plan, n, self.v_max)
        self.score_ = score_methods([self._method], reports, plan, n, self.v_max, k=len(ests), **extra)[self._method]
        self.weights_ = np.asarray(self.score_.weights)
        self.estimate_ = self.score_.value
        self.estimator_ids_ = tuple(base_ids)
        return self

    def predict(self, dataset=None, policy=None) -> float:
        """Combined estimate; refits first when ``dataset`` and ``policy`` are given."""
        if dataset is not None:
            self.fit(dataset, policy)
        if not hasattr(self, "estimate_"):
            raise AttributeError(f"{type(self).__name__} is not fitted yet; call fit first")
        return self.estimate_


class OPERA(_BootstrapEnsemble):
    """Weights minimizing the bootstrap error-matrix quadratic form.

    Parameters
    ----------
    estimators : list
        Base estimator ids, ``(id, params)`` pairs or ``OpeEstimator`` objects.
    n_bootstrap, eta, random_state, n1 :
        Resampling plan, see :class:`~opera.bootstrap.BootstrapPlan`.
    centering : {"self", "consistent"}
        ``"consistent"`` centers all replicates on ``center_estimator``'s
        full-data estimate.
    v_max : float
        Normalizer for the error matrix; does not change the weights.
    n_jobs : int
        Threads for the resample loop; results do not depend on it.

    Attributes
    ----------
    weights_ : ndarray of shape (k,)
    estimate_ : float
    error_matrix_ : ErrorMatrix
        Self-centered error matrix of the base estimators.
    reports_ : list of EstimatorReport
    score_ : EnsembleScore
    """

    def __init__(self, estimators=("is", "wis", "fqe"), n_bootstrap=200, eta=0.5, random_state=0,
                 centering="self", center_estimator="is", v_max=1.0, n1=None, n_jobs=1):
        self.estimators = estimators
        self.n_bootstrap = n_bootstrap
        self.eta = eta
        self.random_state = random_state
        self.centering = centering
        self.center_estimator = center_estimator
        self.v_max = v_max
        self.n1 = n1
        self.n_jobs = n_jobs

    @property
    def _method(self):
        return "opera_is" if self.centering == "consistent" else "opera"

    def _extra(self):
        return {"center_estimator": self.center_estimator}


class OPERAMagic(_BootstrapEnsemble):
    """OPERA on the surrogate matrix built from distances to the WIS interquartile interval."""

    _method = "opera_magic"

    def __init__(self, estimators=("is", "wis", "fqe"), n_bootstrap=200, eta=0.5, random_state=0,
                 wis_estimator="wis", v_max=1.0, n1=None, n_jobs=1):
        self.estimators = estimators
        self.n_bootstrap = n_bootstrap
        self.eta = eta
        self.random_state = random_state
        self.wis_estimator = wis_estimator
        self.v_max = v_max
        self.n1 = n1
        self.n_jobs = n_jobs

    def _extra(self):
        return {"wis_estimator": self.wis_estimator}


class BestOPE(_BootstrapEnsemble):
    """Select the base estimator with the smallest bootstrap MSE."""

    _method = "best_ope"

    def __init__(self, estimators=("is", "wis", "fqe"), n_bootstrap=200, eta=0.5, random_state=0,
                 v_max=1.0, n1=None, n_jobs=1):
        self.estimators = estimators
        self.n_bootstrap = n_bootstrap
        self.eta = eta
        self.random_state = random_state
        self.v_max = v_max
        self.n1 = n1
        self.n_jobs = n_jobs


class AvgOPE(BaseEstimator):
    """Plain average of the base estimates; no resampling."""

    def __init__(self, estimators=("is", "wis", "fqe"), random_state=0):
        self.estimators = estimators
        self.random_state = random_state

    def fit(self, dataset, policy):
        ests = resolve_estimators(self.estimators)
        self.reports_ = [EstimatorReport(e.id, float(e(policy, dataset, self.random_state)), np.zeros(0))
                         for e in ests]
        self.score_ = avg_ope_score(self.reports_)
        self.weights_ = np.asarray(self.score_.weights)
        self.estimate_ = self.score_.value
        self.estimator_ids_ = tuple(e.id for e in ests)
        return self

    def predict(self, dataset=None, policy=None) -> float:
        if dataset is not None:
            self.fit(dataset, policy)
        if not hasattr(self, "estimate_"):
            raise AttributeError("AvgOPE is not fitted yet; call fit first")
        return self.estimate_


__all__ = ["OPERA", "OPERAMagic", "BestOPE", "AvgOPE", "resolve_estimators", "score_methods",
           "auxiliary_ids", "solve_weights"]
