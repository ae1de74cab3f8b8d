"""Multi-trial experiments against ground truth.

Every ``(policy, n, trial)`` cell gets its own seeds derived from
``(master, policy index, n, trial, stage)``, so results do not depend on the
order in which cells run or on the thread count.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from ..bootstrap import build_error_matrix, collect_reports
from ..core import derive_seed
from ..ensemble import auxiliary_ids, score_methods
from ..estimators import make_estimator
from ..exceptions import OpeError
from .config import ExperimentConfig

STAGE_DATA, STAGE_BOOTSTRAP, STAGE_TRUTH = 0, 1, 3
POOLED = "all"


@dataclass
class TrialResult:
    policy: str
    n: int
    trial: int
    true_value: float
    estimates: dict[str, float] = field(default_factory=dict)
    points: dict[str, float] = field(default_factory=dict)
    mse_hat: dict[str, float] = field(default_factory=dict)
    weights: dict[str, list[float]] = field(default_factory=dict)
    squared_errors: dict[str, float] = field(default_factory=dict)
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None

    def values(self) -> dict[str, float]:
        """Method estimates followed by base-estimator points."""
        return {**self.estimates, **self.points}


@dataclass
class ExperimentResults:
    config: ExperimentConfig
    truths: dict[str, tuple[float, float]]
    trials: list[TrialResult]
    rows: list[dict]

    @property
    def num_failures(self) -> int:
        return sum(t.failed for t in self.trials)


def _run_trial(cfg: ExperimentConfig, env, labels, policy_idx: int, n: int, trial: int, truth: float,
               v_max: float) -> TrialResult:
    spec = cfg.evaluation_policies[policy_idx]
    pi_b, pi_e = env.policy(cfg.behavior_policy), env.policy(spec)
    result = TrialResult(spec, n, trial, truth)
    keys = (cfg.seed, policy_idx, n, trial)
    data = env.sample(pi_b, n, derive_seed(*keys, STAGE_DATA))
    base = [s.build() for s in cfg.estimators]
    aux = auxiliary_ids(cfg.methods, [e.id for e in base], cfg.center_estimator, cfg.wis_estimator)
    ests = base + [make_estimator(a) for a in aux]
    plan = replace(cfg.bootstrap, seed=derive_seed(*keys, STAGE_BOOTSTRAP))
    try:
        reports = collect_reports(ests, pi_e, data, plan)
        scores = score_methods(cfg.methods, reports, plan, n, v_max, k=len(base),
                               center_estimator=cfg.center_estimator, wis_estimator=cfg.wis_estimator)
        diag = build_error_matrix(reports[:len(base)], replace(plan, centering="self"), n, v_max).diagonal
    except (OpeError, ArithmeticError, np.linalg.LinAlgError) as exc:
        result.error = f"{type(exc).__name__}: {exc}"
        return result
    for m in cfg.methods:
        result.estimates[m] = scores[m].value
        result.weights[m] = np.asarray(scores[m].weights).tolist()
    for label, rep, d in zip(labels, reports, diag):
        result.points[label] = rep.point
        result.mse_hat[label] = float(d) * v_max ** 2
    result.squared_errors = {k: (v - truth) ** 2 for k, v in result.values().items()}
    return result


def _check_double_entry(trials: list[TrialResult]) -> None:
    for t in trials:
        for k, v in t.values().items():
            if (v - t.true_value) ** 2 != t.squared_errors[k]:
                raise RuntimeError(f"squared error bookkeeping mismatch for {k} in trial {t.trial}")


def _row(env_id, policy, n, name, errors: list[float], failures: int, truth_stderr: float) -> dict:
    m = len(errors)
    if m:
        e = np.asarray(errors)
        mse = float(e.mean())
        stderr = float(e.std(ddof=1) / math.sqrt(m)) if m > 1 else 0.0
    else:
        mse = stderr = math.nan
    return {"env": env_id, "policy": policy, "n": n, "method": name, "mse": mse, "rmse": math.sqrt(mse),
            "stderr": stderr, "trials": m, "failures": failures, "truth_stderr": truth_stderr}


def aggregate_rows(cfg: ExperimentConfig, labels, trials: list[TrialResult], truths) -> list[dict]:
    """Mean squared error per (policy, n, method); a pooled ``all`` policy when several are run."""
    _check_double_entry(trials)
    names = [*cfg.methods, *labels]
    rows = []
    groups = [(p, [p]) for p in cfg.evaluation_policies]
    if len(cfg.evaluation_policies) > 1:
        groups.append((POOLED, list(cfg.evaluation_policies)))
    for n in cfg.dataset_sizes:
        for name_policy, members in groups:
            cell = [t for t in trials if t.n == n and t.policy in members]
            ok = [t for t in cell if not t.failed]
            failures = len(cell) - len(ok)
            tse = float(np.sqrt(np.mean([truths[p][1] ** 2 for p in members])))
            for name in names:
                rows.append(_row(cfg.environment, name_policy, n, name,
                                 [t.squared_errors[name] for t in ok], failures, tse))
    return rows


def run_experiment(cfg: ExperimentConfig, threads: int = 1) -> ExperimentResults:
    """Run every (policy, n, trial) cell and aggregate MSE per method.

    Failed cells are kept with their error message and counted in the
    ``failures`` column; their squared errors are left out of the means.
    """
    env = cfg.build_environment()
    v_max = cfg.v_max if cfg.v_max is not None else env.default_v_max
    labels = cfg.labels
    truths = {}
    for i, spec in enumerate(cfg.evaluation_policies):
        truths[spec] = env.truth(env.policy(spec), derive_seed(cfg.seed, i, 0, 0, STAGE_TRUTH))
    cells = [(i, n, t) for i in range(len(cfg.evaluation_policies)) for n in cfg.dataset_sizes
             for t in range(cfg.trials)]

    def work(cell):
        i, n, t = cell
        return _run_trial(cfg, env, labels, i, n, t, truths[cfg.evaluation_policies[i]][0], v_max)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            trials = list(pool.map(work, cells))
    else:
        trials = [work(c) for c in cells]
    return ExperimentResults(cfg, truths, trials, aggregate_rows(cfg, labels, trials, truths))
