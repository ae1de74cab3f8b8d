"""Sepsis-like tabular patient simulator.

A patient is four discretized vitals (heart rate, blood pressure, oxygen,
glucose) plus a latent diabetes flag. The 8 actions are all subsets of
{antibiotics, vasopressor, ventilation}, encoded as bits 1, 2 and 4.

* Discharge (+1): all vitals normal and the action is "no treatment".
* Death (-1): three or more vitals out of the normal range after a step.
* Otherwise the reward is 0, also when the horizon truncates the episode.

The transition probabilities are this package's own documented defaults
(:class:`SepsisDynamics`), every one of them overridable.

Per step, each vital moves independently given the action and diabetes:

* a treatment aimed at an abnormal vital moves it one level toward normal
  with probability ``p_antibiotics`` / ``p_vasopressor`` / ``p_ventilation``
  (the largest applicable one), otherwise it stays;
* an untreated abnormal vital moves one level further from normal with
  probability ``drift_worse`` (it stays if already at the extreme);
* an untreated normal vital leaves the normal range with probability
  ``drift_abnormal``, up or down evenly where both exist;
* vasopressors push a normal blood pressure to high with ``p_vaso_overshoot``;
* glucose has no treatment. Without diabetes an abnormal level recovers one
  step with ``glucose_recovery`` and a normal level deviates with
  ``drift_abnormal``. With diabetes it moves one level up or down with total
  probability ``glucose_fluctuation_diabetic``, and vasopressors raise it one
  level with ``p_vaso_glucose``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace

import numpy as np

from ..core import TabularMdp, TabularPolicy
from .policies import greedy_policy, marginalize_policy

VITALS = ("heart_rate", "blood_pressure", "oxygen", "glucose")
ANTIBIOTICS, VASOPRESSOR, VENTILATION = 1, 2, 4
NUM_ACTIONS = 8


@dataclass(frozen=True)
class SepsisDynamics:
    p_antibiotics: float = 0.5
    p_vasopressor: float = 0.7
    p_ventilation: float = 0.7
    drift_worse: float = 0.1
    drift_abnormal: float = 0.05
    p_vaso_overshoot: float = 0.1
    glucose_recovery: float = 0.3
    glucose_fluctuation_diabetic: float = 0.3
    p_vaso_glucose: float = 0.5

    def __post_init__(self):
        for k, v in self.__dict__.items():
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{k} must be a probability, got {v}")


@dataclass(frozen=True)
class SepsisConfig:
    num_vital_levels: tuple[int, int, int, int] = (3, 3, 2, 5)
    normal_levels: tuple[int, int, int, int] = (1, 1, 1, 2)
    initial_vital_probs: tuple[tuple[float, ...], ...] = (
        (0.25, 0.5, 0.25),
        (0.25, 0.5, 0.25),
        (0.3, 0.7),
        (0.05, 0.15, 0.6, 0.15, 0.05),
    )
    diabetes_prob: float = 0.2
    horizon: int = 20
    discount: float = 0.99
    partially_observed: bool = False
    transition_params: SepsisDynamics = field(default_factory=SepsisDynamics)

    def __post_init__(self):
        if not 0.0 <= self.diabetes_prob <= 1.0:
            raise ValueError("diabetes_prob must be in [0, 1]")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if len(self.num_vital_levels) != 4 or len(self.normal_levels) != 4:
            raise ValueError("expected level counts for 4 vitals")
        for levels, normal, init in zip(self.num_vital_levels, self.normal_levels, self.initial_vital_probs):
            if not 0 <= normal < levels or len(init) != levels:
                raise ValueError("inconsistent vital level specification")
        if isinstance(self.transition_params, dict):
            object.__setattr__(self, "transition_params", SepsisDynamics(**self.transition_params))


class SepsisSimulator:
    """State encoding and dynamics; :meth:`mdp` gives the tabular form."""

    def __init__(self, config: SepsisConfig = SepsisConfig()):
        self.config = config
        self.shape = (*config.num_vital_levels, 2)
        self.num_patient_states = int(np.prod(self.shape))
        self.death = self.num_patient_states
        self.discharge = self.num_patient_states + 1
        self.num_states = self.num_patient_states + 2
        self._mdp = self._build()

    # state encoding
    def encode(self, vitals, diabetic: bool) -> int:
        return int(np.ravel_multi_index((*vitals, int(diabetic)), self.shape))

    def decode(self, state: int) -> tuple[tuple[int, ...], bool]:
        *vitals, diab = np.unravel_index(state, self.shape)
        return tuple(int(v) for v in vitals), bool(diab)

    def num_abnormal(self, vitals) -> int:
        return sum(v != n for v, n in zip(vitals, self.config.normal_levels))

    def _step_toward(self, level, normal):
        return level + (1 if level < normal else -1)

    def _vital_next(self, i: int, level: int, action: int, diabetic: bool) -> np.ndarray:
        cfg, dyn = self.config, self.config.transition_params
        n_levels, normal = cfg.num_vital_levels[i], cfg.normal_levels[i]
        out = np.zeros(n_levels)

        def move(dest, p):
            out[dest] += p

        if VITALS[i] == "glucose":
            if diabetic:
                up = min(level + 1, n_levels - 1)
                down = max(level - 1, 0)
                p_up = dyn.glucose_fluctuation_diabetic / 2
                if action & VASOPRESSOR:
                    # vasopressor pushes glucose up first, fluctuation applies otherwise
                    move(up, dyn.p_vaso_glucose)
                    rest = 1.0 - dyn.p_vaso_glucose
                else:
                    rest = 1.0
                move(up, rest * p_up)
                move(down, rest * p_up)
                move(level, rest * (1.0 - 2 * p_up))
            elif level != normal:
                move(self._step_toward(level, normal), dyn.glucose_recovery)
                move(level, 1.0 - dyn.glucose_recovery)
            else:
                self._deviate(out, level, n_levels, dyn.drift_abnormal)
            return out

        p_treat = 0.0
        if level != normal:
            if VITALS[i] == "heart_rate" and action & ANTIBIOTICS:
                p_treat = dyn.p_antibiotics
            elif VITALS[i] == "blood_pressure":
                if action & ANTIBIOTICS:
                    p_treat = dyn.p_antibiotics
                if action & VASOPRESSOR and level < normal:
                    p_treat = max(p_treat, dyn.p_vasopressor)
            elif VITALS[i] == "oxygen" and action & VENTILATION:
                p_treat = dyn.p_ventilation
        treated = (
            (VITALS[i] == "heart_rate" and action & ANTIBIOTICS)
            or (VITALS[i] == "blood_pressure" and action & (ANTIBIOTICS | VASOPRESSOR))
            or (VITALS[i] == "oxygen" and action & VENTILATION)
        )
        if level != normal:
            if treated:
                move(self._step_toward(level, normal), p_treat)
                move(level, 1.0 - p_treat)
            else:
                worse = level + (1 if level > normal else -1)
                worse = min(max(worse, 0), n_levels - 1)
                move(worse, dyn.drift_worse)
                move(level, 1.0 - dyn.drift_worse)
        elif VITALS[i] == "blood_pressure" and action & VASOPRESSOR and normal + 1 < n_levels:
            move(normal + 1, dyn.p_vaso_overshoot)
            move(level, 1.0 - dyn.p_vaso_overshoot)
        elif treated:
            move(level, 1.0)
        else:
            self._deviate(out, level, n_levels, dyn.drift_abnormal)
        return out

    @staticmethod
    def _deviate(out, level, n_levels, p):
        nbrs = [x for x in (level - 1, level + 1) if 0 <= x < n_levels]
        for x in nbrs:
            out[x] += p / len(nbrs)
        out[level] += 1.0 - p

    def _build(self) -> TabularMdp:
        cfg = self.config
        S, A = self.num_states, NUM_ACTIONS
        P = np.zeros((S, A, S))
        R = np.zeros((S, A, S))
        levels = cfg.num_vital_levels
        combos = list(itertools.product(*[range(n) for n in levels]))
        combo_abnormal = np.array([self.num_abnormal(c) for c in combos])
        for s in range(self.num_patient_states):
            vitals, diab = self.decode(s)
            if self.num_abnormal(vitals) >= 3:
                P[s, :, self.death] = 1.0
                R[s, :, self.death] = -1.0
                continue
            for a in range(A):
                if a == 0 and self.num_abnormal(vitals) == 0:
                    P[s, a, self.discharge] = 1.0
                    R[s, a, self.discharge] = 1.0
                    continue
                marg = [self._vital_next(i, vitals[i], a, diab) for i in range(4)]
                joint = np.einsum("i,j,k,l->ijkl", *marg).ravel()
                dead = combo_abnormal >= 3
                P[s, a, self.death] = joint[dead].sum()
                R[s, a, self.death] = -1.0
                for c_idx in np.flatnonzero(~dead & (joint > 0)):
                    P[s, a, self.encode(combos[c_idx], diab)] += joint[c_idx]
        for t in (self.death, self.discharge):
            P[t, :, t] = 1.0

        initial = np.zeros(S)
        vital_init = np.einsum("i,j,k,l->ijkl", *[np.asarray(p, float) for p in cfg.initial_vital_probs])
        for c in combos:
            if self.num_abnormal(c) >= 3:
                continue
            for diab, pd in ((0, 1.0 - cfg.diabetes_prob), (1, cfg.diabetes_prob)):
                initial[self.encode(c, diab)] = vital_init[c] * pd
        initial /= initial.sum()

        omap = None
        if cfg.partially_observed:
            obs_shape = levels[:3]
            n_obs = int(np.prod(obs_shape))
            omap = np.empty(S, dtype=np.int64)
            for s in range(self.num_patient_states):
                vitals, _ = self.decode(s)
                omap[s] = np.ravel_multi_index(vitals[:3], obs_shape)
            omap[self.death] = n_obs
            omap[self.discharge] = n_obs + 1
        return TabularMdp(transition=P, reward=R, initial=initial, horizon=cfg.horizon,
                          discount=cfg.discount, observation_map=omap)

    @property
    def mdp(self) -> TabularMdp:
        return self._mdp

    def full_mdp(self) -> TabularMdp:
        """The fully observed twin of this simulator's MDP."""
        if not self.config.partially_observed:
            return self._mdp
        return SepsisSimulator(replace(self.config, partially_observed=False)).mdp

    def optimal_policy(self) -> TabularPolicy:
        """Optimal policy of the fully observed problem, marginalized onto
        observations when glucose and diabetes are hidden."""
        full = self.full_mdp()
        best = greedy_policy(full)
        if not self.config.partially_observed:
            return best
        return marginalize_policy(self._mdp, best.probs)


def build_sepsis(config: SepsisConfig = SepsisConfig()) -> TabularMdp:
    return SepsisSimulator(config).mdp
