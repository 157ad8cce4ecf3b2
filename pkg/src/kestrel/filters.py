"""Kalman predict/update steps and the two task pipelines.

State estimation (SE) scores the posterior at each step: the belief after
the observation has been folded in.  Next-state prediction (NSP) scores the
belief in effect *before* each observation arrives.  Both runners execute
the same recursion and return both error series; they differ in which
prediction series the result's ``predictions`` field carries.

Numerical conventions:
  * innovation-covariance solves use a Cholesky factorization, never an
    explicit inverse;
  * every covariance leaving a step is passed through ``nearest_spd``;
  * the covariance update is the plain ``(I - KH) P`` form.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import DimensionMismatch, EmptyTrajectory, SingularInnovation
from .statespace import (
    BeliefState,
    StateSpaceModel,
    Trajectory,
    as_vector,
    nearest_spd,
)

#: Condition-number ceiling for the innovation covariance.
INNOVATION_COND_LIMIT = 1e12

#: Prior covariance scale for observation-lifted initialization.
INIT_COV_SCALE = 1e4


@dataclass(frozen=True, eq=False)
class FilterContext:
    """Everything one filter step sees: model, belief, observation, resolved H."""

    model: StateSpaceModel
    belief: BeliefState
    observation: np.ndarray
    H: np.ndarray

    def __post_init__(self):
        n = self.model.state_dim
        m = self.model.obs_dim
        if self.belief.dim != n:
            raise DimensionMismatch(f"belief dim {self.belief.dim} != state dim {n}")
        z = as_vector(self.observation, m)
        if self.H.shape != (m, n):
            raise DimensionMismatch(f"H shape {self.H.shape} != ({m}, {n})")
        object.__setattr__(self, "observation", z)


@dataclass(frozen=True, eq=False)
class StepOutput:
    """One step's posterior belief and the prediction it hands forward."""

    posterior: BeliefState
    prediction: BeliefState


@dataclass(eq=False)
class RunResult:
    """Per-step beliefs and position errors for one trajectory run.

    ``priors`` holds the belief in effect before each observation (the NSP
    estimate); ``predictions`` is the prediction each step emitted, which
    run_se and run_nsp expose with their task's alignment.  Error entries
    are ``None``-free only when the trajectory has ground-truth states.
    """

    posteriors: list
    predictions: list
    priors: list
    se_errors: np.ndarray | None
    nsp_errors: np.ndarray | None


def innovation_solve(S, rhs):
    """Solve ``S x = rhs`` for SPD ``S`` via Cholesky, with a conditioning gate."""
    eigs = np.linalg.eigvalsh(0.5 * (S + S.T))
    if eigs[0] <= 0.0 or eigs[-1] / eigs[0] >= INNOVATION_COND_LIMIT:
        raise SingularInnovation(
            f"innovation covariance condition {eigs[-1] / max(eigs[0], 1e-300):.3g} "
            f"exceeds {INNOVATION_COND_LIMIT:g}")
    return cho_solve(cho_factor(S, lower=True), rhs)


def kf_predict(belief: BeliefState, model: StateSpaceModel) -> BeliefState:
    """Propagate a belief one step through the transition model."""
    if belief.dim != model.state_dim:
        raise DimensionMismatch(f"belief dim {belief.dim} != state dim {model.state_dim}")
    F = model.F
    mean = F @ belief.mean
    cov = nearest_spd(F @ belief.cov @ F.T + model.Q)
    return BeliefState(mean=mean, cov=cov, time_index=belief.time_index + 1)


def kf_update(belief: BeliefState, z, H, R) -> BeliefState:
    """Fold one observation into a belief via the standard gain."""
    z = as_vector(z)
    m, n = H.shape
    if n != belief.dim or z.shape[0] != m or R.shape != (m, m):
        raise DimensionMismatch("update dimensions inconsistent")
    P = belief.cov
    S = H @ P @ H.T + R
    # K = P H^T S^{-1}; transpose of the solve keeps one factorization.
    K = innovation_solve(S, H @ P).T
    mean = belief.mean + K @ (z - H @ belief.mean)
    cov = nearest_spd((np.eye(n) - K @ H) @ P)
    return BeliefState(mean=mean, cov=cov, time_index=belief.time_index)


class InitPolicy(enum.Enum):
    """How the first belief is formed."""

    FIRST_OBSERVATION_LIFTED = "first_observation_lifted"
    GROUND_TRUTH_FIRST_STATE = "ground_truth_first_state"


def initial_belief(traj, model: StateSpaceModel,
                   policy: InitPolicy = InitPolicy.FIRST_OBSERVATION_LIFTED) -> BeliefState:
    """Initial belief for a trajectory run.

    ``FIRST_OBSERVATION_LIFTED`` lifts the first observation into state
    space (observed coordinates copied, velocities zero) under a wide
    diagonal prior.  ``GROUND_TRUTH_FIRST_STATE`` is for tests only.
    """
    obs = np.asarray(traj.observations, dtype=float)
    if len(obs) == 0:
        raise EmptyTrajectory("trajectory has no observations")
    n = model.state_dim
    if policy is InitPolicy.GROUND_TRUTH_FIRST_STATE:
        if getattr(traj, "states", None) is None:
            raise EmptyTrajectory("ground-truth initialization needs states")
        return BeliefState(mean=traj.states[0], cov=np.eye(n), time_index=0)
    z0 = obs[0]
    mean = np.zeros(n)
    if model.observe.is_static:
        mean = model.observe.H.T @ z0
    else:
        mean[:3] = z0[:3]
    return BeliefState(mean=mean, cov=INIT_COV_SCALE * np.eye(n), time_index=0)


def _position_errors(beliefs, states, position_dim) -> np.ndarray:
    est = np.array([b.mean[:position_dim] for b in beliefs])
    return np.linalg.norm(est - states[:, :position_dim], axis=1)


def run_filter(traj: Trajectory, model: StateSpaceModel, rule=None,
               init: BeliefState | None = None,
               init_policy: InitPolicy = InitPolicy.FIRST_OBSERVATION_LIFTED,
               max_steps: int | None = None) -> RunResult:
    """Run one filter rule over one trajectory.

    ``rule`` is a rule program (see :mod:`kestrel.ruledsl`); ``None`` means
    the canonical update-then-predict recursion.  Step errors are re-raised
    annotated with the step index.
    """
    from . import ruledsl  # local import: ruledsl builds on this module

    if rule is None:
        rule = ruledsl.canonical_kf_program()
    belief = initial_belief(traj, model, init_policy) if init is None else init
    update_first = rule.order == "update-first"

    obs = traj.observations
    if max_steps is not None:
        obs = obs[:max_steps]
    posteriors, predictions, priors = [], [], []
    for t, z in enumerate(obs):
        try:
            H = model.observe.matrix_for(z)
            ctx = FilterContext(model=model, belief=belief, observation=z, H=H)
            out = ruledsl.execute(rule, ctx)
        except Exception as exc:
            raise type(exc)(f"step {t}: {exc}") from exc
        posteriors.append(out.posterior)
        predictions.append(out.prediction)
        if update_first:
            priors.append(belief)
            belief = out.prediction
        else:
            priors.append(out.prediction)
            belief = out.posterior

    se = nsp = None
    if traj.has_states:
        states = traj.states[:len(obs)]
        se = _position_errors(posteriors, states, model.position_dim)
        nsp = _position_errors(priors, states, model.position_dim)
    return RunResult(posteriors=posteriors, predictions=predictions, priors=priors,
                     se_errors=se, nsp_errors=nsp)


def run_se(traj, model, rule=None, **kwargs) -> RunResult:
    """Predict-update pipeline: score the posterior at each step."""
    return run_filter(traj, model, rule, **kwargs)


def run_nsp(traj, model, rule=None, **kwargs) -> RunResult:
    """Update-predict pipeline: score the belief before each observation.

    The first prediction is the initial belief itself (for update-first
    rules; predict-first rules form it from the initial belief).
    """
    result = run_filter(traj, model, rule, **kwargs)
    return RunResult(posteriors=result.posteriors, predictions=result.priors,
                     priors=result.priors, se_errors=result.se_errors,
                     nsp_errors=result.nsp_errors)


def task_errors(result: RunResult, task: str) -> np.ndarray:
    """Pick the error series for ``task`` ('se' or 'nsp')."""
    errors = result.se_errors if task == "se" else result.nsp_errors if task == "nsp" else None
    if task not in ("se", "nsp"):
        raise ValueError(f"unknown task {task!r}")
    if errors is None:
        raise EmptyTrajectory("trajectory has no ground-truth states to score against")
    return errors
