"""Multi-estimator belief over the reward parameters.

A bank of estimators with staggered learning rates is updated online from
measured rewards (with an admissibility projection) and, separately, by the
candidate-input-induced predicted update used inside the control objective
(no projection there, so that map stays smooth in the candidate input).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, CurvatureViolationError, InvalidInputError
from .reward import QuadraticRewardSpec, basis, eval_reward


@dataclass(frozen=True)
class Ensemble:
    """Immutable estimator bank: one parameter row per member."""

    members: np.ndarray  # (n, 3)
    rates: np.ndarray    # (n,) positive learning rates

    @property
    def n_members(self) -> int:
        return self.members.shape[0]


@dataclass(frozen=True)
class ConditionStats:
    """Ensemble statistics of the predicted optimal speed.

    covariance is the scalar sample variance (1/n normalization); the
    operating condition is one-dimensional in this problem, so the
    covariance matrix collapses to its trace.
    """

    mean: float
    deviations: np.ndarray  # (n,)
    covariance: float


def init_ensemble(
    spec: QuadraticRewardSpec,
    prior_mean,
    spread,
    n_members: int,
    seed: int,
    eta_lo: float = 0.05,
    eta_hi: float = 0.5,
) -> Ensemble:
    """Draw members uniformly in prior_mean +/- spread and project each to
    admissibility; learning rates are log-spaced on [eta_lo, eta_hi]."""
    if n_members < 1:
        raise ConfigurationError("ensemble needs at least one member")
    prior_mean = np.asarray(prior_mean, dtype=float)
    spread = np.asarray(spread, dtype=float)
    if prior_mean.shape != (3,) or spread.shape != (3,):
        raise ConfigurationError("prior_mean and spread must have shape (3,)")
    if np.any(spread < 0.0):
        raise ConfigurationError("spread entries must be nonnegative")
    if not (0.0 < eta_lo <= eta_hi):
        raise ConfigurationError("need 0 < eta_lo <= eta_hi")
    rng = np.random.default_rng(seed)
    members = prior_mean + rng.uniform(-1.0, 1.0, size=(n_members, 3)) * spread
    members[:, 0] = np.minimum(members[:, 0], -spec.curvature_floor)
    rates = np.geomspace(eta_lo, eta_hi, n_members)
    return Ensemble(members=members, rates=rates)


def ensemble_mean(e: Ensemble) -> np.ndarray:
    """Arithmetic mean of the member parameter vectors."""
    return e.members.mean(axis=0)


def measured_update(e: Ensemble, spec: QuadraticRewardSpec, y: float, reward_meas: float) -> Ensemble:
    """Gradient step of each member toward the measured reward, followed by
    the admissibility projection.  Rates are unchanged."""
    if not math.isfinite(float(reward_meas)):
        raise InvalidInputError(f"measured reward must be finite, got {reward_meas}")
    psi = basis(spec, y)
    innovations = e.members @ psi - float(reward_meas)
    members = e.members - (e.rates * innovations)[:, None] * psi[None, :]
    members[:, 0] = np.minimum(members[:, 0], -spec.curvature_floor)
    return Ensemble(members=members, rates=e.rates)


def predicted_reward(e: Ensemble, spec: QuadraticRewardSpec, y_pred: float) -> float:
    """Reward the ensemble mean assigns to a predicted output."""
    return eval_reward(spec, ensemble_mean(e), y_pred)


def predicted_update(e: Ensemble, spec: QuadraticRewardSpec, y_pred: float) -> Ensemble:
    """Member update induced by a candidate output, using the ensemble-mean
    reward in place of the unavailable measurement.

    No projection is applied: this map must stay smooth in y_pred for the
    residual Jacobian.  Inadmissible results surface later, when statistics
    of the optimal condition are requested.
    """
    psi = basis(spec, y_pred)
    r_hat = predicted_reward(e, spec, y_pred)
    innovations = e.members @ psi - r_hat
    members = e.members - (e.rates * innovations)[:, None] * psi[None, :]
    return Ensemble(members=members, rates=e.rates)


def condition_stats(e: Ensemble, spec: QuadraticRewardSpec) -> ConditionStats:
    """Mean, deviations, and sample variance of the members' optimal speeds."""
    t0 = e.members[:, 0]
    if np.any(t0 > -spec.curvature_floor):
        raise CurvatureViolationError(
            "ensemble member violates the curvature floor; optimal condition undefined"
        )
    gammas = spec.v_scale * (-e.members[:, 1] / (2.0 * t0))
    mean = float(gammas.mean())
    deviations = gammas - mean
    covariance = float(deviations @ deviations) / e.n_members
    return ConditionStats(mean=mean, deviations=deviations, covariance=covariance)
