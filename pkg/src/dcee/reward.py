"""Linear-in-parameters cruising reward and its optimal-speed map.

The reward for cruising at speed v is psi(v) . theta with basis
psi(v) = [z**2, z, 1] and z = v / v_scale.  Concave parameter vectors
(theta[0] <= -curvature_floor) admit a unique maximizing speed
v_scale * (-theta[1] / (2 * theta[0])).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import CurvatureViolationError, InvalidInputError

N_THETA = 3


@dataclass(frozen=True)
class QuadraticRewardSpec:
    """Normalization speed and admissibility floor for the quadratic reward.

    v_scale is in m/s; curvature_floor is the minimum magnitude of the
    (negative) quadratic coefficient, keeping the optimal-speed map away
    from its singularity at theta[0] = 0.
    """

    v_scale: float = 30.0
    curvature_floor: float = 0.05

    def __post_init__(self):
        if not (math.isfinite(self.v_scale) and self.v_scale > 0.0):
            raise InvalidInputError(f"v_scale must be positive and finite, got {self.v_scale}")
        if not (math.isfinite(self.curvature_floor) and self.curvature_floor > 0.0):
            raise InvalidInputError(
                f"curvature_floor must be positive and finite, got {self.curvature_floor}"
            )


def _check_speed(v: float) -> float:
    v = float(v)
    if not math.isfinite(v):
        raise InvalidInputError(f"speed must be finite, got {v}")
    return v


def _check_theta(theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (N_THETA,):
        raise InvalidInputError(f"theta must have shape ({N_THETA},), got {theta.shape}")
    if not np.all(np.isfinite(theta)):
        raise InvalidInputError("theta entries must be finite")
    return theta


def basis(spec: QuadraticRewardSpec, v: float) -> np.ndarray:
    """Feature vector [z**2, z, 1] at speed v, with z = v / spec.v_scale."""
    v = _check_speed(v)
    z = v / spec.v_scale
    return np.array([z * z, z, 1.0])


def basis_derivative(spec: QuadraticRewardSpec, v: float) -> np.ndarray:
    """Derivative of the feature vector with respect to v, shape (3,)."""
    v = _check_speed(v)
    s = spec.v_scale
    return np.array([2.0 * v / (s * s), 1.0 / s, 0.0])


def eval_reward(spec: QuadraticRewardSpec, theta, v: float) -> float:
    """Reward psi(v) . theta.  The additive offset hook is identically zero
    for this reward family, so the basis carries the whole value."""
    theta = _check_theta(theta)
    return float(basis(spec, v) @ theta)


def is_admissible(spec: QuadraticRewardSpec, theta) -> bool:
    """True when theta[0] <= -curvature_floor (strictly concave reward)."""
    return bool(theta[0] <= -spec.curvature_floor)


def project_admissible(spec: QuadraticRewardSpec, theta) -> np.ndarray:
    """Clamp theta[0] down to -curvature_floor; other entries untouched."""
    theta = np.array(theta, dtype=float, copy=True)
    theta[0] = min(theta[0], -spec.curvature_floor)
    return theta


def optimal_condition(spec: QuadraticRewardSpec, theta) -> float:
    """Speed maximizing the reward: v_scale * (-theta[1] / (2 * theta[0]))."""
    theta = _check_theta(theta)
    if not is_admissible(spec, theta):
        raise CurvatureViolationError(
            f"theta[0] = {theta[0]} violates theta[0] <= {-spec.curvature_floor}"
        )
    return float(spec.v_scale * (-theta[1] / (2.0 * theta[0])))


def optimal_condition_jacobian(spec: QuadraticRewardSpec, theta) -> np.ndarray:
    """Row vector d(optimal speed)/d(theta), shape (1, 3)."""
    theta = _check_theta(theta)
    if not is_admissible(spec, theta):
        raise CurvatureViolationError(
            f"theta[0] = {theta[0]} violates theta[0] <= {-spec.curvature_floor}"
        )
    t0, t1 = theta[0], theta[1]
    return spec.v_scale * np.array([[t1 / (2.0 * t0 * t0), -1.0 / (2.0 * t0), 0.0]])


def make_true_params(spec: QuadraticRewardSpec, w_z: float, v_star: float, c_r: float) -> np.ndarray:
    """Parameter vector of the peak-form reward c_r - w_z * (z - z_star)**2.

    Expansion gives theta = [-w_z, 2*w_z*z_star, c_r - w_z*z_star**2] with
    z_star = v_star / v_scale, so the optimal speed of the result is v_star.
    """
    w_z = float(w_z)
    v_star = _check_speed(v_star)
    c_r = float(c_r)
    if not math.isfinite(w_z) or w_z < spec.curvature_floor:
        raise CurvatureViolationError(
            f"w_z = {w_z} is below the curvature floor {spec.curvature_floor}"
        )
    if not math.isfinite(c_r):
        raise InvalidInputError(f"c_r must be finite, got {c_r}")
    if not (0.0 <= v_star <= 2.0 * spec.v_scale):
        raise InvalidInputError(
            f"v_star = {v_star} outside [0, {2.0 * spec.v_scale}]"
        )
    z_star = v_star / spec.v_scale
    return np.array([-w_z, 2.0 * w_z * z_star, c_r - w_z * z_star * z_star])
