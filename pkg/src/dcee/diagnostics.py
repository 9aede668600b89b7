"""Curvature diagnostics and the finite-difference oracles behind them.

The production solver only ever touches first derivatives; the exact Hessian
appears here exclusively as a finite-difference test oracle, used to split
the curvature into the Gauss-Newton part J'J and the neglected second-order
remainder, and to bound the local contraction rate of the full-step
iteration.
"""
from __future__ import annotations

import time
from dataclasses import asdict, dataclass

import numpy as np
import scipy.linalg

from .core import DceeProblem, _as_residual_only, evaluate, jacobian_fd
from .ensemble import Ensemble
from .errors import InfeasibleCandidateError, InvalidInputError, RateUndefinedError
from .plant import VehicleParams
from .reward import QuadraticRewardSpec, make_true_params


@dataclass(frozen=True)
class HessianSplit:
    """h_exact = b_ggn + e_ggn, with b_ggn = J'J from the analytic Jacobian
    and h_exact a symmetrized finite-difference Hessian of 0.5 * ||F||^2."""

    b_ggn: np.ndarray
    e_ggn: np.ndarray
    h_exact: np.ndarray


def _half_objective_fn(target):
    fn = _as_residual_only(target)

    def L(u_vec):
        f = fn(u_vec)
        return 0.5 * float(f @ f)

    return L


def exact_hessian_fd(target, u, h: float) -> np.ndarray:
    """Central second differences of 0.5 * ||F(u)||^2, symmetrized.

    target may be a DceeProblem or a residual callable.  Infeasible stencil
    points propagate as InfeasibleCandidateError.
    """
    if not (h > 0.0):
        raise InvalidInputError(f"finite-difference step must be positive, got {h}")
    L = _half_objective_fn(target)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    n = u.size
    H = np.empty((n, n))
    L0 = L(u)
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = h
        H[i, i] = (L(u + ei) - 2.0 * L0 + L(u - ei)) / (h * h)
        for j in range(i + 1, n):
            ej = np.zeros(n)
            ej[j] = h
            cross = (L(u + ei + ej) - L(u + ei - ej) - L(u - ei + ej) + L(u - ei - ej)) / (4.0 * h * h)
            H[i, j] = cross
            H[j, i] = cross
    return 0.5 * (H + H.T)


def ggn_split(target, u, h: float | None = None) -> HessianSplit:
    """Split the exact (finite-difference) Hessian into J'J and the rest.

    The default Hessian step is 1e-4 * (1 + |u|); second differences lose
    more precision than first, so the step is coarser than the Jacobian's.
    """
    u_arr = np.atleast_1d(np.asarray(u, dtype=float))
    if h is None:
        h = 1e-4 * (1.0 + float(np.linalg.norm(u_arr)))
    if isinstance(target, DceeProblem):
        J = evaluate(target, float(u_arr[0]), with_jacobian=True).jacobian
    else:
        out = target(u_arr)
        if not (isinstance(out, tuple) and len(out) == 2):
            raise InvalidInputError("callable target must return (residual, jacobian)")
        J = np.atleast_2d(np.asarray(out[1], dtype=float))
    b = J.T @ J
    h_exact = exact_hessian_fd(target, u_arr, h)
    return HessianSplit(b_ggn=b, e_ggn=h_exact - b, h_exact=h_exact)


def contraction_rate(split: HessianSplit) -> float:
    """Smallest alpha with -alpha*B <= E <= alpha*B (as quadratic forms).

    Largest absolute generalized eigenvalue of (E, B); below one, the
    full-step iteration contracts locally.  Requires B positive definite.
    """
    B = split.b_ggn
    E = split.e_ggn
    if np.linalg.eigvalsh(B).min() <= 0.0:
        raise RateUndefinedError("curvature matrix is not positive definite")
    vals = scipy.linalg.eigh(E, B, eigvals_only=True)
    return float(np.max(np.abs(vals)))


@dataclass
class AuditReport:
    """Worst-case relative errors over the sampled instances."""

    samples: int
    skipped: int
    max_jacobian_rel_err: float
    max_gradient_rel_err: float
    max_decomposition_abs_err: float
    elapsed_s: float

    def as_dict(self) -> dict:
        return asdict(self)

    @property
    def passed(self) -> bool:
        return (
            self.max_jacobian_rel_err < 1e-6
            and self.max_gradient_rel_err < 1e-6
            and self.max_decomposition_abs_err < 1e-10
        )


def fd_step(vehicle: VehicleParams, u: float) -> float:
    """Scale-aware first-derivative step: 1e-6 of (input range + |u|).

    The input is in newtons with a range of thousands while the residual's
    input sensitivity is of order dt/mass; a step tied to 1 N would leave
    central differences rounding-dominated near u = 0.
    """
    return 1e-6 * ((vehicle.u_max - vehicle.u_min) + abs(u))


def random_problem(rng: np.random.Generator,
                   vehicle: VehicleParams | None = None,
                   reward: QuadraticRewardSpec | None = None) -> DceeProblem:
    """Random admissible snapshot for randomized derivative checks."""
    vehicle = vehicle if vehicle is not None else VehicleParams()
    reward = reward if reward is not None else QuadraticRewardSpec()
    v = float(rng.uniform(3.0, 40.0))
    center = make_true_params(
        reward,
        w_z=float(rng.uniform(0.3, 2.0)),
        v_star=float(rng.uniform(5.0, 28.0)),
        c_r=float(rng.uniform(0.0, 2.0)),
    )
    n = int(rng.integers(2, 13))
    spread = rng.uniform(0.05, 0.4, size=3)
    members = center + rng.uniform(-1.0, 1.0, size=(n, 3)) * spread
    members[:, 0] = np.minimum(members[:, 0], -reward.curvature_floor)
    rates = np.geomspace(0.05, 0.5, n)
    return DceeProblem(vehicle=vehicle, reward=reward, ensemble=Ensemble(members, rates), v=v)


def random_input(rng: np.random.Generator, vehicle: VehicleParams) -> float:
    return float(rng.uniform(vehicle.u_min, vehicle.u_max))


def derivative_audit(p: DceeProblem, samples: int, seed: int) -> AuditReport:
    """Randomized check of the analytic Jacobian, the gradient identity
    grad(0.5*||F||^2) = J'F, and the exploitation/exploration decomposition.

    Instances that hit the infeasible region (at the point or on the
    finite-difference stencil) are skipped and counted, not failed.
    """
    if samples < 1:
        raise InvalidInputError("samples must be at least 1")
    from .core import objective, objective_split  # local to avoid cycle at import

    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    max_jac = 0.0
    max_grad = 0.0
    max_split = 0.0
    skipped = 0
    for _ in range(samples):
        prob = random_problem(rng, vehicle=p.vehicle, reward=p.reward)
        u = random_input(rng, prob.vehicle)
        h = fd_step(prob.vehicle, u)
        try:
            ev = evaluate(prob, u, with_jacobian=True)
            J_fd = jacobian_fd(prob, u, h)
            u_arr = np.array([u])
            L = _half_objective_fn(prob)
            g_fd = (L(u_arr + h) - L(u_arr - h)) / (2.0 * h)
            exploit, explore = objective_split(prob, u)
            d = objective(prob, u)
        except InfeasibleCandidateError:
            skipped += 1
            continue
        J = ev.jacobian
        jac_scale = max(np.abs(J).max(), 1e-300)
        max_jac = max(max_jac, float(np.abs(J_fd - J).max() / jac_scale))
        g = float(J[:, 0] @ ev.residual)
        g_scale = max(abs(g), abs(g_fd), 1e-10)
        max_grad = max(max_grad, abs(g_fd - g) / g_scale)
        max_split = max(max_split, abs(d - (exploit + explore)))
    return AuditReport(
        samples=samples,
        skipped=skipped,
        max_jacobian_rel_err=max_jac,
        max_gradient_rel_err=max_grad,
        max_decomposition_abs_err=max_split,
        elapsed_s=time.perf_counter() - t0,
    )
