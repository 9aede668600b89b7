import math

import numpy as np
import pytest

from dcee import (
    InfeasibleCandidateError,
    InvalidInputError,
    drag_force,
    evaluate,
    jacobian,
    jacobian_fd,
    least_squares_cost,
    make_true_params,
    objective,
    objective_grid,
    objective_split,
    predict_output,
    residual,
)
from dcee.diagnostics import fd_step, random_input, random_problem

from conftest import make_problem


def test_predict_output_equilibrium(vehicle):
    p = make_problem([[-1.0, 1.5, 0.2]], v=22.0)
    u_eq = drag_force(vehicle, 22.0)
    assert predict_output(p, u_eq) == pytest.approx(22.0)


def test_predict_output_hand_value():
    p = make_problem([[-1.0, 1.5, 0.2]], v=20.0)
    assert predict_output(p, 1000.0) == pytest.approx(20.0 + (0.1 / 1500.0) * (1000.0 - 360.0))
    assert predict_output(p, 1000.0) == predict_output(p, 1000.0)


def test_predict_output_rejects_non_finite():
    p = make_problem([[-1.0, 1.5, 0.2]])
    with pytest.raises(InvalidInputError):
        predict_output(p, float("nan"))


def test_residual_zero_at_consensus_optimum(spec, vehicle):
    theta = make_true_params(spec, 1.0, 25.0, 1.0)
    p = make_problem(np.tile(theta, (4, 1)), v=25.0, spec=spec, vehicle=vehicle)
    u_eq = drag_force(vehicle, 25.0)
    F = residual(p, u_eq)
    assert np.abs(F).max() < 1e-12
    assert objective(p, u_eq) < 1e-24


def test_residual_singleton_has_zero_uncertainty_block(spec):
    theta = make_true_params(spec, 1.0, 18.0, 0.5)
    p = make_problem(theta[None, :], v=12.0, spec=spec)
    F = residual(p, 500.0)
    assert F.shape == (2,)
    assert F[1] == 0.0


def test_residual_hand_values(spec):
    # two members with optimal speeds 10 and 20; choose the input whose
    # predicted output is exactly 12
    m1 = make_true_params(spec, 1.0, 10.0, 0.0)
    m2 = make_true_params(spec, 1.0, 20.0, 0.0)
    p = make_problem(np.stack([m1, m2]), rates=[1e-300, 1e-300], v=12.0)
    u = drag_force(p.vehicle, 12.0)  # predicted output 12, tiny rates freeze the update
    F = residual(p, u)
    assert F == pytest.approx([-3.0, -5.0 / math.sqrt(2.0), 5.0 / math.sqrt(2.0)])
    assert objective(p, u) == pytest.approx(34.0)
    exploit, explore = objective_split(p, u)
    assert exploit == pytest.approx(9.0)
    assert explore == pytest.approx(25.0)


def test_objective_split_nonnegative_and_consistent():
    rng = np.random.default_rng(21)
    checked = 0
    while checked < 100:
        p = random_problem(rng)
        u = random_input(rng, p.vehicle)
        try:
            d = objective(p, u)
            exploit, explore = objective_split(p, u)
        except InfeasibleCandidateError:
            continue
        assert exploit >= 0.0 and explore >= 0.0
        assert abs(d - (exploit + explore)) < 1e-10
        checked += 1


def test_least_squares_cost_is_half_objective():
    rng = np.random.default_rng(22)
    p = random_problem(rng)
    u = 100.0
    assert least_squares_cost(p, u) == pytest.approx(0.5 * objective(p, u))


def test_residual_eval_norm_matches_objective():
    rng = np.random.default_rng(23)
    p = random_problem(rng)
    ev = evaluate(p, 250.0)
    assert float(ev.residual @ ev.residual) == pytest.approx(objective(p, 250.0), abs=1e-12)
    assert ev.residual.shape == (p.ensemble.n_members + 1,)
    assert ev.jacobian.shape == (p.ensemble.n_members + 1, 1)


def test_jacobian_consensus_has_zero_uncertainty_rows(spec):
    theta = make_true_params(spec, 1.0, 22.0, 1.0)
    p = make_problem(np.tile(theta, (5, 1)), v=20.0, spec=spec)
    J = jacobian(p, 300.0)
    assert np.abs(J[1:, 0]).max() == 0.0
    single = make_problem(theta[None, :], v=20.0, spec=spec)
    J1 = jacobian(single, 300.0)
    assert J1[1, 0] == 0.0


def test_jacobian_matches_finite_differences():
    rng = np.random.default_rng(24)
    worst = 0.0
    checked = 0
    while checked < 100:
        p = random_problem(rng)
        u = random_input(rng, p.vehicle)
        h = fd_step(p.vehicle, u)
        try:
            J = jacobian(p, u)
            J_fd = jacobian_fd(p, u, h)
        except InfeasibleCandidateError:
            continue
        worst = max(worst, float(np.abs(J_fd - J).max() / np.abs(J).max()))
        checked += 1
    assert worst < 1e-6


def test_gradient_identity():
    # J'F matches central differences of the half objective
    rng = np.random.default_rng(25)
    checked = 0
    while checked < 50:
        p = random_problem(rng)
        u = random_input(rng, p.vehicle)
        h = fd_step(p.vehicle, u)
        try:
            ev = evaluate(p, u)
            lp = least_squares_cost(p, u + h)
            lm = least_squares_cost(p, u - h)
        except InfeasibleCandidateError:
            continue
        g = float(ev.jacobian[:, 0] @ ev.residual)
        g_fd = (lp - lm) / (2.0 * h)
        assert abs(g - g_fd) <= 1e-6 * max(abs(g), abs(g_fd), 1e-10)
        checked += 1


def test_linearized_objective_midpoint_convexity():
    # for a fixed linearization, du -> ||F + J du||^2 is convex
    rng = np.random.default_rng(26)
    p = random_problem(rng)
    ev = evaluate(p, 500.0)
    F, J = ev.residual, ev.jacobian

    def q(du):
        r = F + J[:, 0] * du
        return float(r @ r)

    for _ in range(200):
        a, b = rng.uniform(-1e4, 1e4, size=2)
        lhs = q(0.5 * (a + b))
        rhs = 0.5 * (q(a) + q(b))
        assert lhs <= rhs + 1e-12 * max(1.0, abs(rhs))


def test_uncertainty_scaling_homogeneity(spec):
    # scaling all optimal-speed deviations by c scales explore by c^2; peak
    # locations map to member optimal speeds exactly, and near-zero rates
    # freeze the predicted update so the deviations pass through unchanged
    rng = np.random.default_rng(27)
    deltas = rng.uniform(-3.0, 3.0, size=6)
    deltas -= deltas.mean()
    u = 400.0

    def explore_for(c):
        members = np.stack([make_true_params(spec, 1.0, 20.0 + c * d, 1.0) for d in deltas])
        p = make_problem(members, rates=np.full(6, 1e-300), v=20.0, spec=spec)
        return objective_split(p, u)[1]

    base = explore_for(1.0)
    for c in (0.5, 2.0):
        assert explore_for(c) == pytest.approx(c * c * base, rel=1e-9)


def test_jacobian_fd_affine_exact():
    a = np.array([2.0, -1.0, 0.5])
    b = np.array([1.0, 0.0, -2.0])

    def affine(u_vec):
        return a * float(u_vec[0]) + b

    J = jacobian_fd(affine, 3.0, h=1e-3)
    assert np.abs(J[:, 0] - a).max() < 1e-12


def test_jacobian_fd_second_order_convergence():
    # halving the step reduces the truncation error about fourfold on a
    # smooth synthetic residual with known third derivative
    def cubic(u_vec):
        u = float(u_vec[0])
        return np.array([u**3, math.sin(u)])

    def exact(u):
        return np.array([3.0 * u * u, math.cos(u)])

    u0 = 0.7
    errs = []
    for h in (1e-2, 5e-3):
        J = jacobian_fd(cubic, u0, h=h)
        errs.append(np.abs(J[:, 0] - exact(u0)).max())
    ratio = errs[0] / errs[1]
    assert 3.5 < ratio < 4.5


def test_infeasible_candidate_raises(spec):
    # a member close to the admissibility floor plus a large predicted
    # innovation pushes the predicted member over the floor
    members = np.array([[-0.0501, 2.0, 0.0], [-1.0, 1.0, 0.5]])
    p = make_problem(members, rates=[0.5, 0.5], v=55.0, spec=spec)
    with pytest.raises(InfeasibleCandidateError):
        residual(p, 5000.0)


def test_objective_grid_matches_pointwise():
    rng = np.random.default_rng(28)
    p = random_problem(rng)
    us = np.linspace(p.vehicle.u_min, p.vehicle.u_max, 101)
    grid = objective_grid(p, us)
    for u, d in zip(us[::10], grid[::10]):
        if np.isinf(d):
            with pytest.raises(InfeasibleCandidateError):
                objective(p, float(u))
        else:
            assert d == pytest.approx(objective(p, float(u)), rel=1e-12, abs=1e-12)


def test_objective_grid_marks_infeasible(spec):
    members = np.array([[-0.0501, 2.0, 0.0], [-1.0, 1.0, 0.5]])
    p = make_problem(members, rates=[0.5, 0.5], v=55.0, spec=spec)
    us = np.array([0.0, 5000.0])
    grid = objective_grid(p, us)
    assert np.isinf(grid[1])
