"""Closed-loop experiment runner, metrics, CSV/JSON export, and the solver
timing benchmark.

Step ordering within one control period: measure output and reward at the
current state, learn (measured ensemble update), select the input from the
updated belief (warm-started at the previous input), apply it, advance the
plant.  The measurement at t = 0 therefore seeds the belief before the
first input is chosen.
"""
from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .baselines import esc_init, esc_step, grad_dcee_step
from .config import ScenarioConfig
from .core import DceeProblem, objective_split, residual_fn, jacobian_fd, evaluate
from .diagnostics import fd_step
from .ensemble import condition_stats, init_ensemble, measured_update
from .errors import InfeasibleCandidateError, InvalidInputError, SolverFailureError
from .plant import active_segment, measure, plant_step
from .reward import optimal_condition
from .solver import GnConfig, controller_step, solve

CSV_COLUMNS = (
    "t",
    "v",
    "u",
    "v_star_true",
    "gamma_mean_est",
    "exploit",
    "explore",
    "reward_meas",
    "solve_time_ns",
    "iterations",
)
CSV_HEADER = ",".join(CSV_COLUMNS)


@dataclass(frozen=True)
class StepRecord:
    t: float
    v: float
    u: float
    v_star_true: float
    gamma_mean_est: float
    exploit: float
    explore: float
    reward_meas: float
    solve_time_ns: int
    iterations: int


@dataclass
class RunResult:
    records: list
    metrics: dict
    timing: dict
    config: dict
    final_problem: DceeProblem = field(repr=False, default=None)
    final_u: float = 0.0


def _timing_summary(times_ns) -> dict:
    arr = np.asarray(times_ns, dtype=float)
    if arr.size == 0:
        return {"mean_ns": 0.0, "max_ns": 0.0, "p99_ns": 0.0}
    return {
        "mean_ns": float(arr.mean()),
        "max_ns": float(arr.max()),
        "p99_ns": float(np.percentile(arr, 99)),
    }


def run_closed_loop(cfg: ScenarioConfig) -> RunResult:
    """Simulate the configured controller against the scheduled environment.

    Deterministic given the config: the measurement noise is a pure function
    of (seed, step) and the ensemble draw of its own seed.  Wall-clock solver
    times are collected into the timing summary only; the per-record
    solve_time_ns field stays zero so that exported trajectories are
    byte-reproducible.
    """
    vehicle = cfg.vehicle
    spec = cfg.reward
    ens = init_ensemble(
        spec,
        cfg.ensemble.prior,
        cfg.ensemble.spread,
        cfg.ensemble.n_members,
        cfg.ensemble.seed,
        eta_lo=cfg.ensemble.eta_lo,
        eta_hi=cfg.ensemble.eta_hi,
    )
    ctype = cfg.controller.type
    esc_state = esc_init(cfg.v0) if ctype == "esc" else None
    v = cfg.v0
    u_prev = 0.0
    records = []
    wall_times = []
    problem = None
    for k in range(cfg.n_steps):
        t = k * vehicle.dt
        seg = active_segment(cfg.schedule, t)
        y, r_meas = measure(spec, v, seg, cfg.noise, k)
        ens = measured_update(ens, spec, y, r_meas)
        stats = condition_stats(ens, spec)
        problem = DceeProblem(vehicle=vehicle, reward=spec, ensemble=ens, v=v)

        if ctype == "numerical_dcee":
            u, report = controller_step(problem, u_prev, cfg.controller.solver)
            elapsed = report.solve_time_ns
            iterations = report.iterations
        elif ctype == "grad_dcee":
            t0 = time.perf_counter_ns()
            u = grad_dcee_step(problem, u_prev, cfg.controller.grad)
            elapsed = time.perf_counter_ns() - t0
            iterations = 1
        else:
            t0 = time.perf_counter_ns()
            u, esc_state = esc_step(esc_state, cfg.controller.esc, r_meas, v, vehicle, vehicle.dt)
            elapsed = time.perf_counter_ns() - t0
            iterations = 0

        try:
            exploit, explore = objective_split(problem, u)
        except InfeasibleCandidateError:
            exploit, explore = math.nan, math.nan

        records.append(
            StepRecord(
                t=t,
                v=v,
                u=u,
                v_star_true=optimal_condition(spec, seg.theta_true),
                gamma_mean_est=stats.mean,
                exploit=exploit,
                explore=explore,
                reward_meas=r_meas,
                solve_time_ns=0,
                iterations=iterations,
            )
        )
        wall_times.append(elapsed)
        v = plant_step(vehicle, v, u, seg)
        u_prev = u

    metrics = compute_metrics(records, cfg.schedule, spec)
    return RunResult(
        records=records,
        metrics=metrics,
        timing=_timing_summary(wall_times),
        config=cfg.raw,
        final_problem=problem,
        final_u=u_prev,
    )


def compute_metrics(records, schedule, spec) -> dict:
    """Terminal speed error, accumulated absolute speed error, and cumulative
    regret against the true per-segment parameters."""
    if not records:
        raise InvalidInputError("cannot compute metrics of an empty record list")
    iae = 0.0
    regret = 0.0
    for rec in records:
        seg = active_segment(schedule, rec.t)
        v_star = optimal_condition(spec, seg.theta_true)
        iae += abs(rec.v - v_star)
        z = rec.v / spec.v_scale
        zs = v_star / spec.v_scale
        t0 = seg.theta_true[0]
        # R(theta*, v*) - R(theta*, v) = -theta0 * (z - z*)^2 for the peak form
        regret += -t0 * (z - zs) ** 2
    last = records[-1]
    seg = active_segment(schedule, last.t)
    e_v = abs(last.v - optimal_condition(spec, seg.theta_true))
    return {"e_v": e_v, "iae_v": iae, "regret": regret}


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def export(result: RunResult, path, fmt: str):
    """Write a RunResult to disk.

    csv: one row per record with the exact column set CSV_COLUMNS.
    json: metrics, timing summary, and the full config echo (no records).
    """
    if fmt not in ("csv", "json"):
        raise InvalidInputError(f"format must be 'csv' or 'json', got {fmt!r}")
    if not result.records:
        raise InvalidInputError("refusing to export an empty RunResult")
    path = str(path)
    try:
        if fmt == "csv":
            lines = [CSV_HEADER]
            for r in result.records:
                lines.append(
                    ",".join(
                        (
                            _fmt(r.t),
                            _fmt(r.v),
                            _fmt(r.u),
                            _fmt(r.v_star_true),
                            _fmt(r.gamma_mean_est),
                            _fmt(r.exploit),
                            _fmt(r.explore),
                            _fmt(r.reward_meas),
                            str(r.solve_time_ns),
                            str(r.iterations),
                        )
                    )
                )
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write("\n".join(lines) + "\n")
        else:
            payload = {
                "config": result.config,
                "metrics": result.metrics,
                "timing": result.timing,
            }
            with open(path, "w", encoding="utf-8") as fh:
                json.dump(payload, fh, indent=2, sort_keys=True)
                fh.write("\n")
    except OSError as exc:
        raise InvalidInputError(f"cannot write {fmt} export to {path}: {exc}") from exc
    return path


def parse_csv(path) -> list:
    """Read back an exported CSV into StepRecord values."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln for ln in fh.read().splitlines() if ln]
    if not lines or lines[0] != CSV_HEADER:
        raise InvalidInputError(f"{path} does not start with the expected header")
    records = []
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != len(CSV_COLUMNS):
            raise InvalidInputError(f"malformed CSV row: {ln!r}")
        records.append(
            StepRecord(
                t=float(parts[0]),
                v=float(parts[1]),
                u=float(parts[2]),
                v_star_true=float(parts[3]),
                gamma_mean_est=float(parts[4]),
                exploit=float(parts[5]),
                explore=float(parts[6]),
                reward_meas=float(parts[7]),
                solve_time_ns=int(parts[8]),
                iterations=int(parts[9]),
            )
        )
    return records


def _fd_jacobian_fn(problem: DceeProblem):
    """Residual/Jacobian callback with the Jacobian by central differences."""

    def fn(u_vec):
        u = float(u_vec[0])
        F = evaluate(problem, u, with_jacobian=False).residual
        J = jacobian_fd(problem, u, fd_step(problem.vehicle, u))
        return F, J

    return fn


def _newton_fd_solve(problem: DceeProblem, u_init: float, cfg: GnConfig):
    """Damped Newton reference with gradient and Hessian from central
    differences of the half objective; scalar input only.  Returns
    (u, iterations, solve_time_ns) or raises SolverFailureError."""
    t_start = time.perf_counter_ns()

    def L(u):
        f = evaluate(problem, u, with_jacobian=False).residual
        return 0.5 * float(f @ f)

    u = min(max(float(u_init), cfg.u_min), cfg.u_max)
    try:
        val = L(u)
    except InfeasibleCandidateError as exc:
        raise SolverFailureError("initial point infeasible") from exc
    iterations = 0
    for _ in range(cfg.max_iters):
        hg = fd_step(problem.vehicle, u)
        hh = 1e-4 * (1.0 + abs(u))
        try:
            lp, lm = L(u + hg), L(u - hg)
            hp, hm = L(u + hh), L(u - hh)
        except InfeasibleCandidateError as exc:
            raise SolverFailureError("stencil point infeasible") from exc
        g = (lp - lm) / (2.0 * hg)
        H = (hp - 2.0 * val + hm) / (hh * hh)
        lam = cfg.damping
        accepted = False
        for _attempt in range(6):
            denom = H + lam
            if denom <= 0.0:
                denom = abs(H) + max(lam, 1e-8)
            du = -g / denom
            u_new = min(max(u + du, cfg.u_min), cfg.u_max)
            try:
                val_new = L(u_new)
            except InfeasibleCandidateError:
                lam = lam * 10.0 if lam > 0.0 else 1e-12
                continue
            if val_new <= val * (1.0 + 1e-12) + 1e-15:
                accepted = True
                break
            lam = lam * 10.0 if lam > 0.0 else 1e-12
        if not accepted:
            raise SolverFailureError("newton reference found no acceptable step")
        step = abs(u_new - u)
        stop = step / (1.0 + abs(u))
        u, val = u_new, val_new
        iterations += 1
        if stop <= cfg.tol:
            break
    return u, iterations, time.perf_counter_ns() - t_start


def bench_solver(
    cfg: ScenarioConfig,
    repetitions: int = 1,
    agreement_stride: int = 10,
    reference_max_iters: int = 60,
) -> dict:
    """Time the production solver against two internal references on the
    identical per-step problems of the closed loop.

    The loop itself is always driven by the production (analytic-Jacobian)
    controller; the references solve each snapshot from the same warm start
    with the same settings.  Every agreement_stride steps all three are also
    re-solved to convergence (reference_max_iters budget) and the relative
    spread of the reached objectives is tracked.
    """
    if repetitions < 1:
        raise InvalidInputError("repetitions must be at least 1")
    gncfg = cfg.controller.solver
    ref_cfg = GnConfig(
        max_iters=reference_max_iters,
        tol=gncfg.tol,
        damping=gncfg.damping,
        u_min=gncfg.u_min,
        u_max=gncfg.u_max,
    )
    times = {"analytic_gn": [], "fd_jacobian_gn": [], "fd_hessian_newton": []}
    agreement_max_rel = 0.0
    agreement_checks = 0
    reference_failures = 0

    for _ in range(repetitions):
        vehicle = cfg.vehicle
        spec = cfg.reward
        ens = init_ensemble(
            spec,
            cfg.ensemble.prior,
            cfg.ensemble.spread,
            cfg.ensemble.n_members,
            cfg.ensemble.seed,
            eta_lo=cfg.ensemble.eta_lo,
            eta_hi=cfg.ensemble.eta_hi,
        )
        v = cfg.v0
        u_prev = 0.0
        for k in range(cfg.n_steps):
            t = k * vehicle.dt
            seg = active_segment(cfg.schedule, t)
            y, r_meas = measure(spec, v, seg, cfg.noise, k)
            ens = measured_update(ens, spec, y, r_meas)
            problem = DceeProblem(vehicle=vehicle, reward=spec, ensemble=ens, v=v)

            u, report = controller_step(problem, u_prev, gncfg)
            times["analytic_gn"].append(report.solve_time_ns)

            try:
                _, rep_fd = solve(_fd_jacobian_fn(problem), [u_prev], gncfg)
                times["fd_jacobian_gn"].append(rep_fd.solve_time_ns)
            except SolverFailureError:
                reference_failures += 1
            try:
                _, _, t_newton = _newton_fd_solve(problem, u_prev, gncfg)
                times["fd_hessian_newton"].append(t_newton)
            except SolverFailureError:
                reference_failures += 1

            if k % agreement_stride == 0:
                try:
                    u_a, _ = solve(residual_fn(problem), [u_prev], ref_cfg)
                    u_b, _ = solve(_fd_jacobian_fn(problem), [u_prev], ref_cfg)
                    u_c, _, _ = _newton_fd_solve(problem, u_prev, ref_cfg)
                    objs = []
                    for uu in (float(u_a[0]), float(u_b[0]), u_c):
                        f = evaluate(problem, uu, with_jacobian=False).residual
                        objs.append(float(f @ f))
                    spread_rel = (max(objs) - min(objs)) / max(max(abs(o) for o in objs), 1e-300)
                    agreement_max_rel = max(agreement_max_rel, spread_rel)
                    agreement_checks += 1
                except SolverFailureError:
                    reference_failures += 1

            v = plant_step(vehicle, v, u, seg)
            u_prev = u

    summary = {name: _timing_summary(vals) for name, vals in times.items()}
    mean_gn = summary["analytic_gn"]["mean_ns"]
    speedup = {
        name: (summary[name]["mean_ns"] / mean_gn if mean_gn > 0 else math.inf)
        for name in ("fd_jacobian_gn", "fd_hessian_newton")
    }
    return {
        "timing": summary,
        "speedup_vs_analytic": speedup,
        "agreement_max_rel": agreement_max_rel,
        "agreement_checks": agreement_checks,
        "reference_failures": reference_failures,
        "steps_per_repetition": cfg.n_steps,
        "repetitions": repetitions,
    }
