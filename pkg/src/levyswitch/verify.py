"""Invariant suite behind ``levyswitch verify``.

Each check measures one deviation and compares it with a fixed tolerance.
Checks are deterministic: Monte Carlo checks run on the configured seed, and
nothing time- or order-dependent enters the report.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np

from .levy_model import Family, LevyModelSpec
from .numerics import QuadConfig, gl_quad
from .scale_fn import scale_table, second_gen_w, second_gen_z
from .simulator import SimConfig, estimate_exit_pair, estimate_ruin
from .switch_core import (ExitQuery, SwitchSpec, exit_down_one_sided, exit_down_two_sided,
                          exit_up_two_sided, potential_two_sided, ruin_probability, switch_core)


@dataclass(frozen=True)
class CheckResult:
    name: str
    measured: float
    tolerance: float
    passed: bool
    detail: str = ""


@dataclass(frozen=True, kw_only=True)
class VerifyPlan:
    """Everything the suite needs, usually read from a run config."""

    spec: SwitchSpec
    quad: QuadConfig
    sim: SimConfig
    q: float = 0.05
    a: float = 3.0
    q_grid: tuple[float, ...] = (0.0, 0.05)
    x_grid: tuple[float, ...] = (0.5, 1.5, 2.5)
    far_a: float = 40.0
    delta: float = 0.2
    ruin_x: float = 0.0
    limit_x: LevyModelSpec | None = None
    limit_y: LevyModelSpec | None = None
    limit_q: float = 0.5
    limit_levels: tuple[float, ...] = (10.0, 20.0, 30.0)


def _result(name: str, measured: float, tol: float, detail: str = "") -> CheckResult:
    return CheckResult(name, float(measured), tol, bool(measured < tol), detail)


def _z_score(exact: float, est) -> float:
    """|exact - mean| in standard errors; a degenerate sample only matches exactly."""
    gap = abs(exact - est.mean)
    if est.std_error > 0:
        return gap / est.std_error
    return 0.0 if gap == 0 else math.inf


def _quad_fn(f: Callable) -> Callable:
    """Adapt a 1-D vectorized function to the node arrays handed out by gl_quad."""
    return lambda y: np.asarray(f(y.ravel()), dtype=float).reshape(y.shape)


def check_laplace(plan: VerifyPlan) -> Iterator[CheckResult]:
    models = {plan.spec.model_x, plan.spec.model_y, LevyModelSpec.brownian_drift(0.3, 1.0)}
    for family in (Family.CRAMER_LUNDBERG_EXP, Family.BROWNIAN_DRIFT):
        worst = 0.0
        for m in sorted((m for m in models if m.family is family), key=lambda m: m.label):
            for q in sorted(set(plan.q_grid) | {plan.q}):
                t = scale_table(m, q, plan.quad)
                for dt in (0.5, 1.0, 2.0):
                    theta = t.phi + dt
                    worst = max(worst, abs(t.laplace_transform(theta) - 1.0 / float(t.psi_q(theta))))
        yield _result(f"laplace_{family.value}", worst, 1e-6)


def check_dual_representation(plan: VerifyPlan) -> Iterator[CheckResult]:
    spec, q = plan.spec, plan.q
    u = np.linspace(0.1, 4.0, 20)
    x = np.linspace(0.2, 8.0, 20)
    uu, xx = np.meshgrid(u, x)
    worst = 0.0
    for m in (spec.model_x, spec.model_y):
        base, shifted = scale_table(m, q, plan.quad), scale_table(m, q + spec.lam, plan.quad)
        for fn in (second_gen_w, second_gen_z):
            first = fn(base, shifted, uu, xx, "first")
            second = fn(base, shifted, uu, xx, "second")
            worst = max(worst, float(np.max(np.abs(first - second) / np.abs(second))))
    yield _result("dual_representation", worst, 1e-7)


def check_convolutions(plan: VerifyPlan) -> Iterator[CheckResult]:
    spec, q, a, b, lam = plan.spec, plan.q, plan.a, plan.spec.barrier_b, plan.spec.lam
    worst = 0.0
    x = np.linspace(0.1, 5.0, 11)
    for m in (spec.model_x, spec.model_y):
        lo, hi = scale_table(m, q, plan.quad), scale_table(m, q + lam, plan.quad)
        conv = gl_quad(lambda y: hi.W(x[:, None] - y) * lo.W(y), 0.0, x, plan.quad, n_panels=40)
        worst = max(worst, float(np.max(np.abs(lam * conv - (hi.W(x) - lo.W(x))))))
    yield _result("convolution_scale", worst, 1e-6)

    core = switch_core(spec, q, plan.quad)
    worst = 0.0
    for y in np.linspace(0.0, a, 13):
        f = _quad_fn(lambda z: core.Xl.W(a - z) * core.u_master(a, z, y))
        mid = min(max(y, b), a)
        lhs = lam * float(gl_quad(f, b, mid, plan.quad, 8) + gl_quad(f, mid, a, plan.quad, 8))
        rhs = float(core.wbar_x(b - y, a - y)) - float(core.u_master(a, a, y))
        worst = max(worst, abs(lhs - rhs))
    yield _result("convolution_u_master", worst, 1e-6)

    f = _quad_fn(lambda z: core.Xl.W(a - z) * core.v_master(a, z))
    lhs = lam * float(gl_quad(f, b, a, plan.quad, 8))
    rhs = float(core.zbar_x(b, a)) - float(core.v_master(a, a))
    yield _result("convolution_v_master", abs(lhs - rhs), 1e-6)


def check_reduction(plan: VerifyPlan) -> Iterator[CheckResult]:
    mx = plan.spec.model_x
    same = SwitchSpec(model_x=mx, model_y=mx, barrier_b=plan.spec.barrier_b, lam=plan.spec.lam)
    a = plan.a
    x = np.linspace(0.0, a, 13)
    dev_u = dev_v = dev_exit = 0.0
    for q in sorted(set(plan.q_grid) | {plan.q}):
        core = switch_core(same, q, plan.quad)
        t = core.X
        for y in (0.0, 0.7, 1.9):
            dev_u = max(dev_u, float(np.max(np.abs(core.u_master(a, x, y) - t.W(x - y)))))
        dev_v = max(dev_v, float(np.max(np.abs(core.v_master(a, x) - t.Z(x)))))
        wa, za = float(t.W(a)), float(t.Z(a))
        for xv in x:
            query = ExitQuery(x0=float(xv), a=a, q=q)
            up = exit_up_two_sided(same, query, plan.quad)
            down = exit_down_two_sided(same, query, plan.quad)
            w, z = float(t.W(xv)), float(t.Z(xv))
            dev_exit = max(dev_exit, abs(up - w / wa), abs(down - (z - w / wa * za)))
    yield _result("reduction_u", dev_u, 1e-8)
    yield _result("reduction_v", dev_v, 1e-8)
    yield _result("reduction_exit", dev_exit, 1e-8)


def check_mc_two_sided(plan: VerifyPlan) -> Iterator[CheckResult]:
    worst = 0.0
    for q in plan.q_grid:
        for x in plan.x_grid:
            query = ExitQuery(x0=x, a=plan.a, q=q)
            up_mc, down_mc = estimate_exit_pair(plan.spec, query, plan.sim)
            for an, mc in ((exit_up_two_sided(plan.spec, query, plan.quad), up_mc),
                           (exit_down_two_sided(plan.spec, query, plan.quad), down_mc)):
                worst = max(worst, _z_score(an, mc))
    yield _result("mc_two_sided_max_z", worst, 3.0, f"n={plan.sim.n_paths} seed={plan.sim.seed}")


def check_one_sided(plan: VerifyPlan) -> Iterator[CheckResult]:
    q = plan.q if plan.q > 0 else 0.05
    worst = 0.0
    for x in plan.x_grid:
        two = exit_down_two_sided(plan.spec, ExitQuery(x0=x, a=plan.far_a, q=q), plan.quad)
        worst = max(worst, abs(two - exit_down_one_sided(plan.spec, q, x, plan.quad)))
    yield _result("one_sided_gap", worst, 1e-4, f"a={plan.far_a:g}")

    worst = 0.0
    b, a = plan.spec.barrier_b, plan.a
    for x in plan.x_grid:
        query = ExitQuery(x0=x, a=a, q=q)
        f = _quad_fn(lambda y: potential_two_sided(plan.spec, query, y, plan.quad))
        cuts = sorted({0.0, b, x, a})
        mass = sum(float(gl_quad(f, lo, hi, plan.quad, 8)) for lo, hi in zip(cuts[:-1], cuts[1:]))
        total = q * mass + exit_up_two_sided(plan.spec, query, plan.quad) \
            + exit_down_two_sided(plan.spec, query, plan.quad)
        worst = max(worst, abs(total - 1.0))
    yield _result("potential_completeness", worst, 1e-5)


def check_ruin(plan: VerifyPlan) -> Iterator[CheckResult]:
    mx, b, lam = plan.spec.model_x, plan.spec.barrier_b, plan.spec.lam
    if mx.family is Family.CRAMER_LUNDBERG_EXP:
        c, eta, rho = mx.params
        x = np.array([0.0, 1.0, 3.0])
        classical = eta / (c * rho) * np.exp(-(rho - eta / c) * x)
        dev = float(np.max(np.abs(ruin_probability(mx, 0.0, b, lam, x, plan.quad) - classical)))
        yield _result("ruin_classical", dev, 1e-6)
    an = float(ruin_probability(mx, plan.delta, b, lam, plan.ruin_x, plan.quad))
    mc = estimate_ruin(mx, plan.delta, b, lam, plan.ruin_x, plan.sim)
    yield _result("ruin_mc_z", _z_score(an, mc), 3.0,
                  f"delta={plan.delta:g} tail_bound={mc.tail_bound:.3g}")


def check_limit(plan: VerifyPlan) -> Iterator[CheckResult]:
    mx = plan.limit_x or plan.spec.model_x
    my = plan.limit_y or plan.spec.model_y
    tx, ty = scale_table(mx, plan.limit_q, plan.quad), scale_table(my, plan.limit_q, plan.quad)
    levels = np.asarray(plan.limit_levels, dtype=float)
    log_ratio = np.log(ty.W(levels) / tx.W(levels))
    slopes = np.diff(log_ratio) / np.diff(levels)
    rate = -(tx.phi - ty.phi)
    yield _result("limit_slope_rel", float(np.max(np.abs(slopes / rate - 1.0))), 0.05)


CHECKS = (check_laplace, check_dual_representation, check_convolutions, check_reduction,
          check_mc_two_sided, check_one_sided, check_ruin, check_limit)


def run_checks(plan: VerifyPlan) -> list[CheckResult]:
    return [r for check in CHECKS for r in check(plan)]


def format_measured(v: float) -> str:
    return "inf" if math.isinf(v) else f"{v:.6e}"
