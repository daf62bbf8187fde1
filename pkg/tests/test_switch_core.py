import math

import numpy as np
import pytest
from scipy.integrate import quad as sp_quad

from conftest import cl_scale_oracle
from levyswitch.errors import AssumptionViolation, ConfigError, DomainError, NumericalError
from levyswitch.levy_model import LevyModelSpec
from levyswitch.numerics import gl_quad
from levyswitch.scale_fn import scale_table
from levyswitch.simulator import (EXIT_DOWN, EXIT_UP, SimConfig, estimate_exit_pair,
                                  estimate_exit_laplace, run_paths)
from levyswitch.switch_core import (ExitQuery, SwitchSpec, aux_alpha, aux_gamma,
                                    exit_down_one_sided, exit_down_two_sided, exit_up_one_sided,
                                    exit_up_two_sided, occupation_discounted_down,
                                    occupation_discounted_up, poisson_first_down, poisson_first_up,
                                    potential_density, potential_full, potential_killed_above,
                                    potential_killed_below, potential_two_sided,
                                    resolvent_below_switch, ruin_denominator_general,
                                    ruin_probability, script_a, script_g, script_w, switch_core,
                                    u_master, v_master)

CL = LevyModelSpec.cramer_lundberg_exp
BM = LevyModelSpec.brownian_drift


def mass(f, cuts, n=3, cfg=None):
    """∫ f over consecutive cut intervals by fixed composite Gauss-Legendre."""
    g = lambda y: np.asarray(f(y.ravel()), dtype=float).reshape(y.shape)
    kw = {} if cfg is None else {"cfg": cfg}
    return sum(float(gl_quad(g, lo, hi, n_panels=n, **kw)) for lo, hi in zip(cuts[:-1], cuts[1:]))


@pytest.fixture(scope="module")
def same_spec(cl_x):
    return SwitchSpec(model_x=cl_x, model_y=cl_x, barrier_b=1.0, lam=1.0)


# -- spec types -------------------------------------------------------------------

@pytest.mark.parametrize("kw", [{"barrier_b": -1.0, "lam": 1.0}, {"barrier_b": 1.0, "lam": 0.0},
                                {"barrier_b": 1.0, "lam": math.inf}])
def test_switchspec_validation(cl_x, kw):
    with pytest.raises(ConfigError):
        SwitchSpec(model_x=cl_x, model_y=cl_x, **kw)


@pytest.mark.parametrize("x0,a", [(-0.1, 3.0), (3.5, 3.0), (0.5, 0.5)])
def test_query_validation(cl_spec, x0, a):
    with pytest.raises(DomainError):
        exit_up_two_sided(cl_spec, ExitQuery(x0=x0, a=a, q=0.0))


def test_drift_reduced(cl_x):
    s = SwitchSpec.drift_reduced(cl_x, 0.2, 1.0, 1.0)
    assert s.model_y.params == pytest.approx((1.3, 1.0, 1.0))
    with pytest.raises(DomainError):
        SwitchSpec.drift_reduced(cl_x, -0.1, 1.0, 1.0)


# -- auxiliary functions against an independent nested-quadrature oracle ----------------

def _oracles(q, lam, b):
    f = float
    WX, WY, WYl = cl_scale_oracle(1.5, 1, 1, q), cl_scale_oracle(1, 1, 1, q), cl_scale_oracle(1, 1, 1, q + lam)

    def wbar_y(u, s):
        if u <= 0:
            return f(WYl(s))
        if u >= s:
            return f(WY(s))
        return f(WYl(s)) - lam * sp_quad(lambda y: f(WYl(s - y)) * f(WY(y)), 0, u, epsabs=1e-13)[0]

    def zbar_neg(u, s):
        # Z̄^{(q+λ,-λ)}_u(s) = Z^{(q)}(s) + λ ∫_0^u W^{(q)}(s-y) Z^{(q+λ)}(y) dy (model Y)
        ZY = lambda t: 1 + q * sp_quad(WY, 0, t, epsabs=1e-14)[0] if t > 0 else 1.0
        ZYl = lambda t: 1 + (q + lam) * sp_quad(WYl, 0, t, epsabs=1e-14)[0] if t > 0 else 1.0
        if u >= s:
            return ZYl(s)
        return ZY(s) + lam * sp_quad(lambda y: f(WY(s - y)) * ZYl(y), 0, u, epsabs=1e-12)[0]

    ZX = lambda t: 1 + q * sp_quad(WX, 0, t, epsabs=1e-14)[0] if t > 0 else 1.0

    def gamma(x, z):
        base = f(WX(x - z)) - wbar_y(x - b, x - z)
        if b <= z:
            return base
        return base + lam * sp_quad(lambda y: wbar_y(x - b, x - z - y) * f(WX(y)), 0, b - z,
                                    epsabs=1e-12)[0]

    def alpha(x):
        base = ZX(x) - zbar_neg(b, x)
        return base + lam * sp_quad(lambda y: wbar_y(x - b, x - y) * ZX(y), 0, b, epsabs=1e-12,
                                    points=[min(x, b)] if 0 < x < b else None)[0]

    return gamma, alpha


def test_gamma_against_oracle(cl_spec):
    gamma, _ = _oracles(0.05, 1.0, 1.0)
    for x, z in ((2.0, 0.0), (2.5, 0.7), (1.5, 1.2), (0.5, 0.0)):
        assert aux_gamma(cl_spec, 0.05, x, z) == pytest.approx(gamma(x, z), rel=1e-9, abs=1e-12)


def test_alpha_against_oracle(cl_spec):
    _, alpha = _oracles(0.05, 1.0, 1.0)
    for x in (0.0, 0.5, 1.0, 2.0, 3.0):
        assert aux_alpha(cl_spec, 0.05, x) == pytest.approx(alpha(x), rel=1e-8, abs=1e-11)


def test_alpha_below_barrier_only_vanishes_at_zero(cl_spec):
    # with distinct models α is not identically zero on [0, b]; it starts at 0
    assert aux_alpha(cl_spec, 0.05, 0.0) == pytest.approx(0.0, abs=1e-14)
    assert abs(aux_alpha(cl_spec, 0.05, 0.5)) > 1e-3


def test_gamma_endpoint(cl_spec):
    core = switch_core(cl_spec, 0.05)
    # x = z >= b: W(0) - W̄_{x-b}(0) with an empty integral
    x = 1.5
    assert aux_gamma(cl_spec, 0.05, x, x) == pytest.approx(
        float(core.X.W(0.0)) - float(core.wbar_y(x - 1.0, 0.0)), abs=1e-15)


def test_reduction_zeroes_auxiliaries(same_spec):
    x = np.linspace(0.0, 3.0, 7)
    for q in (0.0, 0.05):
        assert np.max(np.abs(aux_gamma(same_spec, q, x, 0.0))) < 1e-10
        assert np.max(np.abs(aux_gamma(same_spec, q, x, 0.8))) < 1e-10
        assert np.max(np.abs(aux_alpha(same_spec, q, x))) < 1e-10
        assert np.max(np.abs(script_g(same_spec, q, 1.0, x))) < 1e-10
        assert np.max(np.abs(script_a(same_spec, q, 1.0, x))) < 1e-10


def test_alpha_vanishes_linearly_in_ruin_setting(cl_x):
    spec = SwitchSpec.drift_reduced(cl_x, 0.2, 1.0, 1.0)
    x = np.array([0.5, 2.0])
    for q in (1e-3, 1e-4):
        core = switch_core(spec, q)
        # α = -δq ∫_0^x W̄_{x-b}(x-u) W(u) du for Y = X - δt
        ref = np.array([-0.2 * q * float(gl_quad(lambda u: core.wbar_y(xx - 1.0, xx - u) * core.X.W(u),
                                                 0.0, xx, n_panels=8)) for xx in x])
        assert np.allclose(aux_alpha(spec, q, x), ref, rtol=1e-6, atol=1e-14)
    assert np.all(np.abs(aux_alpha(spec, 1e-6, x)) < 1e-5)


def test_script_functions_at_u_equals_x(cl_spec):
    q, core = 0.05, switch_core(cl_spec, 0.05)
    for x, z in ((2.0, 0.0), (2.6, 0.4)):
        assert script_w(cl_spec, q, x, x, z) == pytest.approx(float(core.wbar_y(x - 1.0, x - z)), rel=1e-14)
        assert script_g(cl_spec, q, x, x, z) == pytest.approx(aux_gamma(cl_spec, q, x, z), rel=1e-14)
    assert script_a(cl_spec, q, 2.0, 2.0) == pytest.approx(aux_alpha(cl_spec, q, 2.0), rel=1e-14)


def test_script_functions_small_lambda(cl_x, cl_y):
    spec = SwitchSpec(model_x=cl_x, model_y=cl_y, barrier_b=1.0, lam=1e-9)
    core = switch_core(spec, 0.05)
    x = 2.5
    assert script_w(spec, 0.05, 1.0, x) == pytest.approx(float(core.wbar_y(x - 1.0, x)), abs=1e-7)
    assert script_g(spec, 0.05, 1.0, x) == pytest.approx(aux_gamma(spec, 0.05, x), abs=1e-7)


# -- master functions ----------------------------------------------------------------------

def test_master_below_barrier(cl_spec):
    core = switch_core(cl_spec, 0.05)
    x = np.array([0.0, 0.4, 1.0])
    assert np.allclose(u_master(cl_spec, 0.05, 3.0, x, 0.2), core.X.W(x - 0.2), rtol=1e-15)
    assert np.allclose(v_master(cl_spec, 0.05, 3.0, x), core.X.Z(x), rtol=1e-15)


def test_master_reduction(same_spec):
    x = np.linspace(0.0, 3.0, 13)
    for q in (0.0, 0.05, 0.5):
        t = scale_table(same_spec.model_x, q)
        for y in (0.0, 0.7, 1.9):
            assert np.max(np.abs(u_master(same_spec, q, 3.0, x, y) - t.W(x - y))) < 1e-8
        assert np.max(np.abs(v_master(same_spec, q, 3.0, x) - t.Z(x))) < 1e-8


@pytest.mark.parametrize("spec_name", ["cl_spec", "bm_spec"])
def test_master_one_sided_limits_at_barrier(request, spec_name):
    spec = request.getfixturevalue(spec_name)
    b = spec.barrier_b
    for q in (0.0, 0.5):
        for y in (0.0, 0.4):
            right = [u_master(spec, q, 3.0, b + e, y) for e in (1e-9, 1e-6)]
            left = [u_master(spec, q, 3.0, b - e, y) for e in (1e-9, 1e-6)]
            assert abs(right[0] - right[1]) < 1e-5 and abs(left[0] - left[1]) < 1e-5
            assert abs(left[0] - u_master(spec, q, 3.0, b, y)) < 1e-6
        vr = [v_master(spec, q, 3.0, b + e) for e in (1e-9, 1e-6)]
        assert abs(vr[0] - vr[1]) < 1e-5


@pytest.mark.parametrize("spec_name", ["cl_spec", "bm_spec"])
def test_exit_jumps_at_barrier_with_starting_regime(request, spec_name):
    # U_0 = b starts with X dynamics, U_0 > b with Y, so the exit law jumps at b
    spec = request.getfixturevalue(spec_name)
    b = spec.barrier_b
    sim = SimConfig(n_paths=20_000, seed=17, h_sim=1e-3)
    vals = []
    for x in (b, b + 1e-9):
        query = ExitQuery(x0=x, a=3.0, q=0.0)
        an = exit_up_two_sided(spec, query)
        up, _ = estimate_exit_pair(spec, query, sim)
        assert abs(an - up.mean) < 3 * up.std_error
        vals.append(an)
    assert abs(vals[1] - vals[0]) > 0.05


def test_convolution_identities_for_masters(cl_spec):
    q, a, b, lam = 0.05, 3.0, 1.0, 1.0
    core = switch_core(cl_spec, q)
    for y in (0.0, 0.5, 1.5, 2.2):
        f = lambda z: core.Xl.W(a - z) * core.u_master(a, z, y)
        cuts = sorted({b, min(max(y, b), a), a})
        lhs = lam * mass(f, cuts, n=8)
        assert abs(lhs - (float(core.wbar_x(b - y, a - y)) - float(core.u_master(a, a, y)))) < 1e-6
    lhs = lam * mass(lambda z: core.Xl.W(a - z) * core.v_master(a, z), [b, a], n=8)
    assert abs(lhs - (float(core.zbar_x(b, a)) - float(core.v_master(a, a)))) < 1e-6


# -- two-sided exits ---------------------------------------------------------------------------

# analytic values for the reference pair, b = 1, a = 3, λ = 1 (regression guard)
FROZEN = {
    (0.0, 0.5): (0.5025741461769844, 0.49742585382301574),
    (0.0, 1.5): (0.6394627807010155, 0.3605372192989841),
    (0.0, 2.5): (0.8798209269003379, 0.12017907309966303),
    (0.05, 0.5): (0.437861238656176, 0.47047344595407525),
    (0.05, 1.5): (0.5687803626221263, 0.3365513845346324),
    (0.05, 2.5): (0.8426688466774677, 0.11310699474940034),
}


@pytest.mark.parametrize("key", sorted(FROZEN))
def test_two_sided_regression(cl_spec, key):
    q, x = key
    query = ExitQuery(x0=x, a=3.0, q=q)
    up, down = FROZEN[key]
    assert exit_up_two_sided(cl_spec, query) == pytest.approx(up, rel=1e-9)
    assert exit_down_two_sided(cl_spec, query) == pytest.approx(down, rel=1e-9)


@pytest.mark.parametrize("key", [(0.0, 1.5), (0.05, 0.5)])
def test_two_sided_against_mc(cl_spec, key):
    q, x = key
    up, down = estimate_exit_pair(cl_spec, ExitQuery(x0=x, a=3.0, q=q), SimConfig(n_paths=20_000, seed=11))
    assert abs(up.mean - FROZEN[key][0]) < 3 * up.std_error
    assert abs(down.mean - FROZEN[key][1]) < 3 * down.std_error


def test_exit_at_top(cl_spec, bm_spec):
    for spec in (cl_spec, bm_spec):
        assert exit_up_two_sided(spec, ExitQuery(x0=3.0, a=3.0, q=0.05)) == 1.0
        assert exit_down_two_sided(spec, ExitQuery(x0=3.0, a=3.0, q=0.05)) == pytest.approx(0.0, abs=1e-9)


def test_exit_reduction(same_spec):
    t0 = scale_table(same_spec.model_x, 0.05)
    for x in (0.0, 0.9, 1.7, 2.8):
        query = ExitQuery(x0=x, a=3.0, q=0.05)
        w, wa = float(t0.W(x)), float(t0.W(3.0))
        assert exit_up_two_sided(same_spec, query) == pytest.approx(w / wa, abs=1e-8)
        assert exit_down_two_sided(same_spec, query) == pytest.approx(
            float(t0.Z(x)) - w / wa * float(t0.Z(3.0)), abs=1e-8)


@pytest.mark.parametrize("b", [0.0, 0.5, 1.0, 2.0])
@pytest.mark.parametrize("a", [2.0, 4.0])
def test_probabilities_at_q_zero(cl_x, cl_y, b, a):
    spec = SwitchSpec(model_x=cl_x, model_y=cl_y, barrier_b=b, lam=1.0)
    xs = np.linspace(0.0, a, 9)
    ups = [exit_up_two_sided(spec, ExitQuery(x0=x, a=a, q=0.0)) for x in xs]
    downs = [exit_down_two_sided(spec, ExitQuery(x0=x, a=a, q=0.0)) for x in xs]
    assert all(0.0 <= u <= 1.0 for u in ups) and all(0.0 <= d <= 1.0 for d in downs)
    assert np.allclose(np.add(ups, downs), 1.0, atol=1e-8)
    # monotone on each side of the barrier; the starting regime changes across it
    for side in (xs <= b, xs > b):
        assert np.all(np.diff(np.asarray(ups)[side]) >= -1e-12)
        assert np.all(np.diff(np.asarray(downs)[side]) <= 1e-12)


def test_monotone_in_x_with_discount(bm_spec):
    xs = np.linspace(0.0, 3.0, 9)
    ups = [exit_up_two_sided(bm_spec, ExitQuery(x0=x, a=3.0, q=0.3)) for x in xs]
    downs = [exit_down_two_sided(bm_spec, ExitQuery(x0=x, a=3.0, q=0.3)) for x in xs]
    assert np.all(np.diff(ups) > 0) and np.all(np.diff(downs) < 0)
    assert downs[0] == pytest.approx(1.0, abs=1e-12)  # unbounded variation: immediate exit at 0


def test_zero_barrier_against_mc(cl_x, cl_y):
    spec = SwitchSpec(model_x=cl_x, model_y=cl_y, barrier_b=0.0, lam=1.0)
    query = ExitQuery(x0=1.0, a=2.0, q=0.05)
    up, down = estimate_exit_pair(spec, query, SimConfig(n_paths=20_000, seed=5))
    assert abs(exit_up_two_sided(spec, query) - up.mean) < 3 * up.std_error
    assert abs(exit_down_two_sided(spec, query) - down.mean) < 3 * down.std_error


def test_barrier_at_top_is_pure_x(cl_x, cl_y):
    spec = SwitchSpec(model_x=cl_x, model_y=cl_y, barrier_b=3.0, lam=1.0)
    t = scale_table(cl_x, 0.05)
    assert exit_up_two_sided(spec, ExitQuery(x0=1.2, a=3.0, q=0.05)) == pytest.approx(
        float(t.W(1.2) / t.W(3.0)), rel=1e-12)


# -- one-sided exits ---------------------------------------------------------------------------

def test_up_one_sided_ordering_violation(cl_spec):
    with pytest.raises(AssumptionViolation, match="Phi_q > phi_"):
        exit_up_one_sided(cl_spec, 0.1, 1.5, 3.0)


def test_down_one_sided_ordering_violation():
    spec = SwitchSpec(model_x=BM(5.0, 1.0), model_y=BM(-5.0, 1.0), barrier_b=1.0, lam=0.1)
    with pytest.raises(AssumptionViolation, match="Phi_\\(q\\+lambda\\) > phi_q"):
        exit_down_one_sided(spec, 0.05, 2.0)


def test_one_sided_need_positive_q(cl_spec, up_spec):
    with pytest.raises(DomainError):
        exit_down_one_sided(cl_spec, 0.0, 1.0)
    with pytest.raises(DomainError):
        exit_up_one_sided(up_spec, 0.0, 1.0, 3.0)


def test_up_one_sided_below_barrier_is_classical(bm_spec):
    q = 0.5
    phi = bm_spec.model_x.phi(q)
    assert exit_up_one_sided(bm_spec, q, 0.2, 0.9) == pytest.approx(math.exp(-phi * 0.7), rel=1e-14)


# analytic values for CL(1,1,1) below b = 1, CL(4,1,1) above, λ = 0.2, q = 0.5, a = 3
UP1 = {0.5: 0.139300, 2.0: 0.850785, 2.9: 0.984052}


@pytest.mark.parametrize("x", sorted(UP1))
def test_up_one_sided_values(up_spec, x):
    assert exit_up_one_sided(up_spec, 0.5, x, 3.0) == pytest.approx(UP1[x], abs=5e-7)


def test_up_one_sided_against_mc(up_spec):
    est = estimate_exit_laplace(up_spec, ExitQuery(x0=2.0, a=3.0, q=0.5), SimConfig(n_paths=20_000, seed=3),
                                "up1")
    assert abs(est.mean - UP1[2.0]) < 3 * est.std_error
    assert exit_up_one_sided(up_spec, 0.5, 3.0, 3.0) == 1.0


def test_down_one_sided_reduction(cl_x):
    spec = SwitchSpec(model_x=cl_x, model_y=cl_x, barrier_b=1.0, lam=1.0)
    t = scale_table(cl_x, 0.05)
    for x in (0.0, 1.0, 2.5, 6.0):
        classical = float(t.Z(x)) - 0.05 * float(t.W(x)) / t.phi
        assert exit_down_one_sided(spec, 0.05, x) == pytest.approx(classical, abs=1e-8)


def test_down_one_sided_monotone(cl_spec):
    vals = [exit_down_one_sided(cl_spec, 0.05, x) for x in np.linspace(0.0, 6.0, 13)]
    assert all(0.0 <= v <= 1.0 for v in vals)
    assert np.all(np.diff(vals) < 0)
    assert exit_down_one_sided(cl_spec, 0.05, -1.0) == 1.0


def test_down_one_sided_against_mc(cl_x, cl_y):
    spec = SwitchSpec(model_x=cl_x, model_y=cl_y, barrier_b=1.0, lam=2.0)
    query = ExitQuery(x0=2.0, a=2.0, q=0.05)
    est = estimate_exit_laplace(spec, query, SimConfig(n_paths=20_000, seed=9, t_cap=500.0), "down1")
    assert abs(exit_down_one_sided(spec, 0.05, 2.0) - est.mean) < 3 * est.std_error + est.tail_bound


def test_two_sided_converges_to_one_sided(cl_spec):
    one = exit_down_one_sided(cl_spec, 0.05, 1.5)
    gaps = [exit_down_two_sided(cl_spec, ExitQuery(x0=1.5, a=a, q=0.05)) - one for a in (10.0, 20.0, 40.0)]
    # the two-sided transform increases in a towards its limit
    assert gaps[0] < gaps[1] < gaps[2] <= 1e-12
    assert abs(gaps[2]) < 1e-4


# -- potential measures ------------------------------------------------------------------------

def test_two_sided_potential_reduction(same_spec):
    t = scale_table(same_spec.model_x, 0.05)
    x, a = 1.5, 3.0
    y = np.linspace(0.0, 3.0, 13)
    dens = potential_two_sided(same_spec, ExitQuery(x0=x, a=a, q=0.05), y)
    ref = t.W(x) / t.W(a) * t.W(a - y) - t.W(x - y)
    assert np.allclose(dens, ref, atol=1e-8)


def test_two_sided_potential_support_and_sign(cl_spec):
    query = ExitQuery(x0=1.5, a=3.0, q=0.05)
    y = np.linspace(0.0, 3.0, 31)
    assert np.all(potential_two_sided(cl_spec, query, y) >= -1e-9)
    assert np.all(potential_two_sided(cl_spec, query, np.array([-0.5, 3.5])) == 0.0)


@pytest.mark.parametrize("x", [0.5, 1.5, 2.5])
def test_two_sided_potential_completeness(cl_spec, x):
    q, a = 0.05, 3.0
    query = ExitQuery(x0=x, a=a, q=q)
    total = q * mass(lambda y: potential_two_sided(cl_spec, query, y), sorted({0.0, 1.0, x, a}), n=8)
    total += exit_up_two_sided(cl_spec, query) + exit_down_two_sided(cl_spec, query)
    assert abs(total - 1.0) < 1e-5


def test_killed_below_completeness(bm_spec, cl_spec):
    q, x = 0.5, 1.5
    f = lambda y: potential_killed_below(bm_spec, q, x, y)
    assert abs(q * mass(f, [0, 1, 1.5, 10, 30, 60, 100]) + exit_down_one_sided(bm_spec, q, x) - 1) < 1e-7
    f = lambda y: potential_killed_below(cl_spec, 0.05, x, y)
    total = 0.05 * mass(f, [0, 1, 1.5, 10, 50, 100, 200], n=8) + exit_down_one_sided(cl_spec, 0.05, x)
    assert abs(total - 1) < 1e-7


def test_killed_above_completeness(bm_spec):
    q, a, x = 0.5, 3.0, 1.5
    f = lambda y: potential_killed_above(bm_spec, q, a, x, y)
    assert abs(q * mass(f, [-14, -5, 0, 1, 1.5, 3]) + exit_up_one_sided(bm_spec, q, x, a) - 1) < 1e-7


def test_free_potential_completeness(bm_spec):
    q, x = 0.5, 1.5
    f = lambda y: potential_full(bm_spec, q, x, y)
    assert abs(q * mass(f, [-14, -5, 0, 1, 1.5, 10, 30, 60, 100]) - 1) < 1e-7


def test_potential_cancellation_is_reported(bm_spec):
    with pytest.raises(NumericalError, match="cancellation"):
        potential_full(bm_spec, 0.5, 1.5, -40.0)


def test_potentials_need_ordering_and_positive_q(cl_spec, up_spec):
    with pytest.raises(AssumptionViolation):
        potential_killed_above(cl_spec, 0.05, 3.0, 1.5, 1.0)
    with pytest.raises(AssumptionViolation):
        potential_full(cl_spec, 0.05, 1.5, 1.0)
    for fn, args in ((potential_killed_below, (cl_spec, 0.0, 1.5, 1.0)),
                     (potential_killed_above, (up_spec, 0.0, 3.0, 1.5, 1.0)),
                     (potential_full, (up_spec, 0.0, 1.5, 1.0))):
        with pytest.raises(DomainError):
            fn(*args)


def test_potential_density_bundle(cl_spec, bm_spec):
    d = potential_density(cl_spec, "i", 0.05, 1.5, 3.0)
    assert d.mode == "two-sided" and d.support == (0.0, 3.0)
    assert d(4.0) == 0.0 and d(1.0) > 0
    d = potential_density(bm_spec, "iv", 0.5, 1.5)
    assert d.support == (-math.inf, math.inf) and d(1.0) > 0
    with pytest.raises(DomainError):
        potential_density(cl_spec, "v", 0.05, 1.5, 3.0)


def test_potential_against_mc(cl_spec):
    from levyswitch.simulator import estimate_potential
    query = ExitQuery(x0=1.5, a=3.0, q=0.05)
    bins = np.linspace(0.0, 3.0, 7)
    est = estimate_potential(cl_spec, query, SimConfig(n_paths=20_000, seed=21), bins)
    exact = np.array([mass(lambda y: potential_two_sided(cl_spec, query, y), sorted({lo, hi, 1.0, 1.5} & set(
        np.clip([lo, hi, 1.0, 1.5], lo, hi))), n=4) / (hi - lo) for lo, hi in zip(bins[:-1], bins[1:])])
    assert np.all(np.abs(est.mean - exact) < 3.5 * est.std_error)


# -- observation-driven building blocks -------------------------------------------------------

def test_resolvent_below_against_mc(cl_spec):
    q, a, x = 0.05, 3.0, 0.8
    query = ExitQuery(x0=x, a=a, q=q)
    bins = np.linspace(0.0, 3.0, 7)
    out = run_paths(cl_spec.model_x, cl_spec.model_x, cl_spec.barrier_b, cl_spec.lam, x,
                    SimConfig(n_paths=20_000, seed=31), lower=0.0, upper=a, stop_on_obs="above",
                    q=q, bins=bins)
    dens = out.occupation / np.diff(bins)
    mc, se = dens.mean(axis=0), dens.std(axis=0, ddof=1) / math.sqrt(dens.shape[0])
    exact = np.array([mass(lambda y: resolvent_below_switch(cl_spec, query, y),
                           sorted({lo, hi} | {p for p in (0.8, 1.0) if lo < p < hi}), n=4) / (hi - lo)
                      for lo, hi in zip(bins[:-1], bins[1:])])
    assert np.all(np.abs(mc - exact) < 3.5 * se + 1e-12)


def test_first_observation_blocks_against_mc(cl_spec):
    q, a, x = 0.05, 3.0, 0.8
    query = ExitQuery(x0=x, a=a, q=q)
    out = run_paths(cl_spec.model_x, cl_spec.model_x, cl_spec.barrier_b, cl_spec.lam, x,
                    SimConfig(n_paths=20_000, seed=41), lower=0.0, upper=a, stop_on_obs="above")
    disc = np.exp(-q * out.time)
    _, up_lt = poisson_first_up(cl_spec, query)
    for target, exact in ((EXIT_UP, up_lt), (EXIT_DOWN, occupation_discounted_up(cl_spec, query))):
        v = np.where(out.kind == target, disc, 0.0)
        assert abs(v.mean() - exact) < 3 * v.std(ddof=1) / math.sqrt(v.size)


def test_first_observation_above_completeness(cl_spec):
    query = ExitQuery(x0=0.8, a=3.0, q=0.0)
    density, up_lt = poisson_first_up(cl_spec, query)
    stopped = mass(density, [1.0, 3.0], n=8)
    assert stopped + up_lt + occupation_discounted_up(cl_spec, query) == pytest.approx(1.0, abs=1e-8)
    assert density(0.5) == 0.0


def test_first_observation_below_completeness(cl_spec):
    query = ExitQuery(x0=2.0, a=3.0, q=0.0)
    density, up_lt = poisson_first_down(cl_spec, query)
    stopped = mass(density, [0.0, 1.0], n=8)
    assert stopped + up_lt + occupation_discounted_down(cl_spec, query) == pytest.approx(1.0, abs=1e-8)
    assert density(2.0) == 0.0


def test_first_observation_at_top(cl_spec):
    query = ExitQuery(x0=3.0, a=3.0, q=0.05)
    assert poisson_first_up(cl_spec, query)[1] == pytest.approx(1.0, rel=1e-14)
    assert poisson_first_down(cl_spec, query)[1] == pytest.approx(1.0, rel=1e-14)


# -- ruin ----------------------------------------------------------------------------------------

def classical_ruin(c, eta, rho, x):
    return eta / (c * rho) * np.exp(-(rho - eta / c) * np.asarray(x))


def test_ruin_without_dividends_is_classical(cl_x):
    x = np.array([0.0, 0.5, 1.0, 3.0, 10.0])
    assert ruin_probability(cl_x, 0.0, 1.0, 1.0, 0.0) == pytest.approx(2 / 3, abs=1e-12)
    assert np.allclose(ruin_probability(cl_x, 0.0, 1.0, 1.0, x), classical_ruin(1.5, 1, 1, x), atol=1e-10)


@pytest.mark.parametrize("b,lam", [(0.0, 0.5), (2.0, 3.0), (5.0, 0.1)])
def test_ruin_without_dividends_ignores_switching(cl_x, b, lam):
    x = np.array([0.0, 1.0, 4.0])
    assert np.allclose(ruin_probability(cl_x, 0.0, b, lam, x), classical_ruin(1.5, 1, 1, x), atol=1e-10)


def test_ruin_with_dividends_tail(cl_x):
    x = np.array([0.0, 1.0, 5.0, 10.0, 20.0, 50.0])
    r = ruin_probability(cl_x, 0.2, 1.0, 1.0, x)
    assert np.all(np.diff(r) < 0)
    # the switched surplus sits between X and Y = X - 0.2t
    assert np.all(r[1:] >= classical_ruin(1.5, 1, 1, x[1:]))
    assert np.all(r <= classical_ruin(1.3, 1, 1, x) + 1e-12)
    assert r[-1] < 1e-5


def test_ruin_denominator_identity(cl_x):
    denom, u0 = ruin_denominator_general(cl_x, 0.2, 1.0, 1.0)
    assert denom == pytest.approx(u0, rel=1e-12)


def test_ruin_net_profit_condition(cl_x):
    with pytest.raises(AssumptionViolation, match="net profit"):
        ruin_probability(cl_x, 0.5, 1.0, 1.0, 0.0)


def test_ruin_below_zero(cl_x):
    assert ruin_probability(cl_x, 0.2, 1.0, 1.0, -1.0) == 1.0
