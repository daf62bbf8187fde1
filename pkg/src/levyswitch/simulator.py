"""Pathwise Monte Carlo for the Poisson-switched process.

Paths are advanced in lockstep with numpy.  Every random number is a pure
function of ``(seed, path index, draw counter)`` through a SplitMix64 hash,
so a path's trajectory does not depend on how many other paths are run or
how they are batched.

Cramér-Lundberg segments are exact: between events the path is linear, and
the next event (claim or observation) is an exponential clock, so crossings
of the upper level are solved for and crossings of the lower level can only
happen at claims.  Brownian segments use substeps of ``h_sim``, cut at the
observation epochs, with exact Gaussian increments and an optional bridge
correction for crossings inside a substep.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AssumptionViolation, ConfigError, DomainError
from .levy_model import Family, LevyModelSpec
from .switch_core import ExitQuery, SwitchSpec

CENSORED, EXIT_UP, EXIT_DOWN, STOPPED = 0, 1, 2, 3
_DRAWS_PER_STEP = 4
_BATCH = 50_000

_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_S30, _S27, _S31, _S11 = (np.uint64(k) for k in (30, 27, 31, 11))


def _mix(z: np.ndarray) -> np.ndarray:
    z = z + _GOLDEN
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


class CounterRNG:
    """Stateless uniform stream indexed by (path, counter)."""

    def __init__(self, seed: int) -> None:
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self._seed_key = _mix(np.array([self.seed], dtype=np.uint64))[0]

    def keys(self, paths: np.ndarray) -> np.ndarray:
        return _mix(np.asarray(paths, dtype=np.uint64) ^ self._seed_key)

    def uniform(self, keys: np.ndarray, counter: int) -> np.ndarray:
        """Uniforms in (0, 1), one per key."""
        with np.errstate(over="ignore"):
            z = _mix(keys + np.uint64(counter) * _GOLDEN)
        return ((z >> _S11).astype(np.float64) + 0.5) * (1.0 / 9007199254740992.0)


@dataclass(frozen=True, slots=True, kw_only=True)
class SimConfig:
    """Monte Carlo settings; ``h_sim`` is only used by Brownian segments."""

    n_paths: int = 100_000
    seed: int = 20240531
    t_cap: float = 500.0
    h_sim: float = 1e-2
    bridge_correction: bool = True

    def __post_init__(self) -> None:
        if not (isinstance(self.n_paths, int) and self.n_paths > 0):
            raise ConfigError(f"n_paths must be a positive integer, got {self.n_paths!r}")
        if not (isinstance(self.seed, int) and 0 <= self.seed < 2 ** 64):
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")
        if not (math.isfinite(self.t_cap) and self.t_cap > 0):
            raise ConfigError(f"t_cap must be > 0, got {self.t_cap!r}")
        if not (math.isfinite(self.h_sim) and self.h_sim > 0):
            raise ConfigError(f"h_sim must be > 0, got {self.h_sim!r}")


@dataclass(frozen=True)
class SimEstimate:
    """Sample mean with its standard error.

    ``tail_bound`` bounds the bias from paths still running at ``t_cap``.
    ``mean`` and ``std_error`` are arrays for histogram estimates.
    """

    mean: float | np.ndarray
    std_error: float | np.ndarray
    n_paths: int
    n_censored: int
    seed: int
    tail_bound: float = 0.0


@dataclass
class PathOutcome:
    """Per-path results of one run."""

    kind: np.ndarray
    time: np.ndarray
    level: np.ndarray
    occupation: np.ndarray | None = None
    events: list = field(default_factory=list)


def _require_simulable(*models: LevyModelSpec) -> None:
    for m in models:
        if not m.simulable:
            raise DomainError(f"model {m.label} cannot be simulated")


def _discounted_time(q: float, s0: np.ndarray, s1: np.ndarray) -> np.ndarray:
    """∫_{s0}^{s1} e^{-qs} ds, elementwise."""
    if q == 0.0:
        return s1 - s0
    return np.exp(-q * s0) * -np.expm1(-q * (s1 - s0)) / q


class _Occupation:
    """Accumulates discounted time spent in histogram bins."""

    def __init__(self, edges: np.ndarray, n: int, q: float) -> None:
        self.edges = np.asarray(edges, dtype=float)
        self.q = q
        self.acc = np.zeros((n, self.edges.size - 1))

    def linear(self, idx, u0, slope, t0, dt):
        lo_e, hi_e = self.edges[:-1], self.edges[1:]
        u0c, t0c, dtc = u0[:, None], t0[:, None], dt[:, None]
        s_lo = np.clip((lo_e - u0c) / slope[:, None], 0.0, dtc)
        s_hi = np.clip((hi_e - u0c) / slope[:, None], 0.0, dtc)
        self.acc[idx] += _discounted_time(self.q, t0c + s_lo, t0c + s_hi)

    def midpoint(self, idx, level, t0, dt):
        k = np.searchsorted(self.edges, level, side="right") - 1
        ok = (k >= 0) & (k < self.acc.shape[1])
        w = _discounted_time(self.q, t0, t0 + dt)
        np.add.at(self.acc, (idx[ok], k[ok]), w[ok])


def _step_cl(model, lam, t, u, U, lower, upper, t_cap, occ, idx):
    c, eta, rho = model.params
    rate = eta + lam
    dt = -np.log(U[0]) / rate
    cens = t + dt > t_cap
    dt = np.where(cens, t_cap - t, dt)
    code = np.zeros(t.shape, np.int8)
    if upper is not None:
        hit = u + c * dt > upper
        dt = np.where(hit, np.maximum(upper - u, 0.0) / c, dt)
    else:
        hit = np.zeros(t.shape, bool)
    if occ is not None:
        occ.linear(idx, u, np.full(u.shape, c), t, dt)
    u_new = np.where(hit, upper if upper is not None else 0.0, u + c * dt)
    t_new = t + dt
    code[hit] = EXIT_UP
    live = ~hit & ~cens
    obs = live & (U[1] < lam / rate)
    jump = live & ~obs
    u_new = np.where(jump, u_new + np.log(U[2]) / rho, u_new)
    if lower is not None:
        code[jump & (u_new < lower)] = EXIT_DOWN
    code[cens & ~hit] = -1
    return t_new, u_new, code, obs


def _step_bm(model, lam, t, u, U, lower, upper, t_cap, occ, idx, h, bridge):
    mu, sigma = model.params
    dt_obs = -np.log(U[0]) / lam
    obs = dt_obs <= h
    dt = np.where(obs, dt_obs, h)
    cens = t + dt > t_cap
    dt = np.where(cens, t_cap - t, dt)
    obs &= ~cens
    z = np.sqrt(-2.0 * np.log(U[1])) * np.cos(2.0 * np.pi * U[2])
    u1 = u + mu * dt + sigma * np.sqrt(dt) * z
    code = np.zeros(t.shape, np.int8)
    up = (u1 > upper) if upper is not None else np.zeros(t.shape, bool)
    dn = (u1 < lower) & ~up if lower is not None else np.zeros(t.shape, bool)
    if bridge:
        s2dt = sigma * sigma * np.maximum(dt, 1e-300)
        p_up = np.zeros(t.shape)
        p_dn = np.zeros(t.shape)
        inside = ~up & ~dn
        if upper is not None:
            p_up = np.where(inside, np.exp(-2.0 * (upper - u) * (upper - u1) / s2dt), 0.0)
        if lower is not None:
            p_dn = np.where(inside, np.exp(-2.0 * (u - lower) * (u1 - lower) / s2dt), 0.0)
        up |= inside & (U[3] < p_up)
        dn |= inside & ~up & (U[3] < p_up + p_dn)
    if occ is not None:
        occ.midpoint(idx, 0.5 * (u + u1), t, dt)
    t_new = t + dt
    u_new = np.where(up, upper if upper is not None else u1, np.where(dn, lower if lower is not None else u1, u1))
    code[up] = EXIT_UP
    code[dn] = EXIT_DOWN
    obs &= ~up & ~dn
    code[cens & ~up & ~dn] = -1
    return t_new, u_new, code, obs


def run_paths(model_below: LevyModelSpec, model_above: LevyModelSpec, b: float, lam: float,
              x0: float, sim: SimConfig, *, lower: float | None = 0.0, upper: float | None = None,
              stop_on_obs: str | None = None, q: float = 0.0, bins: np.ndarray | None = None,
              first_path: int = 0, n_paths: int | None = None, log_events: bool = False) -> PathOutcome:
    """Simulate paths of the switched process.

    Parameters
    ----------
    model_below, model_above : LevyModelSpec
        Dynamics after an observation at or below ``b`` and above ``b``.
    lower, upper : float or None
        Absorbing levels; None removes a level.
    stop_on_obs : {None, "above", "below"}
        Also stop a path at the first observation epoch where the level is
        at or above ``b`` (``"above"``) or below ``b`` (``"below"``).
    q : float
        Discount rate for the occupation histogram.
    bins : ndarray, optional
        Histogram edges for the discounted occupation measure.
    """
    _require_simulable(model_below, model_above)
    if not lam > 0:
        raise DomainError("lambda must be > 0")
    if stop_on_obs not in (None, "above", "below"):
        raise DomainError(f"unknown stop rule {stop_on_obs!r}")
    n = sim.n_paths if n_paths is None else int(n_paths)
    rng = CounterRNG(sim.seed)
    kind = np.zeros(n, np.int8)
    time = np.zeros(n)
    level = np.zeros(n)
    occ_all = None if bins is None else np.zeros((n, len(bins) - 1))
    events: list = []
    models = (model_below, model_above)
    for start in range(0, n, _BATCH):
        stop = min(n, start + _BATCH)
        m = stop - start
        keys = rng.keys(np.arange(first_path + start, first_path + stop))
        t = np.zeros(m)
        u = np.full(m, float(x0))
        reg = np.full(m, x0 > b)
        occ = None if bins is None else _Occupation(bins, m, q)
        active = np.arange(m)
        it = 0
        while active.size:
            U = [rng.uniform(keys[active], it * _DRAWS_PER_STEP + j) for j in range(_DRAWS_PER_STEP)]
            t_a, u_a = t[active], u[active]
            t_new = np.empty_like(t_a)
            u_new = np.empty_like(u_a)
            code = np.empty(active.size, np.int8)
            obs = np.empty(active.size, bool)
            for r in (False, True):
                sel = np.flatnonzero(reg[active] == r)
                if sel.size == 0:
                    continue
                model = models[int(r)]
                Us = [v[sel] for v in U]
                if model.family is Family.CRAMER_LUNDBERG_EXP:
                    res = _step_cl(model, lam, t_a[sel], u_a[sel], Us, lower, upper, sim.t_cap,
                                   occ, active[sel])
                else:
                    res = _step_bm(model, lam, t_a[sel], u_a[sel], Us, lower, upper, sim.t_cap,
                                   occ, active[sel], sim.h_sim, sim.bridge_correction)
                t_new[sel], u_new[sel], code[sel], obs[sel] = res
            t[active], u[active] = t_new, u_new
            if obs.any():
                oi = active[obs]
                above = u[oi] > b
                reg[oi] = above
                if log_events:
                    events.extend((int(first_path + start + i), float(t[i]), float(u[i]), "obs")
                                  for i in oi)
                if stop_on_obs == "above":
                    code[obs] = np.where(u[oi] >= b, STOPPED, code[obs])
                elif stop_on_obs == "below":
                    code[obs] = np.where(u[oi] < b, STOPPED, code[obs])
            done = code != 0
            if done.any():
                di = active[done]
                kind[start + di] = np.where(code[done] < 0, CENSORED, code[done])
                time[start + di] = t[di]
                level[start + di] = u[di]
                if log_events:
                    events.extend((int(first_path + start + i), float(t[i]), float(u[i]), "end")
                                  for i in di)
                active = active[~done]
            it += 1
        if occ is not None:
            occ_all[start:stop] = occ.acc
    return PathOutcome(kind, time, level, occ_all, events)


def simulate_path(spec: SwitchSpec, x0: float, sim: SimConfig, path_id: int = 0, *,
                  lower: float | None = 0.0, upper: float | None = None) -> PathOutcome:
    """One path with its observation and exit events logged."""
    return run_paths(spec.model_x, spec.model_y, spec.barrier_b, spec.lam, x0, sim, lower=lower,
                     upper=upper, first_path=path_id, n_paths=1, log_events=True)


def _summary(values: np.ndarray, out: PathOutcome, sim: SimConfig, tail: float = 0.0) -> SimEstimate:
    n = values.shape[0]
    mean = values.mean(axis=0)
    se = values.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.zeros_like(mean)
    if np.ndim(mean) == 0:
        mean, se = float(mean), float(se)
    return SimEstimate(mean, se, n, int(np.sum(out.kind == CENSORED)), sim.seed, float(tail))


_LEVELS = {"up2": (0.0, True), "down2": (0.0, True), "up1": (None, True), "down1": (0.0, False)}


def estimate_exit_laplace(spec: SwitchSpec, query: ExitQuery, sim: SimConfig, which: str) -> SimEstimate:
    """MC estimate of an exit Laplace transform.

    ``which`` is ``up2``/``down2`` (two-sided, levels 0 and a), ``up1`` (no
    lower level) or ``down1`` (no upper level).
    """
    if which not in _LEVELS:
        raise DomainError(f"unknown exit functional {which!r}")
    query.check(spec)
    lower, has_upper = _LEVELS[which]
    out = run_paths(spec.model_x, spec.model_y, spec.barrier_b, spec.lam, query.x0, sim,
                    lower=lower, upper=query.a if has_upper else None)
    target = EXIT_UP if which.startswith("up") else EXIT_DOWN
    vals = np.where(out.kind == target, np.exp(-query.q * out.time), 0.0)
    cens = out.kind == CENSORED
    tail = float(np.mean(cens)) * math.exp(-query.q * sim.t_cap)
    return _summary(vals, out, sim, tail)


def estimate_exit_pair(spec: SwitchSpec, query: ExitQuery, sim: SimConfig) -> tuple[SimEstimate, SimEstimate]:
    """Two-sided up and down transforms from a single set of paths."""
    query.check(spec)
    out = run_paths(spec.model_x, spec.model_y, spec.barrier_b, spec.lam, query.x0, sim,
                    lower=0.0, upper=query.a)
    disc = np.exp(-query.q * out.time)
    tail = float(np.mean(out.kind == CENSORED)) * math.exp(-query.q * sim.t_cap)
    up = _summary(np.where(out.kind == EXIT_UP, disc, 0.0), out, sim, tail)
    down = _summary(np.where(out.kind == EXIT_DOWN, disc, 0.0), out, sim, tail)
    return up, down


def estimate_potential(spec: SwitchSpec, query: ExitQuery, sim: SimConfig, bins,
                       mode: str = "two-sided") -> SimEstimate:
    """Discounted occupation density per histogram bin.

    ``mode`` selects the killing: ``two-sided`` (0 and a), ``below-only``
    (0), ``above-only`` (a) or ``none``.
    """
    bins = np.asarray(bins, dtype=float)
    levels = {"two-sided": (0.0, query.a), "below-only": (0.0, None),
              "above-only": (None, query.a), "none": (None, None)}
    if mode not in levels:
        raise DomainError(f"unknown potential mode {mode!r}")
    lower, upper = levels[mode]
    out = run_paths(spec.model_x, spec.model_y, spec.barrier_b, spec.lam, query.x0, sim,
                    lower=lower, upper=upper, q=query.q, bins=bins)
    dens = out.occupation / np.diff(bins)
    tail = float(np.mean(out.kind == CENSORED)) * (
        math.exp(-query.q * sim.t_cap) / query.q if query.q > 0 else math.inf)
    return _summary(dens, out, sim, tail)


def estimate_ruin(model_x: LevyModelSpec, delta: float, b: float, lam: float, x0: float,
                  sim: SimConfig) -> SimEstimate:
    """MC ruin probability with dividends δ paid above the barrier.

    Paths alive at ``t_cap`` are counted as not ruined.  Their possible later
    ruin is bounded by the classical ruin probability of ``Y = X - δt`` from
    the level reached, since the switched surplus always dominates ``Y``
    after ``t_cap``; the average bound is returned as ``tail_bound``.
    """
    from .scale_fn import scale_table

    drift = model_x.psi_prime_zero()
    if not (0 <= delta < drift):
        raise AssumptionViolation(
            f"net profit condition psi'(0+) > delta fails: psi'(0+)={drift:.6g}, delta={delta:.6g}")
    spec = SwitchSpec.drift_reduced(model_x, delta, b, lam)
    out = run_paths(spec.model_x, spec.model_y, b, lam, x0, sim, lower=0.0, upper=None)
    vals = (out.kind == EXIT_DOWN).astype(float)
    cens = out.kind == CENSORED
    tail = 0.0
    if cens.any():
        y_table = scale_table(spec.model_y, 0.0)
        ruin_y = 1.0 - (drift - delta) * y_table.W(out.level[cens])
        tail = float(np.sum(np.clip(ruin_y, 0.0, 1.0))) / out.kind.size
    return _summary(vals, out, sim, tail)
