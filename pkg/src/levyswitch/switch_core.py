"""Fluctuation identities for the Poisson-switched process U.

U follows model X while its level at the last Poisson observation was at or
below ``b`` and model Y otherwise.  Notation follows the usual conventions:
``W, Z`` are the scale functions of X, ``𝕎, ℤ`` those of Y, ``Φ`` and ``φ``
the right inverses of their Laplace exponents, and a bar marks a second
generation scale function.

Every function here is vectorized over its spatial arguments.  Evaluations
are chunked so that the nested quadratures stay within a bounded memory
footprint.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from .errors import AssumptionViolation, ConfigError, DomainError, NumericalError
from .levy_model import LevyModelSpec
from .numerics import DEFAULT_QUAD, QuadConfig, gl_quad, tail_cutoff
from .scale_fn import second_gen_w, second_gen_z, scale_table

_CHUNK = 256


def _batched(fn: Callable, *args, chunk: int = _CHUNK) -> np.ndarray:
    """Apply a 1-D kernel to broadcast arguments in bounded chunks."""
    arrs = np.broadcast_arrays(*[np.asarray(a, dtype=float) for a in args])
    shape = arrs[0].shape
    flat = [a.ravel() for a in arrs]
    n = flat[0].size
    out = np.empty(n)
    for s in range(0, n, chunk):
        out[s:s + chunk] = fn(*[f[s:s + chunk] for f in flat])
    return out.reshape(shape)


def _scalar(v):
    v = np.asarray(v)
    return float(v) if v.ndim == 0 else v


@dataclass(frozen=True, slots=True, kw_only=True)
class SwitchSpec:
    """Model pair, barrier and observation rate.

    ``model_x`` drives U while the last observed level was ``<= barrier_b``,
    ``model_y`` once it was above.  Observations arrive at rate ``lam``.
    """

    model_x: LevyModelSpec
    model_y: LevyModelSpec
    barrier_b: float
    lam: float

    def __post_init__(self) -> None:
        b, lam = self.barrier_b, self.lam
        if not (isinstance(b, (int, float)) and math.isfinite(b) and b >= 0):
            raise ConfigError(f"barrier_b must be finite and >= 0, got {b!r}")
        if not (isinstance(lam, (int, float)) and math.isfinite(lam) and lam > 0):
            raise ConfigError(f"lambda must be finite and > 0, got {lam!r}")

    @classmethod
    def drift_reduced(cls, model_x: LevyModelSpec, delta: float, barrier_b: float,
                      lam: float) -> "SwitchSpec":
        """Pair with ``Y_t = X_t - δt`` (dividends paid at rate δ above the barrier)."""
        if delta < 0:
            raise DomainError(f"delta must be >= 0, got {delta}")
        return cls(model_x=model_x, model_y=model_x.shifted(delta), barrier_b=float(barrier_b),
                   lam=float(lam))


@dataclass(frozen=True, slots=True, kw_only=True)
class ExitQuery:
    """Start level ``x0``, upper level ``a`` and discount rate ``q``."""

    x0: float
    a: float
    q: float

    def check(self, spec: SwitchSpec) -> None:
        if not (math.isfinite(self.q) and self.q >= 0):
            raise DomainError(f"q must be >= 0, got {self.q}")
        if not (math.isfinite(self.a) and self.a > 0):
            raise DomainError(f"a must be > 0, got {self.a}")
        if spec.barrier_b > self.a:
            raise DomainError(f"need b <= a, got b={spec.barrier_b}, a={self.a}")
        if not (0.0 <= self.x0 <= self.a):
            raise DomainError(f"need 0 <= x0 <= a, got x0={self.x0}, a={self.a}")


@dataclass(frozen=True)
class PotentialDensity:
    """Density of a discounted occupation measure of U started at ``x0``.

    ``mode`` is one of ``two-sided``, ``below-only`` (killed on going below
    0), ``above-only`` (killed on going above ``a``) and ``none``.
    """

    mode: str
    x0: float
    a: float
    q: float
    support: tuple[float, float]
    density_fn: Callable = field(repr=False)
    tol: float = 1e-9

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        lo, hi = self.support
        inside = (y >= lo) & (y <= hi)
        out = np.zeros(y.shape)
        if np.any(inside):
            vals = np.asarray(self.density_fn(y[inside]), dtype=float)
            vals = np.where((vals < 0) & (vals >= -self.tol), 0.0, vals)
            out[inside] = vals
        return _scalar(out)


class SwitchCore:
    """Scale-function machinery for one ``(spec, q)``.

    Holds the four tables W^{(q)}, W^{(q+λ)} (model X) and 𝕎^{(q)},
    𝕎^{(q+λ)} (model Y) and evaluates the auxiliary functions built on them.
    """

    def __init__(self, spec: SwitchSpec, q: float, cfg: QuadConfig = DEFAULT_QUAD) -> None:
        q = float(q)
        if not (math.isfinite(q) and q >= 0):
            raise DomainError(f"q must be >= 0, got {q}")
        self.spec, self.q, self.cfg = spec, q, cfg
        self.b, self.lam = float(spec.barrier_b), float(spec.lam)
        self.X = scale_table(spec.model_x, q, cfg)
        self.Xl = scale_table(spec.model_x, q + self.lam, cfg)
        self.Y = scale_table(spec.model_y, q, cfg)
        self.Yl = scale_table(spec.model_y, q + self.lam, cfg)
        self.Phi_q, self.Phi_ql = self.X.phi, self.Xl.phi
        self.phi_q, self.phi_ql = self.Y.phi, self.Yl.phi
        self._memo: dict = {}

    # -- second generation functions --------------------------------------
    def wbar_x(self, u, x):
        """W̄_u^{(q,λ)}(x) of model X."""
        return np.asarray(second_gen_w(self.X, self.Xl, u, x))

    def wbar_y(self, u, x):
        """𝕎̄_u^{(q,λ)}(x) of model Y."""
        return np.asarray(second_gen_w(self.Y, self.Yl, u, x))

    def zbar_x(self, u, x):
        """Z̄_u^{(q,λ)}(x) of model X."""
        return np.asarray(second_gen_z(self.X, self.Xl, u, x))

    def zbar_y_neg(self, u, x):
        """ℤ̄_u^{(q+λ,-λ)}(x) of model Y."""
        return np.asarray(second_gen_z(self.Yl, self.Y, u, x))

    def _two_piece(self, f, lo, mid, hi):
        return gl_quad(f, lo, mid, self.cfg) + gl_quad(f, mid, hi, self.cfg)

    # -- γ, α ---------------------------------------------------------------
    def _gamma_flat(self, x, z):
        b = self.b
        s0 = x - z
        base = self.X.W(s0) - self.wbar_y(x - b, s0)
        upper = np.maximum(b - z, 0.0)
        # for x <= b the inner 𝕎^{(q+λ)} has its kink at v = x - z
        mid = np.where(x <= b, np.clip(s0, 0.0, upper), upper)
        u_col, s_col = (x - b)[:, None], s0[:, None]
        f = lambda v: self.wbar_y(u_col, s_col - v) * self.X.W(v)
        return base + self.lam * self._two_piece(f, 0.0, mid, upper)

    def gamma(self, x, z=0.0):
        """γ_b^{(q,λ)}(x; z)."""
        return _scalar(_batched(self._gamma_flat, x, z))

    def _alpha_flat(self, x):
        b = self.b
        base = self.X.Z(x) - self.zbar_y_neg(b, x)
        mid = np.where(x <= b, np.clip(x, 0.0, b), b)
        u_col, x_col = (x - b)[:, None], x[:, None]
        f = lambda y: self.wbar_y(u_col, x_col - y) * self.X.Z(y)
        return base + self.lam * self._two_piece(f, 0.0, mid, np.full(x.shape, b))

    def alpha(self, x):
        """α_b^{(q,λ)}(x)."""
        return _scalar(_batched(self._alpha_flat, x))

    # -- convolution wrappers 𝒲, 𝒢, 𝒜 ---------------------------------------
    def _conv_xl(self, inner, u, x, z):
        """λ ∫_u^x W^{(q+λ)}(x-y) inner(y, z) dy, split at y = z."""
        mid = np.clip(z, np.minimum(u, x), np.maximum(u, x))
        x_col, z_col = x[:, None], z[:, None]
        f = lambda y: self.Xl.W(x_col - y) * inner(y, z_col)
        return self.lam * self._two_piece(f, u, mid, x)

    def _script_w_flat(self, u, x, z):
        b = self.b
        inner = lambda y, zz: self.wbar_y(y - b, y - zz)
        return self.wbar_y(x - b, x - z) + self._conv_xl(inner, u, x, z)

    def script_w(self, u, x, z=0.0):
        """𝒲_u^{(q,λ)}(x; z)."""
        return _scalar(_batched(self._script_w_flat, u, x, z))

    def _script_g_flat(self, u, x, z):
        return self._gamma_flat(x, z) + self._conv_xl(lambda y, zz: self.gamma(y, zz), u, x, z)

    def script_g(self, u, x, z=0.0):
        """𝒢_u^{(q,λ)}(x; z)."""
        return _scalar(_batched(self._script_g_flat, u, x, z))

    def _script_a_flat(self, u, x):
        zero = np.zeros(x.shape)
        return self._alpha_flat(x) + self._conv_xl(lambda y, zz: self.alpha(y), u, x, zero)

    def script_a(self, u, x):
        """𝒜_u^{(q,λ)}(x)."""
        return _scalar(_batched(self._script_a_flat, u, x))

    # -- two-sided master functions ----------------------------------------
    def _w_b_a(self, a: float) -> float:
        key = ("Wba", a)
        if key not in self._memo:
            v = float(self.script_w(self.b, a, 0.0))
            if not (math.isfinite(v) and v > 0):
                raise NumericalError(f"degenerate normalizer W_b(a) = {v} at a={a}")
            self._memo[key] = v
        return self._memo[key]

    def u_master(self, a: float, x, y=0.0):
        """𝒰_{b,a}^{(q,λ)}(x; y)."""
        a = float(a)
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        out = np.array(self.X.W(x - y), dtype=float)
        m = x > self.b
        if np.any(m):
            xm, ym = x[m], y[m]
            ratio = self.wbar_y(xm - self.b, xm) / self._w_b_a(a)
            out[m] -= self.gamma(xm, ym) - ratio * self.script_g(self.b, a, ym)
        return _scalar(out)

    def v_master(self, a: float, x):
        """𝒱_{b,a}^{(q,λ)}(x)."""
        a = float(a)
        x = np.asarray(x, dtype=float)
        out = np.array(self.X.Z(x), dtype=float)
        m = x > self.b
        if np.any(m):
            xm = x[m]
            key = ("Aba", a)
            if key not in self._memo:
                self._memo[key] = float(self.script_a(self.b, a))
            ratio = self.wbar_y(xm - self.b, xm) / self._w_b_a(a)
            out[m] -= self.alpha(xm) - ratio * self._memo[key]
        return _scalar(out)

    # -- ordering conditions -----------------------------------------------
    def require_down_ordering(self) -> None:
        """Φ_{q+λ} > φ_q, needed once the upper level is removed."""
        if not self.Phi_ql > self.phi_q:
            raise AssumptionViolation(
                f"the condition Phi_(q+lambda) > phi_q fails: Phi_(q+lambda)={self.Phi_ql:.6g}, "
                f"phi_q={self.phi_q:.6g}")

    def require_up_ordering(self) -> None:
        """Φ_q > φ_{q+λ}, needed once the lower level is removed."""
        if not self.Phi_q > self.phi_ql:
            raise AssumptionViolation(
                f"the condition Phi_q > phi_(q+lambda) fails: Phi_q={self.Phi_q:.6g}, "
                f"phi_(q+lambda)={self.phi_ql:.6g}")

    # -- improper integrals -------------------------------------------------
    def _improper(self, f_batch: Callable, lo, rate: float, extra_mid=None) -> np.ndarray:
        """∫_lo^∞ f_batch(u) du for a batch, f_batch(u) of shape (n, K).

        ``extra_mid`` optionally splits each integral at a kink.
        """
        lo = np.asarray(lo, dtype=float)
        lo0 = float(np.min(lo))
        upper, _, _ = tail_cutoff(lambda u: f_batch(np.broadcast_to(u, lo.shape + u.shape[-1:])),
                                  lo0, rate, self.cfg)
        upper = max(upper, float(np.max(lo)))
        hi = np.full(lo.shape, upper)
        mid = lo if extra_mid is None else np.clip(extra_mid, lo, hi)
        return gl_quad(f_batch, lo, mid, self.cfg) + gl_quad(f_batch, mid, hi, self.cfg)

    def _rate_up(self) -> float:
        return self.Phi_ql - max(self.Phi_q, self.phi_q)

    def tail_w(self) -> float:
        """∫_b^∞ e^{-Φ_{q+λ}u} 𝕎̄_{u-b}(u) du."""
        if "IW" not in self._memo:
            self.require_down_ordering()
            b, P = self.b, self.Phi_ql
            f = lambda u: np.exp(-P * u) * self.wbar_y(u - b, u)
            self._memo["IW"] = float(self._improper(f, np.array([b]), self._rate_up())[0])
        return self._memo["IW"]

    def tail_gamma(self, y):
        """∫_b^∞ e^{-Φ_{q+λ}u} γ(u; y) du."""
        self.require_down_ordering()
        b, P = self.b, self.Phi_ql

        def kernel(yy):
            y_col = yy[:, None]
            f = lambda u: np.exp(-P * u) * self.gamma(u, y_col)
            return self._improper(f, np.full(yy.shape, b), self._rate_up(), extra_mid=yy)

        return _scalar(_batched(kernel, y, chunk=8))

    def tail_alpha(self) -> float:
        """∫_b^∞ e^{-Φ_{q+λ}u} α(u) du."""
        if "IA" not in self._memo:
            self.require_down_ordering()
            b, P = self.b, self.Phi_ql
            f = lambda u: np.exp(-P * u) * self.alpha(u)
            self._memo["IA"] = float(self._improper(f, np.array([b]), self._rate_up())[0])
        return self._memo["IA"]

    # -- limits as a → ∞ ----------------------------------------------------
    def u_up(self, x, y=0.0):
        """𝒰_b^{(q,λ)↑}(x; y), the a → ∞ limit of 𝒰_{b,a}(x; y)."""
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        out = np.array(self.X.W(x - y), dtype=float)
        m = x > self.b
        if np.any(m):
            xm, ym = x[m], y[m]
            ratio = np.asarray(self.tail_gamma(ym)) / self.tail_w()
            out[m] -= self.gamma(xm, ym) - self.wbar_y(xm - self.b, xm) * ratio
        return _scalar(out)

    def v_up(self, x):
        """𝒱_b^{(q,λ)↑}(x)."""
        x = np.asarray(x, dtype=float)
        out = np.array(self.X.Z(x), dtype=float)
        m = x > self.b
        if np.any(m):
            xm = x[m]
            ratio = self.tail_alpha() / self.tail_w()
            out[m] -= self.alpha(xm) - self.wbar_y(xm - self.b, xm) * ratio
        return _scalar(out)

    def _zl_phi_conv_w(self, y):
        """ℤ^{(q+λ)}(b-y, φ_q) - λ ∫_0^{b-y} ℤ^{(q+λ)}(b-y-u, φ_q) W^{(q)}(u) du."""
        b, ph = self.b, self.phi_q
        s = b - np.asarray(y, dtype=float)
        head = self.Yl.Z_theta(s, ph)
        sp = np.maximum(s, 0.0)
        s_col = sp[..., None]
        conv = gl_quad(lambda u: self.Yl.Z_theta(s_col - u, ph) * self.X.W(u), 0.0, sp, self.cfg)
        return head - self.lam * conv

    def u_up_y(self, y):
        """𝒰_b^{(q,λ)↑}(y), the normalized a → ∞ limit of 𝒰_{b,a}(a; y)."""
        y = np.asarray(y, dtype=float)
        zb = float(self.Yl.Z_theta(self.b, self.phi_q))
        out = _batched(self._zl_phi_conv_w, y) + zb * np.asarray(self.tail_gamma(y)) / self.tail_w()
        return _scalar(out)

    def v_up_const(self) -> float:
        """𝒱_b^{(q,λ)↑}, the normalized a → ∞ limit of 𝒱_{b,a}(a)."""
        if "Vup" in self._memo:
            return self._memo["Vup"]
        if self.q <= 0:
            raise DomainError("the one-sided downward limit needs q > 0")
        b, ph, lam = self.b, self.phi_q, self.lam
        first = gl_quad(lambda y: np.exp(-ph * y) * self.Yl.Z(y), 0.0, b, self.cfg)
        second = gl_quad(lambda u: self.Yl.Z_theta(b - u, ph) * self.X.Z(u), 0.0, b, self.cfg)
        zb = float(self.Yl.Z_theta(b, ph))
        val = (math.exp(ph * b) * (self.q / ph + lam * float(first)) - lam * float(second)
               + zb * self.tail_alpha() / self.tail_w())
        self._memo["Vup"] = val
        return val

    # -- limits as the lower level → -∞ --------------------------------------
    def _gamma_down_flat(self, x):
        b, P = self.b, self.Phi_q
        u = x - b
        u_col = u[:, None]
        f = lambda v: np.exp(P * (b - v)) * self.wbar_y(u_col, u_col + v)
        rate = self.Phi_q - self.phi_ql
        return np.exp(P * x) + self.lam * self._improper(f, np.zeros(x.shape), rate)

    def gamma_down(self, x):
        """γ_b^{(q,λ)↓}(x), defined for x >= b."""
        self.require_up_ordering()
        return _scalar(_batched(self._gamma_down_flat, x, chunk=32))

    def _z_tilt(self, x):
        """ℤ^{(q)}(x; φ_{q+λ})."""
        return self.Y.Z_theta(x, self.phi_ql)

    def _down_denominator(self, a: float) -> float:
        key = ("Ddown", a)
        if key not in self._memo:
            b = self.b
            conv = gl_quad(lambda u: self.Xl.W(a - u) * self._z_tilt(u - b), b, a, self.cfg)
            self._memo[key] = float(self._z_tilt(a - b)) + self.lam * float(conv)
        return self._memo[key]

    def _down_numerator(self, a: float) -> float:
        key = ("Ndown", a)
        if key not in self._memo:
            b = self.b
            conv = gl_quad(lambda u: self.Xl.W(a - u) * self.gamma_down(u), b, a, self.cfg)
            self._memo[key] = float(self.gamma_down(a)) + self.lam * float(conv)
        return self._memo[key]

    def u_down(self, a: float, x):
        """𝒰_{b,a}^{(q,λ)↓}(x), the lower-level-free analogue of 𝒰_{b,a}(x)."""
        a = float(a)
        shape = np.shape(x)
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.exp(self.Phi_q * x)
        m = x > self.b
        if np.any(m):
            self.require_up_ordering()
            xm = x[m]
            ratio = self._down_numerator(a) / self._down_denominator(a)
            out[m] -= self.gamma_down(xm) - self._z_tilt(xm - self.b) * ratio
        return _scalar(out.reshape(shape))

    def u_down_y(self, a: float, x, y):
        """𝒰_{b,a}^{(q,λ)↓}(x; y)."""
        a = float(a)
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        out = np.array(self.X.W(x - y), dtype=float)
        m = x > self.b
        if np.any(m):
            self.require_up_ordering()
            xm, ym = x[m], y[m]
            ratio = np.asarray(self.script_g(self.b, a, ym)) / self._down_denominator(a)
            out[m] -= self.gamma(xm, ym) - self._z_tilt(xm - self.b) * ratio
        return _scalar(out)

    # -- limits with both levels removed -------------------------------------
    def tail_z_tilt(self) -> float:
        """∫_b^∞ e^{-Φ_{q+λ}u} ℤ^{(q)}(u-b; φ_{q+λ}) du."""
        if "IZ" not in self._memo:
            b, P = self.b, self.Phi_ql
            f = lambda u: np.exp(-P * u) * self._z_tilt(u - b)
            self._memo["IZ"] = float(self._improper(f, np.array([b]), self._rate_up())[0])
        return self._memo["IZ"]

    def tail_gamma_down(self) -> float:
        """∫_b^∞ e^{-Φ_{q+λ}u} γ^{↓}(u) du."""
        if "IGd" not in self._memo:
            b, P = self.b, self.Phi_ql
            f = lambda u: np.exp(-P * u) * self.gamma_down(u)
            self._memo["IGd"] = float(self._improper(f, np.array([b]), self.Phi_ql - self.Phi_q)[0])
        return self._memo["IGd"]

    def u_bar(self, x, y):
        """Ū_b^{(q,λ)}(x; y)."""
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        out = np.array(self.X.W(x - y), dtype=float)
        m = x > self.b
        if np.any(m):
            xm, ym = x[m], y[m]
            ratio = np.asarray(self.tail_gamma(ym)) / self.tail_z_tilt()
            out[m] -= self.gamma(xm, ym) - self._z_tilt(xm - self.b) * ratio
        return _scalar(out)

    def u_bar_x(self, x):
        """Ū_b^{(q,λ)}(x)."""
        shape = np.shape(x)
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.exp(self.Phi_q * x)
        m = x > self.b
        if np.any(m):
            xm = x[m]
            ratio = self.tail_gamma_down() / self.tail_z_tilt()
            out[m] -= self.gamma_down(xm) - self._z_tilt(xm - self.b) * ratio
        return _scalar(out.reshape(shape))

    def u_tilde_y(self, y):
        """Ũ_b^{(q,λ)}(y)."""
        y = np.asarray(y, dtype=float)
        c = self.lam / (self.phi_ql - self.phi_q)
        out = _batched(self._zl_phi_conv_w, y) + c * np.asarray(self.tail_gamma(y)) / self.tail_z_tilt()
        return _scalar(out)

    def u_tilde(self) -> float:
        """Ũ_b^{(q,λ)}.  The exponential weight is e^{+Φ_q(b-u)}, which keeps the a -> inf limit finite."""
        if "Ut" not in self._memo:
            b, P, ph = self.b, self.Phi_q, self.phi_q
            f = lambda u: np.exp(P * (b - u)) * self.Yl.Z_theta(u, ph)
            integral = float(self._improper(f, np.array([0.0]), self.Phi_q - self.phi_ql)[0])
            c = self.lam / (self.phi_ql - self.phi_q)
            self._memo["Ut"] = -self.lam * integral + c * self.tail_gamma_down() / self.tail_z_tilt()
        return self._memo["Ut"]


@lru_cache(maxsize=64)
def switch_core(spec: SwitchSpec, q: float, cfg: QuadConfig = DEFAULT_QUAD) -> SwitchCore:
    """Cached :class:`SwitchCore` for ``(spec, q, cfg)``."""
    return SwitchCore(spec, float(q), cfg)


# ---------------------------------------------------------------------------
# functional interface
# ---------------------------------------------------------------------------

def aux_gamma(spec: SwitchSpec, q: float, x, z=0.0, cfg: QuadConfig = DEFAULT_QUAD):
    return switch_core(spec, q, cfg).gamma(x, z)


def aux_alpha(spec: SwitchSpec, q: float, x, cfg: QuadConfig = DEFAULT_QUAD):
    return switch_core(spec, q, cfg).alpha(x)


def script_w(spec: SwitchSpec, q: float, u, x, z=0.0, cfg: QuadConfig = DEFAULT_QUAD):
    return switch_core(spec, q, cfg).script_w(u, x, z)


def script_g(spec: SwitchSpec, q: float, u, x, z=0.0, cfg: QuadConfig = DEFAULT_QUAD):
    return switch_core(spec, q, cfg).script_g(u, x, z)


def script_a(spec: SwitchSpec, q: float, u, x, cfg: QuadConfig = DEFAULT_QUAD):
    return switch_core(spec, q, cfg).script_a(u, x)


def u_master(spec: SwitchSpec, q: float, a: float, x, y=0.0, cfg: QuadConfig = DEFAULT_QUAD):
    _check_levels(spec, a, x)
    return switch_core(spec, q, cfg).u_master(a, x, y)


def v_master(spec: SwitchSpec, q: float, a: float, x, cfg: QuadConfig = DEFAULT_QUAD):
    _check_levels(spec, a, x)
    return switch_core(spec, q, cfg).v_master(a, x)


def _check_levels(spec: SwitchSpec, a: float, x) -> None:
    if not (math.isfinite(a) and a > 0):
        raise DomainError(f"a must be > 0, got {a}")
    if spec.barrier_b > a:
        raise DomainError(f"need b <= a, got b={spec.barrier_b}, a={a}")
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(x > a):
        raise DomainError("need 0 <= x <= a")


def _clip_probability(v, tol: float = 1e-7):
    v = np.asarray(v, dtype=float)
    if np.any(v < -tol) or np.any(v > 1 + tol) or not np.all(np.isfinite(v)):
        raise NumericalError(f"exit transform outside [0, 1]: {v}")
    return _scalar(v)


def exit_up_two_sided(spec: SwitchSpec, query: ExitQuery, cfg: QuadConfig = DEFAULT_QUAD) -> float:
    """E_x[e^{-qτ_a^+}; τ_a^+ < τ_0^-] = 𝒰_{b,a}(x)/𝒰_{b,a}(a)."""
    query.check(spec)
    if query.x0 == query.a:
        return 1.0
    core = switch_core(spec, query.q, cfg)
    num, den = core.u_master(query.a, np.array([query.x0, query.a]))
    return _clip_probability(num / den)


def exit_down_two_sided(spec: SwitchSpec, query: ExitQuery, cfg: QuadConfig = DEFAULT_QUAD) -> float:
    """E_x[e^{-qτ_0^-}; τ_0^- < τ_a^+] = 𝒱(x) - 𝒰(x)/𝒰(a)·𝒱(a)."""
    query.check(spec)
    core = switch_core(spec, query.q, cfg)
    pts = np.array([query.x0, query.a])
    ux, ua = core.u_master(query.a, pts)
    vx, va = core.v_master(query.a, pts)
    return _clip_probability(vx - ux / ua * va)


def exit_up_one_sided(spec: SwitchSpec, q: float, x: float, a: float,
                      cfg: QuadConfig = DEFAULT_QUAD) -> float:
    """E_x[e^{-qτ_a^+}; τ_a^+ < ∞] with no lower level.

    Needs q > 0 and, when ``a > b``, the ordering Φ_q > φ_{q+λ}.  For
    ``a <= b`` the process never leaves the X regime before τ_a^+ and the
    answer is the classical e^{-Φ_q(a-x)}.
    """
    if not q > 0:
        raise DomainError("the one-sided upward identity needs q > 0")
    if not (math.isfinite(a) and x <= a):
        raise DomainError(f"need x <= a, got x={x}, a={a}")
    core = switch_core(spec, q, cfg)
    if a <= spec.barrier_b:
        return math.exp(-core.Phi_q * (a - x))
    core.require_up_ordering()
    if x == a:
        return 1.0
    num, den = core.u_down(a, np.array([x, a]))
    return _clip_probability(num / den)


def exit_down_one_sided(spec: SwitchSpec, q: float, x: float, cfg: QuadConfig = DEFAULT_QUAD) -> float:
    """E_x[e^{-qτ_0^-}; τ_0^- < ∞] with no upper level; needs q > 0 and Φ_{q+λ} > φ_q."""
    if not q > 0:
        raise DomainError("the one-sided downward identity needs q > 0")
    if x < 0:
        return 1.0
    core = switch_core(spec, q, cfg)
    core.require_down_ordering()
    val = core.v_up(x) - core.v_up_const() / core.u_up_y(0.0) * core.u_up(x, 0.0)
    return _clip_probability(val)


# -- potential measures ------------------------------------------------------

def potential_two_sided(spec: SwitchSpec, query: ExitQuery, y, cfg: QuadConfig = DEFAULT_QUAD):
    """Density of E_x ∫_0^{τ_a^+ ∧ τ_0^-} e^{-qt} 1{U_t ∈ dy} dt on [0, a]."""
    query.check(spec)
    core = switch_core(spec, query.q, cfg)
    a, x = query.a, query.x0
    y = np.asarray(y, dtype=float)
    ua0, ux0 = core.u_master(a, np.array([a, x]))
    dens = core.u_master(a, a, y) / ua0 * ux0 - core.u_master(a, x, y)
    return _scalar(np.where((y >= 0) & (y <= a), dens, 0.0))


def _check_cancellation(t1, t2, y, cfg: QuadConfig) -> None:
    # far below the start both terms grow like e^{Φ_q|y|} while their difference decays
    err = 64.0 * np.finfo(float).eps * (np.abs(t1) + np.abs(t2))
    bad = np.asarray(err > 1e3 * cfg.quad_tol)
    if np.any(bad):
        worst = float(np.max(np.asarray(y, dtype=float)[bad] if np.ndim(y) else y))
        raise NumericalError(
            f"potential density at y={worst:.4g} is lost to cancellation (terms of size "
            f"{float(np.max(np.abs(t1))):.3g}); evaluate closer to the starting point")


def potential_killed_below(spec: SwitchSpec, q: float, x: float, y, cfg: QuadConfig = DEFAULT_QUAD):
    """Density of E_x ∫_0^{τ_0^-} e^{-qt} 1{U_t ∈ dy} dt on [0, ∞)."""
    if not q > 0:
        raise DomainError("the killed-below potential needs q > 0")
    core = switch_core(spec, q, cfg)
    core.require_down_ordering()
    y = np.asarray(y, dtype=float)
    ys = np.maximum(y, 0.0)
    dens = core.u_up_y(ys) / core.u_up_y(0.0) * core.u_up(x, 0.0) - core.u_up(x, ys)
    return _scalar(np.where(y >= 0, dens, 0.0))


def potential_killed_above(spec: SwitchSpec, q: float, a: float, x: float, y,
                           cfg: QuadConfig = DEFAULT_QUAD):
    """Density of E_x ∫_0^{τ_a^+} e^{-qt} 1{U_t ∈ dy} dt on (-∞, a]."""
    if not q > 0:
        raise DomainError("the killed-above potential needs q > 0")
    if spec.barrier_b > a or x > a:
        raise DomainError("need b <= a and x <= a")
    core = switch_core(spec, q, cfg)
    core.require_up_ordering()
    y = np.asarray(y, dtype=float)
    ys = np.minimum(y, a)
    ux, ua = core.u_down(a, np.array([x, a]))
    t1, t2 = ux / ua * core.u_down_y(a, a, ys), core.u_down_y(a, x, ys)
    _check_cancellation(t1, t2, y, cfg)
    return _scalar(np.where(y <= a, t1 - t2, 0.0))


def potential_full(spec: SwitchSpec, q: float, x: float, y, cfg: QuadConfig = DEFAULT_QUAD):
    """Density of E_x ∫_0^∞ e^{-qt} 1{U_t ∈ dy} dt on ℝ."""
    if not q > 0:
        raise DomainError("the free potential needs q > 0")
    core = switch_core(spec, q, cfg)
    core.require_up_ordering()
    core.require_down_ordering()
    y = np.asarray(y, dtype=float)
    t1, t2 = core.u_tilde_y(y) / core.u_tilde() * core.u_bar_x(x), core.u_bar(x, y)
    _check_cancellation(t1, t2, y, cfg)
    return _scalar(t1 - t2)


def potential_density(spec: SwitchSpec, mode: str, q: float, x: float, a: float | None = None,
                      cfg: QuadConfig = DEFAULT_QUAD) -> PotentialDensity:
    """Bundle one of the four potential densities with its support."""
    if mode in ("i", "two-sided"):
        query = ExitQuery(x0=x, a=a, q=q)
        fn = lambda y: potential_two_sided(spec, query, y, cfg)
        return PotentialDensity("two-sided", x, a, q, (0.0, a), fn, cfg.quad_tol)
    if mode in ("ii", "below-only"):
        fn = lambda y: potential_killed_below(spec, q, x, y, cfg)
        return PotentialDensity("below-only", x, math.inf, q, (0.0, math.inf), fn, cfg.quad_tol)
    if mode in ("iii", "above-only"):
        fn = lambda y: potential_killed_above(spec, q, a, x, y, cfg)
        return PotentialDensity("above-only", x, a, q, (-math.inf, a), fn, cfg.quad_tol)
    if mode in ("iv", "none"):
        fn = lambda y: potential_full(spec, q, x, y, cfg)
        return PotentialDensity("none", x, math.inf, q, (-math.inf, math.inf), fn, cfg.quad_tol)
    raise DomainError(f"unknown potential mode {mode!r}")


# -- observation-driven building blocks ---------------------------------------

def resolvent_below_switch(spec: SwitchSpec, query: ExitQuery, y, cfg: QuadConfig = DEFAULT_QUAD):
    """Density of E_x ∫ e^{-qt} 1{X_t ∈ dy, t < T_b^+ ∧ τ_a^+ ∧ τ_0^-} dt (model X alone)."""
    query.check(spec)
    core = switch_core(spec, query.q, cfg)
    b, a, x = core.b, query.a, query.x0
    y = np.asarray(y, dtype=float)
    wx, wa = core.wbar_x(b, np.array([x, a]))
    dens = wx / wa * core.wbar_x(b - y, a - y) - core.wbar_x(b - y, x - y)
    return _scalar(np.where((y >= 0) & (y <= a), dens, 0.0))


def resolvent_above_switch(spec: SwitchSpec, query: ExitQuery, y, cfg: QuadConfig = DEFAULT_QUAD):
    """Density of E_x ∫ e^{-qt} 1{Y_t ∈ dy, t < T_b^- ∧ τ_a^+ ∧ τ_0^-} dt (model Y alone)."""
    query.check(spec)
    core = switch_core(spec, query.q, cfg)
    b, a, x = core.b, query.a, query.x0
    y = np.asarray(y, dtype=float)
    wx = float(core.wbar_y(x - b, x))
    wa = float(core.wbar_y(a - b, a))
    dens = wx / wa * core.wbar_y(a - b, a - y) - core.wbar_y(x - b, x - y)
    return _scalar(np.where((y >= 0) & (y <= a), dens, 0.0))


def poisson_first_up(spec: SwitchSpec, query: ExitQuery, cfg: QuadConfig = DEFAULT_QUAD):
    """Model X: density of e^{-qT_b^+} on {X_{T_b^+} ∈ dy} over [b, a], and E_x[e^{-qτ_a^+}; τ_a^+ < T_b^+ ∧ τ_0^-]."""
    query.check(spec)
    core = switch_core(spec, query.q, cfg)
    b, a, x, lam = core.b, query.a, query.x0, core.lam
    wx, wa = core.wbar_x(b, np.array([x, a]))
    ratio = float(wx / wa)

    def density(y):
        y = np.asarray(y, dtype=float)
        d = lam * (ratio * core.Xl.W(a - y) - core.Xl.W(x - y))
        return _scalar(np.where((y >= b) & (y <= a), d, 0.0))

    return density, ratio


def poisson_first_down(spec: SwitchSpec, query: ExitQuery, cfg: QuadConfig = DEFAULT_QUAD):
    """Model Y: density of e^{-qT_b^-} on {Y_{T_b^-} ∈ dy} over [0, b], and E_x[e^{-qτ_a^+}; τ_a^+ < T_b^- ∧ τ_0^-]."""
    query.check(spec)
    core = switch_core(spec, query.q, cfg)
    b, a, x, lam = core.b, query.a, query.x0, core.lam
    ratio = float(core.wbar_y(x - b, x)) / float(core.wbar_y(a - b, a))

    def density(y):
        y = np.asarray(y, dtype=float)
        d = lam * (ratio * core.wbar_y(a - b, a - y) - core.wbar_y(x - b, x - y))
        return _scalar(np.where((y >= 0) & (y <= b), d, 0.0))

    return density, ratio


def occupation_discounted_down(spec: SwitchSpec, query: ExitQuery, cfg: QuadConfig = DEFAULT_QUAD) -> float:
    """Model Y: E_x[e^{-qτ_0^-}; τ_0^- < T_b^- ∧ τ_a^+]."""
    query.check(spec)
    core = switch_core(spec, query.q, cfg)
    b, a, x = core.b, query.a, query.x0
    ratio = float(core.wbar_y(x - b, x)) / float(core.wbar_y(a - b, a))
    zx, za = core.zbar_y_neg(b, np.array([x, a]))
    return _clip_probability(zx - ratio * za)


def occupation_discounted_up(spec: SwitchSpec, query: ExitQuery, cfg: QuadConfig = DEFAULT_QUAD) -> float:
    """Model X: E_x[e^{-qτ_0^-}; τ_0^- < T_b^+ ∧ τ_a^+]."""
    query.check(spec)
    core = switch_core(spec, query.q, cfg)
    b, a, x = core.b, query.a, query.x0
    wx, wa = core.wbar_x(b, np.array([x, a]))
    zx, za = core.zbar_x(b, np.array([x, a]))
    return _clip_probability(zx - wx / wa * za)


# -- ruin ---------------------------------------------------------------------

def ruin_probability(model_x: LevyModelSpec, delta: float, b: float, lam: float, x,
                     cfg: QuadConfig = DEFAULT_QUAD):
    """P_x(τ_0^- < ∞) when dividends at rate δ are switched on and off at Poisson epochs.

    Above the barrier (as last observed) the surplus is ``X_t - δt``.
    Requires the net profit condition ``δ < E[X_1]``.
    """
    drift = model_x.psi_prime_zero()
    if not (0 <= delta < drift):
        raise AssumptionViolation(
            f"net profit condition psi'(0+) > delta fails: psi'(0+)={drift:.6g}, delta={delta:.6g}")
    spec = SwitchSpec.drift_reduced(model_x, delta, b, lam)
    core = switch_core(spec, 0.0, cfg)
    x = np.asarray(x, dtype=float)
    conv = float(gl_quad(lambda y: core.Yl.W(b - y) * core.X.W(y), 0.0, b, cfg))
    denom = 1.0 + delta * lam * conv + float(core.Yl.Z(b)) * float(core.tail_gamma(0.0)) / core.tail_w()
    val = 1.0 - (drift - delta) * np.asarray(core.u_up(np.maximum(x, 0.0), 0.0)) / denom
    val = np.where(x < 0, 1.0, val)
    return _clip_probability(val)


def ruin_denominator_general(model_x: LevyModelSpec, delta: float, b: float, lam: float,
                             cfg: QuadConfig = DEFAULT_QUAD) -> tuple[float, float]:
    """The ruin denominator and 𝒰^{(0,λ)↑}(0), which must coincide."""
    spec = SwitchSpec.drift_reduced(model_x, delta, b, lam)
    core = switch_core(spec, 0.0, cfg)
    conv = float(gl_quad(lambda y: core.Yl.W(b - y) * core.X.W(y), 0.0, b, cfg))
    denom = 1.0 + delta * lam * conv + float(core.Yl.Z(b)) * float(core.tail_gamma(0.0)) / core.tail_w()
    return denom, float(core.u_up_y(0.0))
