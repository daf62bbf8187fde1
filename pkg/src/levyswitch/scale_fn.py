"""q-scale functions W^{(q)}, Z^{(q)}, Z^{(q)}(x, θ) and their second generation.

For the two built-in families ψ_q is rational, so 1/ψ_q splits into two
simple fractions with poles at Φ_q and at the other (non-positive) root of
the numerator.  This gives

    CL:  W(x) = e^{r1 x} (1 + (ρ + r2)(1 - e^{-(r1-r2) x})/(r1 - r2)) / c
    BM:  W(x) = 2/σ² · e^{r1 x} (1 - e^{-(r1-r2) x})/(r1 - r2)

written with ``expm1`` so the coalescing-root limit is exact and nothing
overflows before W itself does.  Z, Z(x, θ) and the second-generation
convolutions follow in closed form from the same two exponentials.  Custom
models are inverted numerically with the fixed Talbot contour and
interpolated on a grid by a monotone cubic.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import DomainError, ScaleBuildError
from .levy_model import Family, LevyModelSpec, phi_inverse
from .numerics import DEFAULT_QUAD, QuadConfig, gl_quad, tail_cutoff

# Talbot contour size; beyond ~30 double precision is exhausted
TALBOT_M = 24
# Z(x, θ) switches to the tail form once (θ - Φ_q) x exceeds this
_TILT_SWITCH = 8.0
# below this root gap the exponential split of W loses too many digits
_SPLIT_GAP = 1e-3


def _expm1_ratio(d, x: np.ndarray) -> np.ndarray:
    """(e^{dx} - 1)/d, equal to x at d = 0."""
    if np.ndim(d) == 0:
        if d == 0.0:
            return np.array(x, dtype=float, copy=True)
        return np.expm1(d * x) / d
    d, x = np.broadcast_arrays(d, x)
    out = np.array(x, dtype=float, copy=True)
    nz = d != 0.0
    out[nz] = np.expm1(d[nz] * x[nz]) / d[nz]
    return out


def _decay_ratio(d: float, x: np.ndarray) -> np.ndarray:
    """(1 - e^{-dx})/d for d >= 0, so e^{r2 x}(e^{dx} - 1)/d = e^{r1 x}·this without overflow."""
    if d == 0.0:
        return np.array(x, dtype=float, copy=True)
    return -np.expm1(-d * x) / d


def _exp_conv(terms_k, terms_f, lo, hi, outer=None):
    """∫_lo^hi K(s-y) F(y) dy with s = ``outer`` (default ``hi``).

    K and F are exponential sums given as ``(coefficient, rate)`` pairs.
    """
    s = hi if outer is None else outer
    t = hi - lo
    total = np.zeros(np.broadcast(lo, hi, s).shape)
    for bk, sk in terms_k:
        for cf, rf in terms_f:
            total = total + bk * cf * np.exp(sk * (s - lo) + rf * lo) * _expm1_ratio(rf - sk, t)
    return total


def _quadratic_roots(a: float, b: float, c: float) -> tuple[float, float, float]:
    """Roots r1 >= r2 of aθ² + bθ + c with c <= 0 < a, plus r1 - r2."""
    disc = b * b - 4.0 * a * c
    sq = math.sqrt(max(disc, 0.0))
    t = -0.5 * (b + math.copysign(sq, b)) if b != 0.0 else 0.5 * sq
    if t == 0.0:
        return 0.0, 0.0, 0.0
    ra, rb = t / a, c / t
    return max(ra, rb), min(ra, rb), sq / a


def fixed_talbot(F, t: np.ndarray, shift: float = 0.0, M: int = TALBOT_M) -> np.ndarray:
    """Inverse Laplace transform of ``F`` at times ``t > 0`` (Abate-Valkó contour).

    ``shift`` moves every singularity of ``F`` left of the origin before the
    contour is applied; the result is multiplied back by ``e^{shift·t}``.
    """
    t = np.asarray(t, dtype=float)
    r = 2.0 * M / (5.0 * t)
    theta = np.pi * np.arange(1, M) / M
    cot = 1.0 / np.tan(theta)
    s = r[..., None] * theta * (cot + 1j)
    sigma = theta + (theta * cot - 1.0) * cot
    head = 0.5 * np.exp(r * t) * np.real(F(r + shift))
    body = np.real(np.exp(t[..., None] * s) * F(s + shift) * (1.0 + 1j * sigma)).sum(axis=-1)
    return np.exp(shift * t) * (r / M) * (head + body)


class ScaleFunctionTable:
    """The q-scale functions of one model at one killing rate.

    Parameters
    ----------
    model : LevyModelSpec
    q : float
        Killing rate, non-negative.
    cfg : QuadConfig
    x_max : float
        Extent of the cached grid.  Built-in families evaluate their closed
        form everywhere and use the grid only for checks and dumps.

    Attributes
    ----------
    phi : float
        Φ_q, the right inverse of ψ at q.
    w_at_zero : float
        W^{(q)}(0+): 1/d for bounded variation with drift d, 0 otherwise.
    grid, grid_w : ndarray
        The cached grid and W values on it.
    """

    def __init__(self, model: LevyModelSpec, q: float, cfg: QuadConfig = DEFAULT_QUAD,
                 x_max: float = 20.0) -> None:
        q = float(q)
        if not (math.isfinite(q) and q >= 0):
            raise DomainError(f"scale functions need q >= 0, got {q}")
        self.model = model
        self.q = q
        self.cfg = cfg
        self.phi = phi_inverse(model, q, cfg.root_tol)
        self._closed = model.family is not Family.CUSTOM
        if self._closed:
            self._init_closed_form()
        else:
            drift = model.drift_coefficient()
            self.w_at_zero = 1.0 / drift if model.bounded_variation else 0.0
        n = int(round(x_max / cfg.h))
        self.grid = np.linspace(0.0, n * cfg.h, n + 1)
        if self._closed:
            self.grid_w = self._w_closed(self.grid)
        else:
            vals = np.empty_like(self.grid)
            vals[0] = self.w_at_zero
            vals[1:] = self._w_talbot(self.grid[1:])
            self.grid_w = vals
        self._check_grid()
        if not self._closed:
            self._pchip = PchipInterpolator(self.grid, self.grid_w, extrapolate=False)
        self.laplace_residuals = self._check_laplace()

    # -- construction ------------------------------------------------------
    def _init_closed_form(self) -> None:
        fam, p, q = self.model.family, self.model.params, self.q
        if fam is Family.CRAMER_LUNDBERG_EXP:
            c, eta, rho = p
            r1, r2, d = _quadratic_roots(c, c * rho - eta - q, -q * rho)
            self._coef = (1.0 / c, (rho + r2) / c)
            self.w_at_zero = 1.0 / c
        else:
            mu, sigma = p
            r1, r2, d = _quadratic_roots(0.5 * sigma * sigma, mu, -q)
            self._coef = (0.0, 2.0 / (sigma * sigma))
            self.w_at_zero = 0.0
        if abs(r1 - self.phi) > 1e-9 * max(1.0, abs(self.phi)):
            raise ScaleBuildError(
                f"partial-fraction root {r1!r} disagrees with the right inverse {self.phi!r}")
        self.roots = (r1, r2)
        self._gap = d

    def _w_closed(self, x: np.ndarray) -> np.ndarray:
        r1, r2 = self.roots
        a, b = self._coef
        return np.exp(r1 * x) * (a + b * _decay_ratio(self._gap, x))

    def _w_tilted(self, x: np.ndarray, theta: float) -> np.ndarray:
        """e^{-θx} W^{(q)}(x) for x >= 0, without overflow in W itself."""
        if not self._closed:
            return np.exp(-theta * x) * self.W(x)
        r1, _ = self.roots
        a, b = self._coef
        return np.exp((r1 - theta) * x) * (a + b * _decay_ratio(self._gap, x))

    def exp_terms(self, kind: str):
        """W or Z as a list of ``(coefficient, rate)`` pairs, or None.

        Only available for the closed-form families, and only when the two
        roots are far enough apart for the split to be well conditioned.
        """
        if not self._closed or self._gap < _SPLIT_GAP:
            return None
        r1, r2 = self.roots
        a, b = self._coef
        d = self._gap
        if kind == "W":
            return ((a + b / d, r1), (-b / d, r2))
        if kind == "Z":
            k0 = self._tilt_factor(0.0)
            return ((-k0 * r2 * (a + b / d), r1), (k0 * b * (1.0 + r2 / d), r2))
        raise DomainError(f"unknown kind {kind!r}")

    def _tilt_factor(self, theta: float) -> float:
        """K(θ) with ψ_q(θ) = K(θ)(θ - r1)(θ - r2)."""
        p = self.model.params
        if self.model.family is Family.CRAMER_LUNDBERG_EXP:
            return p[0] / (p[2] + theta)
        return 0.5 * p[1] * p[1]

    def _z_theta_closed(self, x: np.ndarray, theta: float) -> np.ndarray:
        # ψ_q(θ) e^{θx} ∫_x^∞ e^{-θz} W(z) dz, continued analytically to all θ >= 0
        r1, r2 = self.roots
        a, b = self._coef
        e = _decay_ratio(self._gap, x)
        inner = (theta - r2) * np.exp(r1 * x) * (a + b * e) + b * np.exp(r2 * x)
        return self._tilt_factor(theta) * inner

    def _w_talbot(self, x: np.ndarray) -> np.ndarray:
        model, q = self.model, self.q
        return fixed_talbot(lambda s: 1.0 / (model.psi(s) - q), x, shift=self.phi)

    def _check_grid(self) -> None:
        w = self.grid_w
        if not np.all(np.isfinite(w)):
            raise ScaleBuildError(f"non-finite W^{{(q)}} on the grid for {self.model.label}")
        scale = np.maximum(np.abs(w[1:]), 1.0)
        slack = 1e-7 * scale
        if np.any(w < -slack[0]) or np.any(np.diff(w) < -slack):
            raise ScaleBuildError(f"W^{{(q)}} is not nonnegative and nondecreasing for {self.model.label}")

    def _check_laplace(self) -> tuple[float, float, float]:
        res = []
        for dt in (0.5, 1.0, 2.0):
            theta = self.phi + dt
            lt = self.laplace_transform(theta)
            exact = 1.0 / float(np.real(self.model.psi(theta)) - self.q)
            res.append(abs(lt - exact))
            if abs(lt - exact) > 1e-6 * max(1.0, abs(exact)):
                raise ScaleBuildError(
                    f"Laplace check failed for {self.model.label}, q={self.q}: "
                    f"theta={theta:.6g}, numeric {lt:.12g} vs exact {exact:.12g}")
        return tuple(res)

    # -- evaluation --------------------------------------------------------
    def psi_q(self, theta):
        return np.real(self.model.psi(theta)) - self.q

    def W(self, x) -> np.ndarray:
        """W^{(q)}(x); zero for x < 0, right-continuous at 0."""
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        pos = x >= 0
        if self._closed:
            out[pos] = self._w_closed(x[pos])
        else:
            xp = x[pos]
            vals = np.empty(xp.shape)
            inside = xp <= self.grid[-1]
            vals[inside] = self._pchip(xp[inside])
            if np.any(~inside):
                vals[~inside] = self._w_talbot(xp[~inside])
            out[pos] = vals
        return out

    def Z(self, x) -> np.ndarray:
        """Z^{(q)}(x) = 1 + q ∫_0^x W^{(q)}; equal to 1 for x <= 0."""
        x = np.asarray(x, dtype=float)
        if self.q == 0.0:
            return np.ones(x.shape)
        xp = np.maximum(x, 0.0)
        if self._closed:
            return self._z_theta_closed(xp, 0.0)
        return 1.0 + self.q * gl_quad(self.W, 0.0, xp, self.cfg)

    def W_integral(self, x) -> np.ndarray:
        """∫_0^x W^{(q)}(y) dy."""
        xp = np.maximum(np.asarray(x, dtype=float), 0.0)
        return gl_quad(self.W, 0.0, xp, self.cfg)

    def Z_theta(self, x, theta: float) -> np.ndarray:
        """Z^{(q)}(x, θ) = e^{θx}(1 - ψ_q(θ) ∫_0^x e^{-θy} W^{(q)}(y) dy)."""
        theta = float(theta)
        if not theta >= 0:
            raise DomainError(f"Z(x, theta) needs theta >= 0, got {theta}")
        x = np.asarray(x, dtype=float)
        shape = x.shape
        x = x.ravel()
        out = np.exp(theta * np.minimum(x, 0.0))
        pos = x > 0
        if not np.any(pos):
            return out.reshape(shape)
        xp = x[pos]
        if self._closed:
            out[pos] = self._z_theta_closed(xp, theta)
            return out.reshape(shape)
        pq = float(self.psi_q(theta))
        gap = theta - self.phi
        tail = (gap * xp > _TILT_SWITCH) if gap > 0 else np.zeros(xp.shape, bool)
        vals = np.empty(xp.shape)
        if np.any(~tail):
            xd = xp[~tail]
            inner = gl_quad(lambda y: np.exp(-theta * y) * self.W(y), 0.0, xd, self.cfg)
            vals[~tail] = np.exp(theta * xd) * (1.0 - pq * inner)
        if np.any(tail):
            xt = xp[tail]
            f = lambda t: np.exp(-theta * t) * self.W(xt[:, None] + t) / np.exp(self.phi * xt[:, None])
            hi, _, _ = tail_cutoff(f, 0.0, gap, self.cfg)
            integral = gl_quad(lambda t: np.exp(-theta * t) * self.W(xt[..., None] + t), 0.0,
                               np.full(xt.shape, hi), self.cfg)
            vals[tail] = pq * integral
        out[pos] = vals
        return out.reshape(shape)

    def laplace_transform(self, theta: float) -> float:
        """∫_0^∞ e^{-θx} W^{(q)}(x) dx for θ > Φ_q, by truncated quadrature."""
        gap = float(theta) - self.phi
        if gap <= 0:
            raise DomainError(f"Laplace transform of W needs theta > Phi_q={self.phi}")
        f = lambda x: self._w_tilted(x, theta)
        # separated roots give a bounded factor after tilting; otherwise leave room for growth
        rate = gap if self._closed and self._gap >= _SPLIT_GAP else 0.5 * gap
        hi, _, _ = tail_cutoff(f, 0.0, rate, self.cfg)
        return float(gl_quad(f, 0.0, hi, self.cfg))

    def dump(self, x_max: float, step: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Grid of (x, W, Z) for plotting."""
        n = int(round(x_max / step))
        x = np.linspace(0.0, n * step, n + 1)
        return x, self.W(x), self.Z(x)


@lru_cache(maxsize=256)
def scale_table(model: LevyModelSpec, q: float, cfg: QuadConfig = DEFAULT_QUAD) -> ScaleFunctionTable:
    """Cached table for ``(model, q, cfg)``."""
    return ScaleFunctionTable(model, float(q), cfg)


def w_eval(table: ScaleFunctionTable, x):
    out = table.W(x)
    return out if out.ndim else float(out)


def z_eval(table: ScaleFunctionTable, x):
    out = table.Z(x)
    return out if out.ndim else float(out)


def z_bivariate(table: ScaleFunctionTable, x, theta: float):
    out = table.Z_theta(x, theta)
    return out if out.ndim else float(out)


def _pair(base: ScaleFunctionTable, shifted: ScaleFunctionTable) -> float:
    if base.model != shifted.model:
        raise DomainError("second generation functions need two tables of the same model")
    return shifted.q - base.q


def _second_gen(base_fn, shifted_W, base_eval_shifted, kappa, u, x, cfg, representation,
                closed=None):
    u, x = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(x, dtype=float))
    out = np.zeros(x.shape)
    low = u <= 0
    high = (u >= x) & ~low
    mid = ~low & ~high
    out[low] = base_eval_shifted(x[low])
    out[high] = base_fn(x[high])
    if kappa == 0.0 or not np.any(mid):
        if np.any(mid):
            out[mid] = base_fn(x[mid])
        return out
    um, xm = u[mid], x[mid]
    if representation == "auto":
        # the form whose correction carries a positive sign never cancels
        first = np.full(um.shape, kappa < 0)
        if closed is not None:
            if kappa < 0:
                conv = _exp_conv(closed[0], closed[1], np.zeros(um.shape), um, outer=xm)
                out[mid] = base_eval_shifted(xm) - kappa * conv
            else:
                out[mid] = base_fn(xm) + kappa * _exp_conv(closed[0], closed[1], um, xm)
            return out
    elif representation == "first":
        first = np.ones(um.shape, bool)
    elif representation == "second":
        first = np.zeros(um.shape, bool)
    else:
        raise DomainError(f"unknown representation {representation!r}")
    vals = np.empty(um.shape)
    if np.any(first):
        uf, xf = um[first], xm[first]
        conv = gl_quad(lambda y: shifted_W(xf[..., None] - y) * base_fn(y), 0.0, uf, cfg)
        vals[first] = base_eval_shifted(xf) - kappa * conv
    if np.any(~first):
        us, xs = um[~first], xm[~first]
        conv = gl_quad(lambda y: shifted_W(xs[..., None] - y) * base_fn(y), us, xs, cfg)
        vals[~first] = base_fn(xs) + kappa * conv
    out[mid] = vals
    return out


def _closed_pair(shifted: ScaleFunctionTable, base: ScaleFunctionTable, kind: str):
    k, f = shifted.exp_terms("W"), base.exp_terms(kind)
    return None if k is None or f is None else (k, f)


def second_gen_w(base: ScaleFunctionTable, shifted: ScaleFunctionTable, u, x,
                 representation: str = "auto"):
    """W̄_u^{(p,κ)}(x) with p = base.q and κ = shifted.q - base.q.

    ``W̄_u(x) = W^{(p+κ)}(x) - κ ∫_0^u W^{(p+κ)}(x-y) W^{(p)}(y) dy``
    ``       = W^{(p)}(x) + κ ∫_u^x W^{(p+κ)}(x-y) W^{(p)}(y) dy``.

    κ may be negative.  ``representation`` picks the first form or the second,
    each by quadrature.  ``"auto"`` takes whichever form adds its correction
    (the second for κ > 0, the first for κ < 0), since subtracting one large
    convolution from another loses every digit once x - u is long.  Its
    convolution is exact when both tables are exponential sums.
    """
    kappa = _pair(base, shifted)
    closed = _closed_pair(shifted, base, "W")
    out = _second_gen(base.W, shifted.W, shifted.W, kappa, u, x, base.cfg, representation, closed)
    out = np.where(np.broadcast_to(np.asarray(x, dtype=float), out.shape) < 0, 0.0, out)
    return out if out.ndim else float(out)


def second_gen_z(base: ScaleFunctionTable, shifted: ScaleFunctionTable, u, x,
                 representation: str = "auto"):
    """Z̄_u^{(p,κ)}(x), the analogue of :func:`second_gen_w` with Z in place of the
    right-hand factor; equal to 1 for x <= 0."""
    kappa = _pair(base, shifted)
    closed = _closed_pair(shifted, base, "Z")
    out = _second_gen(base.Z, shifted.W, shifted.Z, kappa, u, x, base.cfg, representation, closed)
    return out if out.ndim else float(out)
