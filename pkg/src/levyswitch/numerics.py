"""Quadrature and tail truncation shared by the analytic modules.

Two layers live here.  :func:`integrate` and :func:`truncate_improper` are the
scalar, error-controlled entry points.  :func:`gl_quad` is the vectorized
composite Gauss-Legendre kernel that the nested convolutions are built on:
it integrates a batch of intervals at once, handing the integrand a node array
with one extra trailing axis.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, DomainError, NumericalError, TruncationError

log = logging.getLogger(__name__)

_MAX_PANELS = 1 << 14


@dataclass(frozen=True, slots=True, kw_only=True)
class QuadConfig:
    """Numerical settings.

    ``h`` is the grid step of cached tables, ``quad_tol`` the absolute target
    per integral, ``tail_eps`` the mass allowed beyond a truncation point and
    ``t_max`` the longest truncation allowed.  ``gl_order`` and
    ``panel_width`` shape the composite Gauss-Legendre rule.
    """

    h: float = 1e-3
    quad_tol: float = 1e-9
    root_tol: float = 1e-12
    tail_eps: float = 1e-10
    t_max: float = 200.0
    gl_order: int = 16
    panel_width: float = 1.0

    def __post_init__(self) -> None:
        for name in ("h", "t_max", "panel_width"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ConfigError(f"QuadConfig.{name} must be > 0, got {v!r}")
        for name in ("quad_tol", "root_tol", "tail_eps"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and 0 < v < 1):
                raise ConfigError(f"QuadConfig.{name} must lie in (0, 1), got {v!r}")
        if not (isinstance(self.gl_order, int) and 2 <= self.gl_order <= 128):
            raise ConfigError(f"QuadConfig.gl_order must be an int in [2, 128], got {self.gl_order!r}")
        if self.t_max / self.h > 1e9:
            raise ConfigError("t_max / h exceeds the addressable grid size")


DEFAULT_QUAD = QuadConfig()


@lru_cache(maxsize=64)
def _unit_rule(order: int, n_panels: int) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre nodes and weights on [0, 1]."""
    t, w = np.polynomial.legendre.leggauss(order)
    t = 0.5 * (t + 1.0)
    w = 0.5 * w
    k = np.arange(n_panels)[:, None]
    nodes = ((k + t[None, :]) / n_panels).ravel()
    weights = np.tile(w, n_panels) / n_panels
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def panels_for(span: float, cfg: QuadConfig) -> int:
    return int(min(_MAX_PANELS, max(1, math.ceil(span / cfg.panel_width - 1e-9))))


def gl_nodes(lo, hi, cfg: QuadConfig = DEFAULT_QUAD, n_panels: int | None = None):
    """Nodes and weights for a batch of intervals.

    Returns arrays of shape ``broadcast(lo, hi).shape + (K,)``.  Reversed
    intervals give signed integrals; empty ones give zero weights.
    """
    lo, hi = np.broadcast_arrays(np.asarray(lo, dtype=float), np.asarray(hi, dtype=float))
    span = hi - lo
    if n_panels is None:
        n_panels = panels_for(float(np.max(np.abs(span), initial=0.0)), cfg)
    t, w = _unit_rule(cfg.gl_order, n_panels)
    nodes = lo[..., None] + span[..., None] * t
    weights = span[..., None] * w
    return nodes, weights


def gl_quad(f: Callable[[np.ndarray], np.ndarray], lo, hi, cfg: QuadConfig = DEFAULT_QUAD,
            n_panels: int | None = None) -> np.ndarray:
    """Vectorized composite Gauss-Legendre integral of ``f`` over ``[lo, hi]``."""
    nodes, weights = gl_nodes(lo, hi, cfg, n_panels)
    if nodes.size == 0:
        return np.zeros(nodes.shape[:-1])
    return np.sum(f(nodes) * weights, axis=-1)


def _split(lo: float, hi: float, points: Sequence[float]) -> list[tuple[float, float]]:
    cuts = sorted(p for p in points if lo < p < hi)
    edges = [lo, *cuts, hi]
    return [(a, b) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def integrate(f: Callable, lo: float, hi: float, cfg: QuadConfig = DEFAULT_QUAD,
              points: Sequence[float] = ()) -> float:
    """Integral of a vectorized scalar function on ``[lo, hi]``.

    The interval is cut at ``points`` (kinks of the integrand) and each piece
    is refined by panel doubling until two successive composite rules agree to
    ``quad_tol``.  Non-convergence is logged and the finer estimate returned.
    """
    lo, hi = float(lo), float(hi)
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise DomainError("integrate needs finite limits; use truncate_improper for tails")
    if hi < lo:
        raise DomainError(f"integrate needs lo <= hi, got [{lo}, {hi}]")
    total = 0.0
    for a, b in _split(lo, hi, points):
        n = panels_for(b - a, cfg)
        prev = float(gl_quad(f, a, b, cfg, n))
        while True:
            n *= 2
            cur = float(gl_quad(f, a, b, cfg, n))
            if not math.isfinite(cur):
                raise NumericalError(f"non-finite integrand on [{a}, {b}]")
            if abs(cur - prev) <= cfg.quad_tol or n >= _MAX_PANELS:
                if abs(cur - prev) > cfg.quad_tol:
                    log.warning("integrate: tolerance %.1e not reached on [%g, %g] (diff %.2e)",
                                cfg.quad_tol, a, b, abs(cur - prev))
                break
            prev = cur
        total += cur
    return total


def tail_cutoff(f: Callable, lo: float, beta: float, cfg: QuadConfig = DEFAULT_QUAD,
                bound: float | None = None) -> tuple[float, float, float]:
    """Truncation point for ``∫_lo^∞ f`` given ``|f(u)| <= C e^{-β(u-lo)}``.

    When ``bound`` (the constant C) is not supplied it is estimated as twice
    the sampled supremum of ``|f(u)| e^{β(u-lo)}``.  ``f`` may return a batch
    of values per node; the supremum runs over the whole batch.  The cut is
    placed where the envelope tail falls below ``tail_eps · max(1, C)``.
    Returns ``(U*, C, tail_bound)``.
    """
    beta = float(beta)
    if not (math.isfinite(beta) and beta > 0):
        raise DomainError(f"decay rate must be > 0, got {beta}")
    if bound is None:
        reach = min(cfg.t_max, 40.0 / beta)
        probe = lo + np.linspace(0.0, reach, 161)
        vals = np.abs(np.asarray(f(probe), dtype=float))
        if not np.all(np.isfinite(vals)):
            raise NumericalError("non-finite integrand while sizing a tail")
        scaled = vals * np.exp(beta * (probe - lo))
        bound = 2.0 * float(np.max(scaled)) if scaled.size else 0.0
    if bound <= 0.0:
        return lo, 0.0, 0.0
    # the discarded mass is held to tail_eps relative to C once C exceeds 1
    length = max(0.0, math.log(min(bound, 1.0) / (beta * cfg.tail_eps)) / beta)
    if length > cfg.t_max:
        raise TruncationError(
            f"tail of decay rate {beta:.4g} needs truncation at {length:.1f} beyond lo, "
            f"more than t_max={cfg.t_max:g}; the exponential ordering condition is close to failing")
    tail = bound * math.exp(-beta * length) / beta
    return lo + length, bound, tail


def truncate_improper(f: Callable, lo: float, beta: float, cfg: QuadConfig = DEFAULT_QUAD,
                      bound: float | None = None, points: Sequence[float] = ()) -> tuple[float, float]:
    """``∫_lo^∞ f(u) du`` for exponentially decaying ``f``.

    Parameters
    ----------
    f : callable
        Vectorized integrand.
    lo : float
        Lower limit.
    beta : float
        Certified decay rate, ``|f(u)| <= C e^{-βu}``; must be positive.
    bound : float, optional
        The constant C relative to ``lo``; estimated when omitted.

    Returns
    -------
    (value, tail_bound)
        The truncated integral and a bound on the discarded mass.
    """
    upper, _, tail = tail_cutoff(f, float(lo), beta, cfg, bound)
    return integrate(f, lo, upper, cfg, points), tail
