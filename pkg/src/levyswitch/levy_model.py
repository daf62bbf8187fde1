"""Spectrally negative Lévy models described by their Laplace exponent.

Two families have closed forms and can be simulated:

* ``cramer_lundberg_exp``: ``X_t = c t - S_t`` with ``S`` compound Poisson of
  rate ``eta`` and Exp(``rho``) claims, ``psi(θ) = cθ - ηθ/(ρ+θ)``.
* ``brownian_drift``: ``X_t = μ t + σ B_t``, ``psi(θ) = μθ + σ²θ²/2``.

A ``custom`` model wraps a user supplied exponent and must declare its
variation class, because ``W(0+) > 0`` exactly when paths have bounded
variation and that cannot be read off a callable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .errors import ConfigError, DomainError, NumericalError


class Family(str, Enum):
    CRAMER_LUNDBERG_EXP = "cramer_lundberg_exp"
    BROWNIAN_DRIFT = "brownian_drift"
    CUSTOM = "custom"


# forward-difference step for ψ'(0+) of custom models
CUSTOM_DERIVATIVE_STEP = 1e-6


@dataclass(frozen=True, slots=True)
class LevyModelSpec:
    """Immutable description of one spectrally negative Lévy process.

    Use the constructors :meth:`cramer_lundberg_exp`, :meth:`brownian_drift`
    and :meth:`custom` rather than the raw initializer.
    """

    family: Family
    params: tuple[float, ...]
    psi_fn: Callable | None = None
    bounded_variation: bool = True
    label: str = ""

    # -- constructors -----------------------------------------------------
    @classmethod
    def cramer_lundberg_exp(cls, c: float, eta: float, rho: float) -> "LevyModelSpec":
        c, eta, rho = float(c), float(eta), float(rho)
        for name, v in (("c", c), ("eta", eta), ("rho", rho)):
            if not (math.isfinite(v) and v > 0):
                raise ConfigError(f"cramer_lundberg_exp requires {name} > 0, got {v}")
        return cls(Family.CRAMER_LUNDBERG_EXP, (c, eta, rho), None, True,
                   f"CL(c={c:g},eta={eta:g},rho={rho:g})")

    @classmethod
    def brownian_drift(cls, mu: float, sigma: float) -> "LevyModelSpec":
        mu, sigma = float(mu), float(sigma)
        if not math.isfinite(mu):
            raise ConfigError(f"brownian_drift requires finite mu, got {mu}")
        if not (math.isfinite(sigma) and sigma > 0):
            raise ConfigError(f"brownian_drift requires sigma > 0, got {sigma}")
        return cls(Family.BROWNIAN_DRIFT, (mu, sigma), None, False,
                   f"BM(mu={mu:g},sigma={sigma:g})")

    @classmethod
    def custom(cls, psi: Callable, bounded_variation: bool, label: str = "custom") -> "LevyModelSpec":
        """Wrap an arbitrary Laplace exponent.

        ``psi`` must accept numpy arrays (complex arguments are needed by the
        Laplace inversion that builds its scale function).
        """
        if not callable(psi):
            raise ConfigError("custom model needs a callable psi")
        if bounded_variation is None:
            raise ConfigError("custom model must declare bounded_variation")
        return cls(Family.CUSTOM, (), psi, bool(bounded_variation), label)

    # -- basic properties -------------------------------------------------
    @property
    def simulable(self) -> bool:
        return self.family is not Family.CUSTOM

    def psi(self, theta):
        """Laplace exponent ψ(θ) = log E[e^{θX_1}], vectorized (complex allowed)."""
        th = np.asarray(theta)
        if self.family is Family.CRAMER_LUNDBERG_EXP:
            c, eta, rho = self.params
            out = c * th - eta * th / (rho + th)
        elif self.family is Family.BROWNIAN_DRIFT:
            mu, sigma = self.params
            out = mu * th + 0.5 * sigma * sigma * th * th
        else:
            out = np.asarray(self.psi_fn(th))
        return out if out.ndim else out[()]

    def psi_prime_zero(self) -> float:
        """ψ'(0+) = E[X_1]."""
        if self.family is Family.CRAMER_LUNDBERG_EXP:
            c, eta, rho = self.params
            return c - eta / rho
        if self.family is Family.BROWNIAN_DRIFT:
            return self.params[0]
        h = CUSTOM_DERIVATIVE_STEP
        return float(np.real(self.psi(h) - self.psi(0.0))) / h

    def drift_coefficient(self) -> float | None:
        """Linear drift d with ψ(θ)/θ → d, for bounded variation models."""
        if self.family is Family.CRAMER_LUNDBERG_EXP:
            return self.params[0]
        if self.family is Family.BROWNIAN_DRIFT:
            return None
        if not self.bounded_variation:
            return None
        big = 1e8
        return float(np.real(self.psi(big))) / big

    def shifted(self, delta: float) -> "LevyModelSpec":
        """The model of ``X_t - δt``."""
        delta = float(delta)
        if delta == 0.0:
            return self
        if self.family is Family.CRAMER_LUNDBERG_EXP:
            c, eta, rho = self.params
            return LevyModelSpec.cramer_lundberg_exp(c - delta, eta, rho)
        if self.family is Family.BROWNIAN_DRIFT:
            mu, sigma = self.params
            return LevyModelSpec.brownian_drift(mu - delta, sigma)
        base = self.psi_fn
        return LevyModelSpec.custom(lambda th: base(th) - delta * th, self.bounded_variation,
                                    f"{self.label}-{delta:g}t")

    def phi(self, q: float, root_tol: float = 1e-12) -> float:
        return phi_inverse(self, q, root_tol)

    def to_dict(self) -> dict:
        if self.family is Family.CRAMER_LUNDBERG_EXP:
            c, eta, rho = self.params
            return {"family": self.family.value, "c": c, "eta": eta, "rho": rho}
        if self.family is Family.BROWNIAN_DRIFT:
            mu, sigma = self.params
            return {"family": self.family.value, "mu": mu, "sigma": sigma}
        return {"family": self.family.value, "label": self.label}


def model_from_dict(block: dict) -> LevyModelSpec:
    """Build a model from a config block such as ``{"family": "brownian_drift", ...}``."""
    if not isinstance(block, dict) or "family" not in block:
        raise ConfigError("model block must be an object with a 'family' key")
    fam = block["family"]
    keys = set(block) - {"family"}
    expected = {
        Family.CRAMER_LUNDBERG_EXP.value: {"c", "eta", "rho"},
        Family.BROWNIAN_DRIFT.value: {"mu", "sigma"},
    }
    if fam not in expected:
        raise ConfigError(f"unknown model family {fam!r}")
    if keys != expected[fam]:
        raise ConfigError(f"{fam} needs exactly keys {sorted(expected[fam])}, got {sorted(keys)}")
    if fam == Family.CRAMER_LUNDBERG_EXP.value:
        return LevyModelSpec.cramer_lundberg_exp(block["c"], block["eta"], block["rho"])
    return LevyModelSpec.brownian_drift(block["mu"], block["sigma"])


def psi_eval(model: LevyModelSpec, theta: float) -> float:
    """ψ(θ) for real θ ≥ 0."""
    theta = float(theta)
    if not theta >= 0:
        raise DomainError(f"psi is evaluated on theta >= 0, got {theta}")
    return float(np.real(model.psi(theta)))


def psi_prime_at_zero(model: LevyModelSpec) -> float:
    return model.psi_prime_zero()


def phi_inverse(model: LevyModelSpec, q: float, root_tol: float = 1e-12) -> float:
    """Right inverse Φ_q: the largest root of ψ(θ) = q.

    Parameters
    ----------
    model : LevyModelSpec
    q : float
        Non-negative level.
    root_tol : float
        Absolute tolerance on the root.
    """
    q = float(q)
    if not (math.isfinite(q) and q >= 0):
        raise DomainError(f"phi_inverse needs q >= 0, got {q}")

    def f(t: float) -> float:
        return float(np.real(model.psi(t))) - q

    lo = 0.0
    if q == 0.0:
        if model.psi_prime_zero() >= 0:
            return 0.0
        # ψ dips below zero right of the origin; step out of that dip
        lo = 1.0
        while f(lo) >= 0:
            lo *= 0.5
            if lo < 1e-300:
                raise NumericalError("could not bracket Phi_0")
    hi = max(1.0, 2.0 * lo)
    for _ in range(2000):
        if f(hi) > 0:
            break
        lo, hi = hi, hi * 2.0
    else:
        raise NumericalError("could not bracket the right inverse of psi")
    return float(brentq(f, lo, hi, xtol=root_tol, rtol=4 * np.finfo(float).eps, maxiter=500))
