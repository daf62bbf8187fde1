"""Shared models, settings and independent oracles for the test suite."""

import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from levyswitch.levy_model import LevyModelSpec
from levyswitch.numerics import QuadConfig
from levyswitch.simulator import SimConfig
from levyswitch.switch_core import SwitchSpec

settings.register_profile("levyswitch", max_examples=40, deadline=None, derandomize=True,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("levyswitch")

QUAD = QuadConfig()


@pytest.fixture(scope="session")
def quad():
    return QUAD


@pytest.fixture(scope="session")
def cl_x():
    return LevyModelSpec.cramer_lundberg_exp(1.5, 1.0, 1.0)


@pytest.fixture(scope="session")
def cl_y():
    return LevyModelSpec.cramer_lundberg_exp(1.0, 1.0, 1.0)


@pytest.fixture(scope="session")
def cl_spec(cl_x, cl_y):
    """The reference pair: X = CL(1.5,1,1) below b = 1, Y = CL(1,1,1) above, λ = 1."""
    return SwitchSpec(model_x=cl_x, model_y=cl_y, barrier_b=1.0, lam=1.0)


@pytest.fixture(scope="session")
def up_spec():
    """A CL pair that satisfies Φ_q > φ_{q+λ} at q = 0.5."""
    return SwitchSpec(model_x=LevyModelSpec.cramer_lundberg_exp(1.0, 1.0, 1.0),
                      model_y=LevyModelSpec.cramer_lundberg_exp(4.0, 1.0, 1.0),
                      barrier_b=1.0, lam=0.2)


@pytest.fixture(scope="session")
def bm_spec():
    """Brownian pair satisfying both ordering conditions at q = 0.5."""
    return SwitchSpec(model_x=LevyModelSpec.brownian_drift(0.0, 1.0),
                      model_y=LevyModelSpec.brownian_drift(2.0, 1.0),
                      barrier_b=1.0, lam=0.2)


@pytest.fixture
def small_sim():
    return SimConfig(n_paths=20_000, seed=7)


# -- oracles that share no code with the package ------------------------------

def cl_scale_oracle(c, eta, rho, q):
    """W^{(q)} of CL(c, η, ρ) by residues of (ρ+θ)/(c(θ-r1)(θ-r2))."""
    B = c * rho - eta - q
    disc = math.sqrt(B * B + 4.0 * c * q * rho)
    r1, r2 = (-B + disc) / (2 * c), (-B - disc) / (2 * c)
    if disc == 0.0:
        # double pole: W(x) = ((ρ + r)x + 1) e^{rx} / c
        return lambda x: np.where(np.asarray(x) >= 0, ((rho + r1) * np.maximum(x, 0) + 1)
                                  * np.exp(r1 * np.maximum(x, 0)) / c, 0.0)
    k1 = (rho + r1) / (c * (r1 - r2))
    k2 = (rho + r2) / (c * (r2 - r1))

    def W(x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= 0, k1 * np.exp(r1 * np.maximum(x, 0)) + k2 * np.exp(r2 * np.maximum(x, 0)),
                        0.0)

    return W


def bm_scale_oracle(mu, sigma, q):
    """W^{(q)} of μt + σB_t: (e^{r1 x} - e^{r2 x}) / (σ²/2 (r1 - r2))."""
    s2 = sigma * sigma
    disc = math.sqrt(mu * mu + 2 * q * s2)
    r1, r2 = (-mu + disc) / s2, (-mu - disc) / s2

    def W(x):
        x = np.asarray(x, dtype=float)
        xp = np.maximum(x, 0)
        return np.where(x >= 0, (np.exp(r1 * xp) - np.exp(r2 * xp)) / (0.5 * s2 * (r1 - r2)), 0.0)

    return W


def richardson_trapezoid(f, lo, hi, levels=7):
    """Romberg table built from composite trapezoid rules."""
    R = []
    for k in range(levels):
        n = 2 ** (k + 2)
        x = np.linspace(lo, hi, n + 1)
        y = f(x)
        row = [(hi - lo) / n * (y.sum() - 0.5 * (y[0] + y[-1]))]
        for j in range(1, k + 1):
            row.append(row[j - 1] + (row[j - 1] - R[k - 1][j - 1]) / (4 ** j - 1))
        R.append(row)
    return R[-1][-1]
