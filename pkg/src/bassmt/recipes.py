"""Named example instances used by the reproduce command and the test battery.

Each builder returns plain library objects so the pipeline under test is
exactly the public one; nothing here solves or samples by itself.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import ndtr

from .convexfn import AnalyticConvex, QuadratureRule
from .measures import DiscreteMeasure, QuantileFunction

CIRCLE_KINK = 3.17
CIRCLE_SLOPES = (0.5, 1.6)
CIRCLE_ALPHA_RADIUS = 3.0


def binary_instance() -> tuple[DiscreteMeasure, DiscreteMeasure]:
    """mu = delta_0, nu = (delta_-1 + delta_1)/2; everything about it is closed form."""
    mu = DiscreteMeasure(np.array([[0.0]]), np.array([1.0]))
    nu = DiscreteMeasure(np.array([[-1.0], [1.0]]), np.array([0.5, 0.5]))
    return mu, nu


def circle_potential(kink: float = CIRCLE_KINK,
                     slopes: tuple[float, float] = CIRCLE_SLOPES) -> AnalyticConvex:
    """Radial kinked cone: h(r) = slopes[0] r up to the kink, slopes[1] after."""
    s0, s1 = slopes

    def value(x):
        r = np.linalg.norm(x, axis=-1)
        return np.where(r <= kink, s0 * r, s0 * kink + s1 * (r - kink))

    def grad(x):
        r = np.linalg.norm(x, axis=-1, keepdims=True)
        slope = np.where(r <= kink, s0, s1)
        with np.errstate(invalid="ignore", divide="ignore"):
            unit = np.where(r > 0.0, x / r, 0.0)
        return slope * unit

    return AnalyticConvex(dim=2, value=value, grad=grad, name="radial-kink")


def circle_alpha(radius: float = CIRCLE_ALPHA_RADIUS,
                 n_atoms: int = 256) -> DiscreteMeasure:
    """Uniform distribution on the circle, discretized to n_atoms equal atoms."""
    theta = 2.0 * math.pi * np.arange(n_atoms) / n_atoms
    atoms = radius * np.column_stack([np.cos(theta), np.sin(theta)])
    w = np.full(n_atoms, 1.0 / n_atoms)
    return DiscreteMeasure(atoms, w / w.sum())


def arctan_instance(n_quad: int = 64):
    """Forward-constructed (mu, nu) of the Bass martingale with v' = arctan.

    alpha = (delta_-1 + delta_1)/2, so mu has two atoms at E[arctan(+-1 + Z)]
    and nu is the continuous mixture law of arctan(+-1 + Z), returned as a
    QuantileFunction (its CDF inverts by bisection in the bounded range
    (-pi/2, pi/2)). Returns (mu, nu, v_prime_oracle).
    """
    rule = QuadratureRule.gauss_hermite(n_quad, 1)
    z = rule.nodes[:, 0]
    mu_atoms = np.array([
        [float(np.arctan(-1.0 + z) @ rule.weights)],
        [float(np.arctan(1.0 + z) @ rule.weights)],
    ])
    mu = DiscreteMeasure(mu_atoms, np.array([0.5, 0.5]))

    def cdf(y):
        t = np.tan(np.clip(y, -math.pi / 2 + 1e-12, math.pi / 2 - 1e-12))
        return 0.5 * (ndtr(t - 1.0) + ndtr(t + 1.0))

    def quantile(u):
        u = np.atleast_1d(np.asarray(u, dtype=float))
        lo = np.full(u.shape, -math.pi / 2)
        hi = np.full(u.shape, math.pi / 2)
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            below = cdf(mid) < u
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        return 0.5 * (lo + hi)

    nu = QuantileFunction(quantile, name="arctan-mixture")
    return mu, nu, np.arctan
