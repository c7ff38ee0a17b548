"""Dual functionals of the martingale Benamou-Brenier problem.

The dual variable psi is represented implicitly through its conjugate
v = psi* (a MaxAffine, or an AnalyticConvex with a conjugate map). This
keeps psi lower semicontinuous and makes dom psi = conv{slopes} explicit.
The key formula is

    phi_psi(x) = sup_zeta ( <zeta, x> - (v * gamma)(zeta) ) = (v * gamma)*(x),

evaluated by inverting the smoothed gradient at x. The dual objective is
D(psi) = integral psi d(nu) - integral phi_psi d(mu); the relaxed form
averages psi along any martingale coupling and is coupling-independent.

+inf is a legal value of the dual objective (it occurs when nu charges
points outside dom psi); it is returned as math.inf, never raised.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .convexfn import (
    AnalyticConvex,
    MaxAffine,
    QuadratureRule,
    conjugate_at,
    smooth_eval,
    smoothed_grad_inverse,
)
from .errors import DimensionError, OutOfRangeError
from .measures import DiscreteMeasure, MartingaleCoupling


@dataclass(frozen=True)
class DualCertificate:
    """Primal/dual values at a candidate solution and their gap.

    gap = dual_value - primal_value; at the optimizer it vanishes up to the
    reported numerical tolerance (there is no duality gap).
    """

    dual_value: float
    primal_value: float
    gap: float
    psi_gauge: str
    quadrature: dict = field(default_factory=dict)
    tolerance: float = 0.0

    def to_dict(self) -> dict:
        return {
            "dual_value": self.dual_value,
            "primal_value": self.primal_value,
            "gap": self.gap,
            "psi_gauge": self.psi_gauge,
            "quadrature": dict(self.quadrature),
            "tolerance": self.tolerance,
        }


def _psi_at(v, y: np.ndarray) -> float:
    """psi(y) = v*(y) for the implicit dual variable."""
    if isinstance(v, MaxAffine):
        return conjugate_at(v, y)
    if v.conjugate is None:
        raise OutOfRangeError("analytic potential lacks a conjugate map")
    return float(v.conjugate(np.atleast_1d(np.asarray(y, dtype=float))))


def phi_psi(v, x, rule: QuadratureRule) -> float:
    """phi^psi(x) = (v * gamma)*(x), via the smoothed-gradient inverse.

    Requires x in the interior of conv{slopes of v} (= int dom psi); outside
    it the supremum diverges and OutOfRangeError propagates from the solve.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if isinstance(v, MaxAffine) and v.n_pieces == 1:
        # psi is the indicator of the single slope plus its intercept
        a = v.slopes[0]
        if np.linalg.norm(x - a) <= 1e-9 * (1.0 + np.linalg.norm(a)):
            return float(v.intercepts[0])
        raise OutOfRangeError("target outside dom psi (single-slope potential)")
    zeta = smoothed_grad_inverse(v, x, rule)
    value = float(smooth_eval(v, 1.0, rule, zeta[None, :])[0][0])
    return float(zeta @ x) - value


def dual_value(v, mu: DiscreteMeasure, nu: DiscreteMeasure, rule: QuadratureRule) -> float:
    """D(psi) = sum_j nu_j psi(y_j) - sum_i mu_i phi^psi(x_i).

    Returns math.inf when a nu-atom falls outside dom psi (a legal dual
    value); raises OutOfRangeError when a mu-atom leaves int dom psi.
    """
    if mu.dim != nu.dim:
        raise DimensionError("marginals must share a dimension")
    psi_part = 0.0
    for y, w in zip(nu.atoms, nu.weights):
        py = _psi_at(v, y)
        if math.isinf(py):
            return math.inf
        psi_part += w * py
    phi_part = sum(w * phi_psi(v, x, rule) for x, w in zip(mu.atoms, mu.weights))
    return psi_part - phi_part


def relaxed_dual(v, pi: MartingaleCoupling, rule: QuadratureRule) -> float:
    """Relaxed dual along a coupling: sum_i mu_i ( E_pi_i psi - phi^psi(x_i) ).

    Independent of which martingale coupling of the marginals is supplied,
    and every term is nonnegative; finite in cases where the plain dual
    integral of psi against nu is not.
    """
    mu, nu = pi.source, pi.target
    psi_vals = np.array([_psi_at(v, y) for y in nu.atoms])
    total = 0.0
    for i, (x, w) in enumerate(zip(mu.atoms, mu.weights)):
        if w == 0.0:
            continue
        row = pi.matrix[i] / w
        charged = row > 0.0
        if np.any(np.isinf(psi_vals[charged])):
            return math.inf
        total += w * (float(row[charged] @ psi_vals[charged]) - phi_psi(v, x, rule))
    return total


def rho_psi(v, rule: QuadratureRule) -> float:
    """rho^psi = integral of psi* = v against gamma, i.e. (v * gamma)(0)."""
    d = v.dim
    return float(smooth_eval(v, 1.0, rule, np.zeros((1, d)))[0][0])
