"""Maximal covariance between measures and Gaussian cell masses of
max-of-affine potentials.

MCov(p, q) = sup over couplings of E<X, Y> is the correlation form of
quadratic-cost optimal transport. In dimension 1 the comonotone (quantile)
coupling attains it; in general it is a small transportation LP. The cell
masses m_j(zeta) = gamma_zeta(piece j active) are the weights the Bass
kernel puts on the slopes, and E[<grad v(zeta + Z), Z>] is the maximal
covariance between that kernel and the Gaussian, attained by the gradient
coupling (reverse Brenier).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from . import linprog
from .convexfn import (
    MaxAffine,
    QuadratureRule,
    _norm_pdf,
    _upper_envelope_1d,
    smooth_eval,
)
from .errors import DimensionError, QuadratureError
from .measures import DiscreteMeasure


@dataclass(frozen=True)
class CellMassVector:
    """Probabilities per affine piece: m_j = gamma_zeta(piece j active).

    Carries the Bass kernel as atom weights on the slopes y_j.
    """

    masses: np.ndarray

    def __post_init__(self) -> None:
        m = np.asarray(self.masses, dtype=float)
        if np.any(m < -1e-12):
            raise QuadratureError("cell masses must be nonnegative")
        if abs(m.sum() - 1.0) > 1e-8:
            raise QuadratureError(f"cell masses sum to {m.sum()!r}")
        object.__setattr__(self, "masses", np.maximum(m, 0.0))
        self.masses.setflags(write=False)

    def as_measure(self, atoms: np.ndarray) -> DiscreteMeasure:
        keep = self.masses > 0.0
        return DiscreteMeasure(np.atleast_2d(atoms)[keep], self.masses[keep])


def mcov_1d(p: DiscreteMeasure, q: DiscreteMeasure) -> float:
    """Maximal covariance of two 1-D measures via the comonotone coupling."""
    if p.dim != 1 or q.dim != 1:
        raise DimensionError("mcov_1d requires 1-D measures")
    ps, qs = p.sorted_1d(), q.sorted_1d()
    xs, ws = ps.atoms[:, 0], ps.weights
    ys, vs = qs.atoms[:, 0], qs.weights
    total = 0.0
    i = j = 0
    wi, vj = ws[0], vs[0]
    # walk the two quantile staircases in lockstep
    while True:
        m = min(wi, vj)
        total += m * xs[i] * ys[j]
        wi -= m
        vj -= m
        if wi <= 1e-15:
            i += 1
            if i == len(xs):
                break
            wi = ws[i]
        if vj <= 1e-15:
            j += 1
            if j == len(ys):
                break
            vj = vs[j]
    return total


def mcov_discrete(p: DiscreteMeasure, q: DiscreteMeasure) -> float:
    """Exact optimum of sum_ij pi_ij <x_i, y_j> over couplings, as a
    transportation LP (dense simplex; desk-scale instances)."""
    if p.dim != q.dim:
        raise DimensionError("measures must share a dimension")
    m, n = p.n_atoms, q.n_atoms
    gains = p.atoms @ q.atoms.T  # (m, n)
    A = np.zeros((m + n, m * n))
    for i in range(m):
        A[i, i * n : (i + 1) * n] = 1.0
    for j in range(n):
        A[m + j, j::n] = 1.0
    b = np.concatenate([p.weights, q.weights])
    res = linprog.solve_lp(-gains.ravel(), A, b)
    if res.status != linprog.OPTIMAL:
        raise QuadratureError("transportation LP did not solve")  # unreachable for couplings
    return -res.value


def _cells_1d_exact(v: MaxAffine, zeta: float) -> np.ndarray:
    """Exact cell masses in dim 1 from the sorted, pruned breakpoints of v."""
    order, edges = _upper_envelope_1d(v.slopes, v.intercepts)
    beta = edges - zeta  # z units at variance 1
    cdf = np.empty_like(beta)
    cdf[0], cdf[-1] = 0.0, 1.0
    cdf[1:-1] = ndtr(beta[1:-1])
    masses = np.zeros(v.n_pieces)
    masses[order] = np.diff(cdf)
    return masses


def gaussian_cell_masses(v: MaxAffine, zeta, rule: QuadratureRule) -> CellMassVector:
    """Cell masses of v around zeta: the law of grad v(zeta + Z) on the slopes.

    Dim 1 is exact (Phi differences over breakpoints); otherwise the masses
    are the weighted fraction of rule nodes whose active piece is j.
    """
    zeta = np.atleast_1d(np.asarray(zeta, dtype=float))
    if rule.dim != v.dim or zeta.shape != (v.dim,):
        raise QuadratureError("rule, potential and point dims must agree")
    if v.dim == 1:
        return CellMassVector(_cells_1d_exact(v, float(zeta[0])))
    act = v.active_piece(zeta[None, :] + rule.nodes)
    masses = np.bincount(act, weights=rule.weights, minlength=v.n_pieces)
    return CellMassVector(masses)


def mcov_bass_kernel(v, zeta, rule: QuadratureRule) -> float:
    """E[<grad v(zeta + Z), Z>]: MCov between the Bass kernel at zeta and gamma.

    Exact in dim 1 for max-affine v (the cell first moments are phi
    differences). In higher dims max-affine v goes through the smoothing
    engine via <grad v(w), w> = v(w) + c_cell(w), so

        E[<grad v(zeta+Z), Z>] = (v*gamma)(zeta) + <c, m(zeta)> - <grad(v*gamma)(zeta), zeta>,

    which shares every term with smooth_eval instead of re-sampling cells at
    the nodes. Analytic potentials are a plain quadrature sum.
    """
    zeta = np.atleast_1d(np.asarray(zeta, dtype=float))
    if rule.dim != zeta.shape[0]:
        raise QuadratureError("rule and point dims must agree")
    if isinstance(v, MaxAffine):
        if v.dim != zeta.shape[0]:
            raise QuadratureError("potential and point dims must agree")
        if v.dim == 1:
            order, edges = _upper_envelope_1d(v.slopes, v.intercepts)
            beta = edges - float(zeta[0])
            pdf = np.zeros_like(beta)
            finite = np.isfinite(beta)
            pdf[finite] = _norm_pdf(beta[finite])
            ez = pdf[:-1] - pdf[1:]  # E[Z; cell] per surviving piece
            return float(v.slopes.ravel()[order] @ ez)
        value, grad, cells = smooth_eval(v, 1.0, rule, zeta[None, :], want_cells=True)
        return float(value[0] + cells[0] @ v.intercepts - grad[0] @ zeta)
    grads = v.gradients(zeta[None, :] + rule.nodes)
    return float(np.einsum("nd,nd,n->", grads, rule.nodes, rule.weights))
