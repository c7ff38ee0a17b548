"""Convex-function calculus: max-of-affine potentials, Legendre conjugates,
Gaussian smoothing v * gamma^t, and inversion of the smoothed gradient.

Smoothing conventions follow (f * gamma^t)(x) = E[f(x + sqrt(t) Z)] with
Z standard normal, so grad(f * gamma^t) = (grad f) * gamma^t and, for a
max-affine v, the smoothed gradient at x is the cell-mass average
sum_j m_j(x) a_j of the slopes, where m_j(x) is the Gaussian mass of the
region where piece j is active around x.

Two evaluation schemes coexist:

* the literal quadrature sums value = sum_k w_k f(x + sqrt(t) z_k) (method
  "quadrature", and always for Monte-Carlo rules), and
* an exact scheme for max-affine f (method "auto") that integrates the first
  coordinate in closed form through Phi/phi differences over the per-fiber
  upper envelope, tensorized with Gauss-Hermite over the remaining axes.
  In dimension 1 this is exact; it is what makes Newton solves on the
  smoothed gradient well-posed, since the node-argmax field is piecewise
  constant in x and cannot support residuals below the largest node weight.
"""

from __future__ import annotations

import hashlib as _hashlib
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.polynomial.hermite import hermgauss
from scipy.special import ndtr, ndtri

from . import linprog
from .errors import DimensionError, OutOfRangeError, QuadratureError, RankError

_SQRT_2PI = math.sqrt(2.0 * math.pi)

# defaults per dimension: 1-D Gauss-Hermite 64; tensor 20 per axis up to dim 3;
# Monte Carlo beyond that or for potentials with many pieces
DEFAULT_GH_1D = 64
DEFAULT_GH_AXIS = 20
DEFAULT_MC_SAMPLES = 100_000
MAX_TENSOR_PIECES = 50


def _norm_pdf(t: np.ndarray) -> np.ndarray:
    return np.exp(-0.5 * np.square(t)) / _SQRT_2PI


# ---------------------------------------------------------------------------
# domain types


@dataclass(frozen=True)
class MaxAffine:
    """Convex v(x) = max_j (<a_j, x> - c_j) with pairwise distinct slopes a_j.

    When produced by the solver the slopes are the nu-atoms and the
    intercepts carry the dual weights, gauged to sum_j nu_j c_j = 0.
    """

    slopes: np.ndarray
    intercepts: np.ndarray

    def __init__(self, slopes, intercepts) -> None:
        a = np.asarray(slopes, dtype=float)
        if a.ndim == 1:
            a = a[:, None]
        c = np.asarray(intercepts, dtype=float)
        if a.ndim != 2 or a.shape[0] == 0:
            raise DimensionError("slopes must be a non-empty (k, d) array")
        if c.shape != (a.shape[0],):
            raise DimensionError("one intercept per slope required")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(c))):
            raise ValueError("slopes and intercepts must be finite")
        a = a + 0.0
        if len({row.tobytes() for row in a}) != a.shape[0]:
            raise ValueError("slopes must be pairwise distinct")
        object.__setattr__(self, "slopes", a)
        object.__setattr__(self, "intercepts", c.copy())
        self.slopes.setflags(write=False)
        self.intercepts.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.slopes.shape[1]

    @property
    def n_pieces(self) -> int:
        return self.slopes.shape[0]

    def values(self, x: np.ndarray) -> np.ndarray:
        """v at one point or a batch of points (..., d)."""
        x = np.asarray(x, dtype=float)
        squeeze = x.ndim == 1
        pieces = np.atleast_2d(x) @ self.slopes.T - self.intercepts
        out = pieces.max(axis=-1)
        return float(out[0]) if squeeze else out

    def active_piece(self, x: np.ndarray) -> np.ndarray:
        """Lowest-index maximizing piece at each point."""
        pieces = np.atleast_2d(np.asarray(x, dtype=float)) @ self.slopes.T - self.intercepts
        return pieces.argmax(axis=-1)

    def regauged(self, nu_weights: np.ndarray) -> "MaxAffine":
        """Shift intercepts so that sum_j nu_j c_j = 0."""
        shift = float(np.asarray(nu_weights) @ self.intercepts)
        return MaxAffine(self.slopes, self.intercepts - shift)

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "slopes": self.slopes.tolist(),
            "intercepts": self.intercepts.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MaxAffine":
        v = cls(np.asarray(d["slopes"], dtype=float), np.asarray(d["intercepts"], dtype=float))
        if v.dim != int(d["dim"]):
            raise DimensionError("declared dim does not match slopes")
        return v


@dataclass(frozen=True)
class AnalyticConvex:
    """Convex function given by closed-form value and gradient maps.

    Optional extras: `conjugate` (y -> scalar) and `smoothed`
    ((x, t) -> (value, gradient)) when closed forms exist. Gradient maps must
    accept batches (..., d) and return (..., d); scalars are promoted.
    """

    dim: int
    value: Callable
    grad: Callable
    conjugate: Callable | None = None
    smoothed: Callable | None = None
    name: str = ""

    def values(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        squeeze = x.ndim == 1
        out = np.asarray(self.value(np.atleast_2d(x)), dtype=float)
        return float(out[0]) if squeeze else out

    def gradients(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        squeeze = x.ndim == 1
        out = np.asarray(self.grad(np.atleast_2d(x)), dtype=float)
        return out[0] if squeeze else out


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and probability weights for integrals against gamma^t.

    Gauss-Hermite rules are tensorized per axis and keep their 1-D factors
    (axis_nodes/axis_weights) so the exact-fiber engine can reuse them;
    Monte-Carlo rules carry their seed for reproducibility.
    """

    kind: str
    dim: int
    nodes: np.ndarray
    weights: np.ndarray
    seed: int | None = None
    axis_nodes: np.ndarray | None = field(default=None, repr=False)
    axis_weights: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if abs(self.weights.sum() - 1.0) > 1e-12:
            raise QuadratureError(f"weights sum to {self.weights.sum()!r}")
        if self.nodes.shape != (self.weights.shape[0], self.dim):
            raise QuadratureError("nodes must be (n, dim)")

    @classmethod
    def gauss_hermite(cls, n: int, dim: int = 1) -> "QuadratureRule":
        if n < 1 or dim < 1:
            raise QuadratureError("need n >= 1 nodes and dim >= 1")
        z, w = hermgauss(n)
        z = z * math.sqrt(2.0)  # physicists' nodes -> standard normal
        w = w / math.sqrt(math.pi)
        w = w / w.sum()
        if dim == 1:
            nodes = z[:, None]
            weights = w
        else:
            grids = np.meshgrid(*([z] * dim), indexing="ij")
            nodes = np.stack([g.ravel() for g in grids], axis=-1)
            weights = np.ones(len(nodes))
            for g in np.meshgrid(*([w] * dim), indexing="ij"):
                weights = weights * g.ravel()
            weights = weights / weights.sum()
        return cls("gauss-hermite", dim, nodes, weights, None, z, w)

    @classmethod
    def monte_carlo(cls, n_samples: int, dim: int, seed: int = 0) -> "QuadratureRule":
        if n_samples < 2:
            raise QuadratureError("need at least 2 samples")
        rng = np.random.default_rng(seed)
        nodes = rng.standard_normal((n_samples, dim))
        weights = np.full(n_samples, 1.0 / n_samples)
        return cls("monte-carlo", dim, nodes, weights, seed)

    @property
    def is_gh(self) -> bool:
        return self.kind == "gauss-hermite"


def default_rule(dim: int, n_pieces: int | None = None, seed: int = 0) -> QuadratureRule:
    """Default quadrature per dimension: gh:64 (1-D), gh:20 per axis (dim <= 3),
    Monte Carlo with 1e5 common samples beyond that or past 50 pieces."""
    if dim == 1:
        return QuadratureRule.gauss_hermite(DEFAULT_GH_1D, 1)
    if dim <= 3 and (n_pieces is None or n_pieces <= MAX_TENSOR_PIECES):
        return QuadratureRule.gauss_hermite(DEFAULT_GH_AXIS, dim)
    return QuadratureRule.monte_carlo(DEFAULT_MC_SAMPLES, dim, seed)


def parse_quad_spec(spec: str, dim: int) -> QuadratureRule:
    """Parse a CLI quadrature spec: `gh:<n>` or `mc:<samples>:<seed>`."""
    parts = spec.split(":")
    try:
        if parts[0] == "gh" and len(parts) == 2:
            return QuadratureRule.gauss_hermite(int(parts[1]), dim)
        if parts[0] == "mc" and len(parts) in (2, 3):
            seed = int(parts[2]) if len(parts) == 3 else 0
            return QuadratureRule.monte_carlo(int(parts[1]), dim, seed)
    except ValueError as exc:
        raise QuadratureError(f"bad quadrature spec {spec!r}: {exc}") from exc
    raise QuadratureError(
        f"bad quadrature spec {spec!r}; expected gh:<n> or mc:<samples>:<seed>"
    )


# ---------------------------------------------------------------------------
# conjugate and subgradient


def conjugate_at(v: MaxAffine, y: np.ndarray) -> float:
    """Legendre conjugate v*(y) of a max-affine function.

    v* is the lower convex envelope of the points (a_j, c_j):
    v*(y) = min { sum_j lam_j c_j : sum_j lam_j a_j = y, lam in simplex },
    and +inf outside conv{a_j}. Solved as a small envelope LP.
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if y.shape != (v.dim,):
        raise DimensionError(f"y must have {v.dim} coordinates")
    k = v.n_pieces
    A = np.vstack([v.slopes.T, np.ones((1, k))])
    b = np.concatenate([y, [1.0]])
    res = linprog.solve_lp(v.intercepts, A, b)
    if res.status != linprog.OPTIMAL:
        return math.inf
    return res.value


def eval_subgradient(v: MaxAffine, x: np.ndarray) -> np.ndarray:
    """A subgradient of v at x: the slope of the lowest-index active piece."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    j = int(v.active_piece(x)[0])
    return v.slopes[j].copy()


# ---------------------------------------------------------------------------
# exact smoothing engine for max-affine potentials


def _upper_envelope_1d(slopes: np.ndarray, intercepts: np.ndarray):
    """Surviving pieces and breakpoints of max_j (a_j x - c_j) in dim 1.

    Returns (order, edges): `order` indexes the active pieces by increasing
    slope; piece order[r] is active on [edges[r], edges[r+1]] with
    edges[0] = -inf, edges[-1] = +inf. Dominated pieces are pruned.
    """
    a = slopes.ravel()
    idx = np.argsort(a, kind="stable")
    stack: list[int] = []
    bps: list[float] = []
    for j in idx:
        while stack:
            top = stack[-1]
            # intersection of line j with the current top line
            x_cross = (intercepts[j] - intercepts[top]) / (a[j] - a[top])
            if bps and x_cross <= bps[-1]:
                stack.pop()
                bps.pop()
            else:
                stack.append(j)
                bps.append(x_cross)
                break
        else:
            stack.append(j)
    order = np.asarray(stack, dtype=int)
    edges = np.concatenate(([-np.inf], np.asarray(bps[: len(stack) - 1]), [np.inf]))
    return order, edges


def _smooth_1d_exact(v: MaxAffine, t: float, X: np.ndarray, want_cells: bool):
    """Exact (value, grad, cells) of v * gamma^t at a batch X of 1-D points."""
    order, edges = _upper_envelope_1d(v.slopes, v.intercepts)
    a = v.slopes.ravel()[order]
    c = v.intercepts[order]
    x = X[:, 0]
    st = math.sqrt(t)
    beta = (edges[None, :] - x[:, None]) / st  # (B, r+1) in z units
    cdf = np.empty_like(beta)
    cdf[:, 0], cdf[:, -1] = 0.0, 1.0
    cdf[:, 1:-1] = ndtr(beta[:, 1:-1])
    pdf = np.zeros_like(beta)
    pdf[:, 1:-1] = _norm_pdf(beta[:, 1:-1])
    m = np.diff(cdf, axis=1)  # (B, r) cell masses in envelope order
    ez = pdf[:, :-1] - pdf[:, 1:]  # E[Z; cell]
    value = (m * (x[:, None] * a - c)).sum(axis=1) + st * (ez * a).sum(axis=1)
    grad = (m @ a)[:, None]
    cells = None
    if want_cells:
        cells = np.zeros((len(x), v.n_pieces))
        cells[:, order] = m
    return value, grad, cells


def _outer_tensor(rule: QuadratureRule, d_out: int):
    """(d_out)-dimensional outer factor of the rule.

    Gauss-Hermite rules tensorize their 1-D factors; Monte-Carlo rules reuse
    the trailing coordinates of their own samples (valid because standard
    normal coordinates are independent), which conditions the first axis out
    of the estimator.
    """
    if d_out == 0:
        return np.zeros((1, 0)), np.ones(1)
    if not rule.is_gh:
        return rule.nodes[:, 1 : 1 + d_out], rule.weights
    z, w = rule.axis_nodes, rule.axis_weights
    grids = np.meshgrid(*([z] * d_out), indexing="ij")
    nodes = np.stack([g.ravel() for g in grids], axis=-1)
    weights = np.ones(len(nodes))
    for g in np.meshgrid(*([w] * d_out), indexing="ij"):
        weights = weights * g.ravel()
    return nodes, weights / weights.sum()


def _generic_rotation(slopes: np.ndarray) -> np.ndarray:
    """Deterministic orthogonal Q making first slope coordinates distinct.

    Exactly tied fiber slopes (common in symmetric inputs) would make the
    per-fiber winner flip discontinuously as the evaluation point moves,
    leaving jumps in the smoothed-gradient field. A rotation into generic
    position removes ties; it is seeded from the slope bytes so every
    evaluation of the same potential shares one frame. Values and cell
    masses are rotation invariant; gradients are rotated back by the caller.
    """
    d = slopes.shape[1]
    scale = 1.0 + float(np.abs(slopes).max())
    seed = int.from_bytes(_hashlib.sha256(slopes.tobytes()).digest()[:8], "big")
    Q = np.eye(d)
    for attempt in range(8):
        s = slopes @ Q.T[:, 0]
        gaps = np.diff(np.sort(s))
        if slopes.shape[0] == 1 or (gaps.size and gaps.min() > 1e-9 * scale):
            return Q
        rng = np.random.default_rng(seed + attempt)
        Q = np.linalg.qr(rng.standard_normal((d, d)))[0]
    return Q


def _smooth_fiber_exact(slopes: np.ndarray, intercepts: np.ndarray, t: float,
                        z_out: np.ndarray, w_out: np.ndarray, X: np.ndarray,
                        want_cells: bool):
    """(value, grad, cells) of the max-affine smoothing, exact along axis 0.

    For each outer fiber (fixed nodes in coordinates 2..d) the restriction of
    the potential is a 1-D max-affine in z_1 whose active intervals follow
    from pairwise line comparisons; Gaussian integrals over the intervals are
    Phi/phi differences. Smooth in X, unlike the node-argmax field.
    """
    n, d = slopes.shape
    st = math.sqrt(t)
    F = len(z_out)
    s = st * slopes[:, 0]  # (n,) fiber slope in z_1 units
    ds = s[:, None] - s[None, :]  # (n, n)
    tie = ds == 0.0
    B = X.shape[0]
    # offsets b[q, f, j] = <Y_j, x_q> + st <Y_j,out, z_out_f> - c_j
    base = X @ slopes.T - intercepts  # (B, n)
    off_f = st * (z_out @ slopes[:, 1:].T)  # (F, n)
    value = np.zeros(B)
    grad = np.zeros((B, d))
    cells = np.zeros((B, n)) if want_cells else None
    # chunk the batch so the (chunk, F, n, n) work array stays modest
    chunk = max(1, int(4e6 / max(1, F * n * n)))
    eye = np.eye(n, dtype=bool)
    kidx = np.arange(n)
    for lo in range(0, B, chunk):
        hi = min(B, lo + chunk)
        b = base[lo:hi, None, :] + off_f[None, :, :]  # (Bc, F, n)
        db = b[..., :, None] - b[..., None, :]  # (Bc, F, n, n) b_j - b_k
        with np.errstate(divide="ignore", invalid="ignore"):
            crit = -db / ds  # threshold z where line k overtakes j
        # piece j needs z >= crit for slower k, z <= crit for faster k
        lowcand = np.where((ds > 0)[None, None], crit, -np.inf)
        highcand = np.where((ds < 0)[None, None], crit, np.inf)
        L = lowcand.max(axis=-1)
        R = highcand.min(axis=-1)
        # ties in fiber slope: j is dead if some k has the same slope and a
        # strictly higher line, or an equal line with lower index
        dead_tie = (tie & ~eye)[None, None] & (
            (db < 0) | ((db == 0) & (kidx[None, None, None, :] < kidx[None, None, :, None]))
        )
        dead = dead_tie.any(axis=-1)
        L = np.where(dead, np.inf, L)
        ok = L < R
        cdf_hi = np.where(np.isposinf(R), 1.0, ndtr(np.where(np.isfinite(R), R, 0.0)))
        cdf_lo = np.where(np.isneginf(L), 0.0, ndtr(np.where(np.isfinite(L), L, 0.0)))
        cdf_lo = np.where(np.isposinf(L), 1.0, cdf_lo)
        mass = np.where(ok, cdf_hi - cdf_lo, 0.0)  # (Bc, F, n)
        pdf_hi = np.where(np.isfinite(R), _norm_pdf(np.where(np.isfinite(R), R, 0.0)), 0.0)
        pdf_lo = np.where(np.isfinite(L), _norm_pdf(np.where(np.isfinite(L), L, 0.0)), 0.0)
        ez = np.where(ok, pdf_lo - pdf_hi, 0.0)
        wm = mass * w_out[None, :, None]  # fiber-weighted masses
        value[lo:hi] = (wm * b).sum(axis=(1, 2)) + (ez * w_out[None, :, None] * s).sum(axis=(1, 2))
        mj = wm.sum(axis=1)  # (Bc, n) total cell masses
        grad[lo:hi] = mj @ slopes
        if want_cells:
            cells[lo:hi] = mj
    return value, grad, cells


def _smooth_2d_tied(v: MaxAffine, t: float, n_outer: int, X: np.ndarray,
                    want_cells: bool):
    """Smoothing of a 2-D max-affine with exactly tied fiber slopes.

    Pieces sharing a first slope coordinate compare through their offsets
    alone, which are affine in the single outer variable u; each piece is
    therefore active on an explicit u-interval. Integrating every piece over
    its own tail-clipped interval (Gauss-Legendre in u, so endpoints move
    smoothly with the evaluation point) keeps the field smooth AND
    symmetric-exact, where per-node winner-take-all would jump.
    """
    n = v.n_pieces
    st = math.sqrt(t)
    s = st * v.slopes[:, 0]
    cout = st * v.slopes[:, 1]
    ds = s[:, None] - s[None, :]
    dc = cout[:, None] - cout[None, :]
    tied = (ds == 0.0) & ~np.eye(n, dtype=bool)
    TAIL = 8.5  # Phi mass beyond is ~1e-17
    g, gw = np.polynomial.legendre.leggauss(2 * max(8, n_outer))
    g = 0.5 * (g + 1.0)  # nodes in (0, 1), endpoints excluded
    gw = 0.5 * gw
    B = X.shape[0]
    base = X @ v.slopes.T - v.intercepts  # (B, n) offsets at u = 0
    value = np.zeros(B)
    grad = np.zeros((B, 2))
    cells = np.zeros((B, n)) if want_cells else None
    for j in range(n):
        # tie constraints: base_j - base_k + (cout_j - cout_k) u >= 0
        ulo = np.full(B, -TAIL)
        uhi = np.full(B, TAIL)
        for k in np.nonzero(tied[j])[0]:
            coef = dc[j, k]
            ustar = (base[:, k] - base[:, j]) / coef
            if coef > 0:
                ulo = np.maximum(ulo, ustar)
            else:
                uhi = np.minimum(uhi, ustar)
        width = np.maximum(np.minimum(uhi, TAIL) - np.maximum(ulo, -TAIL), 0.0)
        if not width.any():
            continue
        u = np.maximum(ulo, -TAIL)[:, None] + width[:, None] * g[None, :]  # (B, Q)
        wq = width[:, None] * gw[None, :] * _norm_pdf(u)
        b = base[:, None, :] + u[..., None] * cout[None, None, :]  # (B, Q, n)
        dbj = b[..., j : j + 1] - b  # b_j - b_k at the nodes
        with np.errstate(divide="ignore", invalid="ignore"):
            crit = dbj / (-ds[j])  # fiber crossing with piece k
        L = np.where((ds[j] > 0)[None, None, :], crit, -np.inf).max(axis=-1)
        R = np.where((ds[j] < 0)[None, None, :], crit, np.inf).min(axis=-1)
        ok = L < R
        cdf_hi = np.where(np.isposinf(R), 1.0, ndtr(np.where(np.isfinite(R), R, 0.0)))
        cdf_lo = np.where(np.isneginf(L), 0.0, ndtr(np.where(np.isfinite(L), L, 0.0)))
        mass_f = np.where(ok, cdf_hi - cdf_lo, 0.0)  # (B, Q)
        pdf_hi = np.where(np.isfinite(R), _norm_pdf(np.where(np.isfinite(R), R, 0.0)), 0.0)
        pdf_lo = np.where(np.isfinite(L), _norm_pdf(np.where(np.isfinite(L), L, 0.0)), 0.0)
        ez = np.where(ok, pdf_lo - pdf_hi, 0.0)
        mj = (mass_f * wq).sum(axis=1)
        value += ((b[..., j] * mass_f + s[j] * ez) * wq).sum(axis=1)
        grad += mj[:, None] * v.slopes[j]
        if want_cells:
            cells[:, j] = mj
    return value, grad, cells


def _smooth_nd_exact(v: MaxAffine, t: float, rule: QuadratureRule, X: np.ndarray,
                     want_cells: bool):
    """Fiber-exact smoothing of an nd max-affine.

    Exactly tied first slope coordinates would make per-fiber winners flip
    discontinuously; in 2-D the tie structure is resolved exactly, in higher
    dimensions a deterministic rotation into generic position (seeded from
    the slope bytes) removes the ties.
    """
    s0 = np.sort(v.slopes[:, 0])
    has_ties = bool(np.any(np.diff(s0) == 0.0))
    if has_ties and v.dim == 2:
        n_outer = len(rule.axis_nodes) if rule.is_gh else 24
        return _smooth_2d_tied(v, t, n_outer, X, want_cells)
    Q = np.eye(v.dim) if not has_ties else _generic_rotation(v.slopes)
    z_out, w_out = _outer_tensor(rule, v.dim - 1)
    value, grad, cells = _smooth_fiber_exact(
        v.slopes @ Q.T, v.intercepts, t, z_out, w_out, X @ Q.T, want_cells
    )
    return value, grad @ Q, cells


def _smooth_nodes(f, t: float, rule: QuadratureRule, X: np.ndarray, want_cells: bool):
    """Literal node sums: value/grad/cells from argmax (or analytic grad) per node."""
    st = math.sqrt(t)
    B = X.shape[0]
    pts = X[:, None, :] + st * rule.nodes[None, :, :]  # (B, N, d)
    if isinstance(f, MaxAffine):
        scores = pts @ f.slopes.T - f.intercepts  # (B, N, n)
        act = scores.argmax(axis=-1)
        value = (scores.max(axis=-1) * rule.weights).sum(axis=1)
        onehot_masses = np.zeros((B, f.n_pieces))
        for q in range(B):  # bincount per row; B is small on this path
            onehot_masses[q] = np.bincount(act[q], weights=rule.weights, minlength=f.n_pieces)
        grad = onehot_masses @ f.slopes
        return value, grad, (onehot_masses if want_cells else None)
    vals = f.values(pts.reshape(-1, f.dim)).reshape(B, -1)
    grads = f.gradients(pts.reshape(-1, f.dim)).reshape(B, -1, f.dim)
    value = vals @ rule.weights
    grad = np.einsum("bnd,n->bd", grads, rule.weights)
    return value, grad, None


def smooth_eval(f, t: float, rule: QuadratureRule, X: np.ndarray,
                want_cells: bool = False, method: str = "auto"):
    """Batched (value, grad, cells) of f * gamma^t at rows of X.

    method "auto" uses closed forms where available (exact 1-D / fiber-exact
    max-affine, closed-form smoothing of AnalyticConvex); "quadrature" forces
    the literal node sums of the rule.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if t <= 0.0:
        raise QuadratureError("smoothing variance t must be positive")
    if rule.dim != X.shape[1]:
        raise QuadratureError(f"rule dim {rule.dim} != point dim {X.shape[1]}")
    if isinstance(f, MaxAffine):
        if f.dim != X.shape[1]:
            raise QuadratureError(f"potential dim {f.dim} != point dim {X.shape[1]}")
        if method == "auto":
            if f.dim == 1:
                return _smooth_1d_exact(f, t, X, want_cells)
            return _smooth_nd_exact(f, t, rule, X, want_cells)
        return _smooth_nodes(f, t, rule, X, want_cells)
    if method == "auto" and getattr(f, "smoothed", None) is not None:
        value, grad = f.smoothed(X, t)
        return np.asarray(value, dtype=float), np.asarray(grad, dtype=float), None
    return _smooth_nodes(f, t, rule, X, want_cells)


def gaussian_smooth(f, t: float, rule: QuadratureRule, x: np.ndarray,
                    method: str = "auto") -> tuple[float, np.ndarray]:
    """Value and gradient of f * gamma^t at a single point x.

    The gradient is (grad f) * gamma^t; for max-affine f the gradient of a
    piece is its slope, ties broken by lowest index. See `smooth_eval` for
    the method switch.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    value, grad, _ = smooth_eval(f, t, rule, x[None, :], method=method)
    return float(value[0]), grad[0]


# ---------------------------------------------------------------------------
# inversion of the smoothed gradient (the zeta map)


def _affine_span_rank(slopes: np.ndarray) -> int:
    centered = slopes - slopes.mean(axis=0)
    if slopes.shape[0] == 1:
        return 0
    s = np.linalg.svd(centered, compute_uv=False)
    return int(np.sum(s > 1e-12 * max(1.0, s[0])))


_NEWTON_MAX_ITER = 60
_ARMIJO = 1e-4


def smoothed_grad_inverse(v, x: np.ndarray, rule: QuadratureRule,
                          tol: float = 1e-9, x0: np.ndarray | None = None) -> np.ndarray:
    """Solve (grad v * gamma)(zeta) = x for zeta, the inverse smoothed gradient.

    Maximizes the strictly concave zeta -> <zeta, x> - (v * gamma)(zeta) by
    damped Newton (Armijo backtracking, parameter 1e-4, at most 60 steps);
    the Hessian is estimated by central finite differences of the smoothed
    gradient. Targets outside int conv{slopes} make the iterates diverge,
    detected by |zeta| > 50 (1 + |x|).

    Raises
    ------
    OutOfRangeError  when x is outside the range of the smoothed gradient.
    RankError        when the slopes do not affinely span R^d.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    d = x.shape[0]
    if isinstance(v, MaxAffine):
        if _affine_span_rank(v.slopes) < d:
            raise RankError("slopes do not affinely span the ambient space")

    def grad_at(pts: np.ndarray) -> np.ndarray:
        return smooth_eval(v, 1.0, rule, pts)[1]

    def value_at(pt: np.ndarray) -> float:
        return float(smooth_eval(v, 1.0, rule, pt[None, :])[0][0])

    zeta = np.array(x if x0 is None else x0, dtype=float)
    bound = 50.0 * (1.0 + float(np.linalg.norm(x)))
    h = 1e-5
    for _ in range(_NEWTON_MAX_ITER):
        probes = np.vstack([zeta[None, :], zeta + h * np.eye(d), zeta - h * np.eye(d)])
        G = grad_at(probes)
        r = G[0] - x
        if float(np.linalg.norm(r)) <= tol:
            return zeta
        J = (G[1 : 1 + d] - G[1 + d :]).T / (2.0 * h)
        try:
            step = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError:
            step = -r
        if not np.all(np.isfinite(step)):
            step = -r
        # Armijo backtracking on the concave objective <zeta,x> - (v*gamma)(zeta);
        # skipped when the predicted gain is below objective rounding noise,
        # where the test would reject even the pure Newton step
        obj0 = float(zeta @ x) - value_at(zeta)
        slope = float(-r @ step)  # directional derivative, r = grad(v*gamma)-x
        s = 1.0
        if abs(slope) > 1e-14 * (1.0 + abs(obj0)):
            for _ in range(30):
                cand = zeta + s * step
                if float(cand @ x) - value_at(cand) >= obj0 + _ARMIJO * s * slope:
                    break
                s *= 0.5
        zeta = zeta + s * step
        if float(np.linalg.norm(zeta)) > bound:
            raise OutOfRangeError(
                f"iterates diverged (|zeta| > {bound:.3g}); target outside the "
                "interior of the slope hull"
            )
    raise OutOfRangeError(
        f"no convergence to tol={tol:g} in {_NEWTON_MAX_ITER} Newton steps; "
        "target at or outside the smoothed-gradient range"
    )
