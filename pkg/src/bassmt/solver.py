"""Bass fixed-point solvers.

One dimension: the quantile iteration. Given the current initial law
alpha_n, rearrange alpha_n * gamma monotonically onto nu to get the
candidate derivative v_n' = F_nu^{-1} o F_{alpha_n * gamma}, then pull mu
back through its smoothing: alpha_{n+1} = (v_n' * gamma)^{-1}(mu). Stop
when the alphas settle in W_2. With discrete nu everything is closed-form
in Phi, so the state is just the alpha atoms; with a quantile-function nu
the derivative is kept as a monotone table on a fixed quantile grid.

Several dimensions (discrete nu): outer loop on the intercepts c of
v = max_j (<y_j, x> - c_j), inner loop solving (grad v * gamma)(zeta_i) = x_i
per mu-atom. The intercepts move by the damped multiplicative rule
c_j += eta (log nu_hat_j - log nu_j), re-gauged to sum_j nu_j c_j = 0, with
a fixed quadrature rule across iterations (common random numbers).

Existence requires irreducibility of (mu, nu); the pair is gated up front
rather than letting the iteration diverge.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtr, ndtri

from .convexfn import (
    AnalyticConvex,
    MaxAffine,
    QuadratureRule,
    _norm_pdf,
    default_rule,
    parse_quad_spec,
    smooth_eval,
    smoothed_grad_inverse,
)
from .dualeval import DualCertificate, relaxed_dual
from .errors import (
    DimensionError,
    MaxIterationsError,
    NotConvexOrderError,
    NotIrreducibleError,
)
from .measures import (
    DiscreteMeasure,
    MartingaleCoupling,
    QuantileFunction,
    affine_hull,
    check_convex_order,
    check_irreducible,
)
from .transport import mcov_bass_kernel

GAUGE = "nu-weighted-intercepts-zero"


@dataclass(frozen=True)
class SolverOptions:
    """Knobs of both solvers; defaults follow the per-dimension conventions.

    quad is a spec string ("gh:64", "mc:100000:7") or a QuadratureRule;
    None picks the dimension default. damping/max_iter of None resolve to
    1.0/500 in dim 1 and 0.5/2000 otherwise.
    """

    quad: str | QuadratureRule | None = None
    max_iter: int | None = None
    tol_marginal: float = 1e-4
    tol_barycenter: float = 1e-6
    damping: float | None = None
    grid_size: int = 513
    seed: int = 0
    threads: int = 1

    def __post_init__(self) -> None:
        if self.tol_marginal <= 0 or self.tol_barycenter <= 0:
            raise ValueError("tolerances must be positive")
        if self.grid_size < 3 or self.grid_size % 2 == 0:
            raise ValueError("quantile grid size must be odd and at least 3")
        if self.damping is not None and not 0.0 < self.damping <= 1.0:
            raise ValueError("damping must lie in (0, 1]")
        if self.max_iter is not None and self.max_iter < 1:
            raise ValueError("max_iter must be positive")
        if self.threads < 1:
            raise ValueError("threads must be positive")

    def rule_for(self, dim: int, n_pieces: int | None = None) -> QuadratureRule:
        if isinstance(self.quad, QuadratureRule):
            if self.quad.dim != dim:
                raise DimensionError(f"quadrature rule has dim {self.quad.dim}, need {dim}")
            return self.quad
        if isinstance(self.quad, str):
            return parse_quad_spec(self.quad, dim)
        return default_rule(dim, n_pieces, seed=self.seed)


class MonotoneTable:
    """Nondecreasing piecewise-linear function on a grid, with linear
    end-slope extrapolation and a closed-form Gaussian smoothing.

    Decomposing into f(x) = y_0 + s_0 (x - x_0) + sum_g d_g relu(x - x_g)
    makes (f * gamma^s)(z) a sum of u Phi(u) + phi(u) terms: exact, smooth
    and strictly increasing, so inverses are safe bisections.
    """

    def __init__(self, x: np.ndarray, y: np.ndarray) -> None:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if x.ndim != 1 or x.shape != y.shape or len(x) < 2:
            raise DimensionError("need matching 1-D grids with at least 2 nodes")
        if np.any(np.diff(x) <= 0):
            raise ValueError("grid must be strictly increasing")
        if np.any(np.diff(y) < -1e-12):
            raise ValueError("values must be nondecreasing")
        self.x = x
        self.y = y
        self._slopes = np.diff(y) / np.diff(x)
        self._deltas = np.diff(self._slopes)  # kink jumps at x[1:-1]

    def __call__(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        out = np.interp(pts, self.x, self.y)
        lo, hi = pts < self.x[0], pts > self.x[-1]
        out = np.where(lo, self.y[0] + self._slopes[0] * (pts - self.x[0]), out)
        out = np.where(hi, self.y[-1] + self._slopes[-1] * (pts - self.x[-1]), out)
        return out

    def smoothed(self, pts, t: float = 1.0) -> np.ndarray:
        """(f * gamma^t)(pts), exact for the piecewise-linear table."""
        pts = np.asarray(pts, dtype=float)
        st = math.sqrt(t)
        u = (pts[..., None] - self.x[1:-1]) / st
        ramps = st * (u * ndtr(u) + _norm_pdf(u))  # E relu(pts - x_g + st Z)
        return self.y[0] + self._slopes[0] * (pts - self.x[0]) + ramps @ self._deltas

    def smoothed_inverse(self, targets, t: float = 1.0, tol: float = 1e-12) -> np.ndarray:
        """Solve (f * gamma^t)(z) = target per entry by bracketed bisection."""
        targets = np.atleast_1d(np.asarray(targets, dtype=float))
        lo = np.full_like(targets, self.x[0] - 1.0)
        hi = np.full_like(targets, self.x[-1] + 1.0)
        for _ in range(200):  # expand until the bracket straddles
            bad = self.smoothed(lo, t) > targets
            if not bad.any():
                break
            lo[bad] = 2 * lo[bad] - hi[bad]
        for _ in range(200):
            bad = self.smoothed(hi, t) < targets
            if not bad.any():
                break
            hi[bad] = 2 * hi[bad] - lo[bad]
        for _ in range(100):
            mid = 0.5 * (lo + hi)
            high = self.smoothed(mid, t) > targets
            hi = np.where(high, mid, hi)
            lo = np.where(high, lo, mid)
            if float((hi - lo).max()) < tol:
                break
        return 0.5 * (lo + hi)

    def to_dict(self) -> dict:
        return {"x": self.x.tolist(), "y": self.y.tolist()}


@dataclass(frozen=True)
class BassSolution:
    """Converged (v, alpha) pair: v's slopes are the nu-atoms, alpha = zeta(mu).

    For quantile-form nu the potential derivative is a MonotoneTable in
    v_prime instead of a MaxAffine in v. w2_steps records the W_2 distances
    between successive alpha iterates (convergence-rate diagnostics);
    reduction records an affine-hull reduction when one was applied.
    """

    dim: int
    alpha: DiscreteMeasure
    v: MaxAffine | AnalyticConvex | None = None
    v_prime: MonotoneTable | None = None
    gauge: str = GAUGE
    residuals: dict = field(default_factory=dict)
    iterations: int = 0
    converged: bool = False
    w2_steps: tuple = ()
    reduction: dict | None = None

    @property
    def kind(self) -> str:
        if self.v is None:
            return "table"
        return "max-affine" if isinstance(self.v, MaxAffine) else "analytic"

    def to_dict(self) -> dict:
        if self.kind == "analytic":
            raise ValueError("analytic potentials have no serialized form")
        out = {
            "dim": self.dim,
            "alpha": self.alpha.to_dict(),
            "gauge": self.gauge,
            "residuals": dict(self.residuals),
            "iterations": self.iterations,
            "converged": self.converged,
        }
        if self.v is not None:
            out["nu_atoms"] = self.v.slopes.tolist()
            out["intercepts"] = self.v.intercepts.tolist()
        else:
            out["v_prime_table"] = self.v_prime.to_dict()
        if self.reduction is not None:
            out["reduction"] = {
                "origin": self.reduction["origin"].tolist(),
                "basis": self.reduction["basis"].tolist(),
            }
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "BassSolution":
        alpha = DiscreteMeasure.from_dict(d["alpha"])
        common = dict(
            dim=int(d["dim"]),
            alpha=alpha,
            gauge=d.get("gauge", GAUGE),
            residuals=dict(d.get("residuals", {})),
            iterations=int(d.get("iterations", 0)),
            converged=bool(d.get("converged", True)),
        )
        red = d.get("reduction")
        if red is not None:
            common["reduction"] = {
                "origin": np.asarray(red["origin"], dtype=float),
                "basis": np.asarray(red["basis"], dtype=float),
            }
        if "v_prime_table" in d:
            tab = d["v_prime_table"]
            return cls(v_prime=MonotoneTable(tab["x"], tab["y"]), **common)
        return cls(v=MaxAffine(d["nu_atoms"], d["intercepts"]), **common)


# ---------------------------------------------------------------------------
# one dimension


def _cdf_mix(t, zeta: np.ndarray, w: np.ndarray):
    """F_{alpha * gamma}(t) for discrete alpha."""
    return ndtr(np.subtract.outer(t, zeta)) @ w


def _thresholds(zeta: np.ndarray, w: np.ndarray, cum: np.ndarray) -> np.ndarray:
    """Interior cell edges t_j with F_{alpha * gamma}(t_j) = cum_j."""
    lo_z, hi_z = zeta.min(), zeta.max()
    out = np.empty(len(cum))
    for j, c in enumerate(cum):
        q = ndtri(c)
        # bracket [min zeta + q, max zeta + q] is exact; pad for fp endpoints
        a, b = lo_z + q - 1e-6, hi_z + q + 1e-6
        while _cdf_mix(a, zeta, w) > c:
            a -= 1.0
        while _cdf_mix(b, zeta, w) < c:
            b += 1.0
        out[j] = brentq(lambda t: _cdf_mix(t, zeta, w) - c, a, b,
                        xtol=1e-13, rtol=8.9e-16)
    return out


def _smoothed_step_value(zeta, y: np.ndarray, edges: np.ndarray):
    """(v' * gamma)(zeta) when v' is the step function with values y on the
    cells cut by edges: y_0 + sum_j (y_{j+1}-y_j) Phi(zeta - edge_j)."""
    zeta = np.asarray(zeta, dtype=float)
    dy = np.diff(y)
    return y[0] + ndtr(zeta[..., None] - edges) @ dy


def _invert_smoothed_step(targets: np.ndarray, y: np.ndarray, edges: np.ndarray) -> np.ndarray:
    out = np.empty(len(targets))
    for i, x in enumerate(targets):
        lo, hi = edges[0] - 1.0, edges[-1] + 1.0
        while _smoothed_step_value(np.array([lo]), y, edges)[0] > x:
            lo = 2 * lo - hi
        while _smoothed_step_value(np.array([hi]), y, edges)[0] < x:
            hi = 2 * hi - lo
        out[i] = brentq(lambda z: float(_smoothed_step_value(np.array([z]), y, edges)[0]) - x,
                        lo, hi, xtol=1e-14, rtol=8.9e-16)
    return out


def _solve_1d_discrete(mu: DiscreteMeasure, nu: DiscreteMeasure,
                       opts: SolverOptions) -> BassSolution:
    ns = nu.sorted_1d()
    y, nw = ns.atoms[:, 0], ns.weights
    x, mw = mu.atoms[:, 0], mu.weights
    cum = np.cumsum(nw)[:-1]
    max_iter = opts.max_iter if opts.max_iter is not None else 500
    zeta = x.copy()
    steps: list[float] = []
    edges = _thresholds(zeta, mw, cum)
    for it in range(1, max_iter + 1):
        new = _invert_smoothed_step(x, y, edges)
        step = math.sqrt(float(mw @ np.square(new - zeta)))
        steps.append(step)
        zeta = new
        edges = _thresholds(zeta, mw, cum)
        if step < opts.tol_barycenter:
            break
    else:
        it = max_iter
    # residuals at the final (v, alpha)
    bary = float(np.abs(_smoothed_step_value(zeta, y, edges) - x).max())
    cells = np.diff(ndtr(np.concatenate([[-np.inf], edges, [np.inf]])[None, :] - zeta[:, None]),
                    axis=1)
    marg = float(np.abs(mw @ cells - nw).max())
    converged = (steps[-1] < opts.tol_barycenter and marg <= opts.tol_marginal
                 and bary <= opts.tol_barycenter)
    residuals = {"marginal": marg, "barycenter": bary}
    if not converged:
        raise MaxIterationsError(it, residuals)
    intercepts = np.concatenate([[0.0], np.cumsum(np.diff(y) * edges)])
    v = MaxAffine(y[:, None], intercepts).regauged(nw)
    alpha = DiscreteMeasure(zeta[:, None], mw)
    return BassSolution(dim=1, alpha=alpha, v=v, residuals=residuals,
                        iterations=it, converged=True, w2_steps=tuple(steps))


def _quantiles_of(m, grid: np.ndarray) -> np.ndarray:
    """Quantiles of a DiscreteMeasure or QuantileFunction on the grid."""
    if isinstance(m, QuantileFunction):
        return np.asarray(m(grid), dtype=float)
    ms = m.sorted_1d()
    cum = np.cumsum(ms.weights)
    idx = np.searchsorted(cum, grid, side="left")
    return ms.atoms[np.minimum(idx, m.n_atoms - 1), 0]


def _solve_1d_quantile(mu, nu, opts: SolverOptions) -> BassSolution:
    G = opts.grid_size
    grid = (np.arange(G) + 0.5) / G
    if isinstance(mu, DiscreteMeasure):
        x, mw = mu.atoms[:, 0], mu.weights
    else:
        x, mw = _quantiles_of(mu, grid), np.full(G, 1.0 / G)
    y_target = _quantiles_of(nu, grid)
    max_iter = opts.max_iter if opts.max_iter is not None else 500
    zeta = x.copy()
    steps: list[float] = []
    table = None
    for it in range(1, max_iter + 1):
        # x-nodes: quantiles of alpha_n * gamma on the same grid
        q = ndtri(grid)
        lo = np.full(G, zeta.min()) + q
        hi = np.full(G, zeta.max()) + q
        for _ in range(90):
            mid = 0.5 * (lo + hi)
            high = _cdf_mix(mid, zeta, mw) > grid
            hi = np.where(high, mid, hi)
            lo = np.where(high, lo, mid)
        nodes = 0.5 * (lo + hi)
        nodes, keep = np.unique(nodes, return_index=True)
        table = MonotoneTable(nodes, np.maximum.accumulate(y_target[keep]))
        new = table.smoothed_inverse(x)
        step = math.sqrt(float(mw @ np.square(new - zeta)))
        steps.append(step)
        zeta = new
        if step < opts.tol_barycenter:
            break
    else:
        it = max_iter
    bary = float(np.abs(table.smoothed(zeta) - x).max())
    # marginal defect: rebuild the grid at the final alpha and compare tables
    q = ndtri(grid)
    lo = np.full(G, zeta.min()) + q
    hi = np.full(G, zeta.max()) + q
    for _ in range(90):
        mid = 0.5 * (lo + hi)
        high = _cdf_mix(mid, zeta, mw) > grid
        hi = np.where(high, mid, hi)
        lo = np.where(high, lo, mid)
    marg = float(np.abs(table(0.5 * (lo + hi)) - y_target).max())
    converged = steps[-1] < opts.tol_barycenter and bary <= opts.tol_barycenter
    residuals = {"marginal": marg, "barycenter": bary}
    if not converged:
        raise MaxIterationsError(it, residuals)
    alpha = DiscreteMeasure(zeta[:, None], mw)
    return BassSolution(dim=1, alpha=alpha, v_prime=table, residuals=residuals,
                        iterations=it, converged=True, w2_steps=tuple(steps))


def solve_bass_1d(mu, nu, opts: SolverOptions | None = None) -> BassSolution:
    """One-dimensional Bass solver (quantile fixed point).

    mu and nu may each be a DiscreteMeasure or a QuantileFunction. Convex
    order and irreducibility are checked when both are discrete; otherwise a
    warning notes that the preconditions are assumed.
    """
    opts = opts or SolverOptions()
    both_discrete = isinstance(mu, DiscreteMeasure) and isinstance(nu, DiscreteMeasure)
    if both_discrete:
        if mu.dim != 1 or nu.dim != 1:
            raise DimensionError("solve_bass_1d requires 1-D measures")
        if not check_convex_order(mu, nu):
            raise NotConvexOrderError("mu is not dominated by nu in convex order")
        ok, witness = check_irreducible(mu, nu)
        if not ok:
            raise NotIrreducibleError(witness)
        if nu.n_atoms == 1:
            v = MaxAffine(nu.atoms, [0.0])
            return BassSolution(dim=1, alpha=mu, v=v,
                                residuals={"marginal": 0.0, "barycenter": 0.0},
                                iterations=0, converged=True)
        return _solve_1d_discrete(mu, nu, opts)
    warnings.warn("convex order and irreducibility are assumed for "
                  "quantile-form marginals, not checked")
    return _solve_1d_quantile(mu, nu, opts)


# ---------------------------------------------------------------------------
# several dimensions


def _match_nu_weights(slopes: np.ndarray, nu_atoms: np.ndarray,
                      nu_weights: np.ndarray) -> np.ndarray:
    """nu weights aligned with a slope matrix whose rows are the nu atoms,
    possibly sorted or projected (matched by nearest atom)."""
    out = np.empty(len(slopes))
    for j, row in enumerate(np.atleast_2d(slopes)):
        out[j] = nu_weights[int(np.argmin(np.linalg.norm(nu_atoms - row, axis=1)))]
    return out


def _reduce_embed(sol: BassSolution, nu: DiscreteMeasure, origin: np.ndarray,
                  basis: np.ndarray) -> BassSolution:
    """Re-embed a solution computed in affine-hull coordinates.

    Slopes return to the original atoms; intercepts pick up <y_j, origin> so
    the cells in R^d cut the same regions as the reduced cells, then the
    gauge is restored.
    """
    d = origin.shape[0]
    slopes = sol.v.slopes @ basis.T + origin  # y_j = origin + Q y'_j
    intercepts = sol.v.intercepts + slopes @ origin
    nw = _match_nu_weights(slopes, nu.atoms, nu.weights)
    v = MaxAffine(slopes, intercepts).regauged(nw)
    alpha = DiscreteMeasure(sol.alpha.atoms @ basis.T + origin, sol.alpha.weights)
    return BassSolution(dim=d, alpha=alpha, v=v, residuals=dict(sol.residuals),
                        iterations=sol.iterations, converged=sol.converged,
                        w2_steps=sol.w2_steps,
                        reduction={"origin": origin, "basis": basis})


def solve_bass_nd(mu: DiscreteMeasure, nu: DiscreteMeasure,
                  opts: SolverOptions | None = None) -> BassSolution:
    """d-dimensional Bass solver for discrete marginals.

    Outer loop on intercepts (damped log-mass update), inner Newton solves
    of (grad v * gamma)(zeta_i) = x_i warm-started across iterations. If the
    nu-atoms do not affinely span, the instance is solved in its affine hull
    and re-embedded (recorded in the reduction field).
    """
    opts = opts or SolverOptions()
    if mu.dim != nu.dim:
        raise DimensionError("marginals must share a dimension")
    if not check_convex_order(mu, nu):
        raise NotConvexOrderError("mu is not dominated by nu in convex order")
    ok, witness = check_irreducible(mu, nu)
    if not ok:
        raise NotIrreducibleError(witness)
    d = nu.dim
    if nu.n_atoms == 1:
        v = MaxAffine(nu.atoms, [0.0])
        return BassSolution(dim=d, alpha=mu, v=v,
                            residuals={"marginal": 0.0, "barycenter": 0.0},
                            iterations=0, converged=True)
    origin, basis = affine_hull(nu.atoms)
    r = basis.shape[1]
    if r < d:
        mu_r = DiscreteMeasure((mu.atoms - origin) @ basis, mu.weights)
        nu_r = DiscreteMeasure((nu.atoms - origin) @ basis, nu.weights)
        sub = solve_bass_1d(mu_r, nu_r, opts) if r == 1 else _solve_nd_full(mu_r, nu_r, opts)
        return _reduce_embed(sub, nu, origin, basis)
    if d == 1:
        return _solve_1d_discrete(mu, nu, opts)
    return _solve_nd_full(mu, nu, opts)


def _solve_nd_full(mu: DiscreteMeasure, nu: DiscreteMeasure,
                   opts: SolverOptions) -> BassSolution:
    d, n = nu.dim, nu.n_atoms
    x, mw = mu.atoms, mu.weights
    y, nw = nu.atoms, nu.weights
    rule = opts.rule_for(d, n_pieces=n)
    eta = opts.damping if opts.damping is not None else 0.5
    max_iter = opts.max_iter if opts.max_iter is not None else 2000
    c = np.zeros(n)
    zeta = x.copy()
    residuals = {"marginal": math.inf, "barycenter": math.inf}

    def solve_atom(args):
        v, i = args
        return smoothed_grad_inverse(v, x[i], rule, tol=opts.tol_barycenter, x0=zeta[i])

    pool = ThreadPoolExecutor(max_workers=opts.threads) if opts.threads > 1 else None
    try:
        for it in range(1, max_iter + 1):
            v = MaxAffine(y, c - nw @ c)
            work = [(v, i) for i in range(len(x))]
            if pool is not None:
                zs = list(pool.map(solve_atom, work))
            else:
                zs = [solve_atom(a) for a in work]
            zeta = np.vstack(zs)
            _, grads, cells = smooth_eval(v, 1.0, rule, zeta, want_cells=True)
            nu_hat = mw @ cells
            residuals = {
                "marginal": float(np.abs(nu_hat - nw).max()),
                "barycenter": float(np.linalg.norm(grads - x, axis=1).max()),
            }
            if (residuals["marginal"] <= opts.tol_marginal
                    and residuals["barycenter"] <= opts.tol_barycenter):
                alpha = DiscreteMeasure(zeta, mw)
                return BassSolution(dim=d, alpha=alpha, v=v, residuals=residuals,
                                    iterations=it, converged=True)
            c = c + eta * (np.log(np.maximum(nu_hat, 1e-12)) - np.log(nw))
    finally:
        if pool is not None:
            pool.shutdown(wait=False)
    raise MaxIterationsError(max_iter, residuals)


# ---------------------------------------------------------------------------
# certification


def duality_gap_report(sol: BassSolution, mu: DiscreteMeasure, nu: DiscreteMeasure,
                       rule: QuadratureRule | None = None) -> DualCertificate:
    """Primal/dual certificate at a converged solution.

    Primal: P = sum_i mu_i E[<grad v(zeta_i + Z), Z>]. Dual: the relaxed
    dual along the kernel coupling pi_ij = mu_i m_j(zeta_i). Solutions that
    were reduced to an affine hull are certified in hull coordinates (both
    values are invariant under the isometric re-embedding).
    """
    if sol.v is None:
        raise DimensionError("certification needs a max-affine solution")
    v, zeta, mw = sol.v, sol.alpha.atoms, sol.alpha.weights
    mu_atoms = mu.atoms
    if sol.reduction is not None:
        origin, basis = sol.reduction["origin"], sol.reduction["basis"]
        slopes = (v.slopes - origin) @ basis
        nw = _match_nu_weights(slopes, (nu.atoms - origin) @ basis, nu.weights)
        v = MaxAffine(slopes, v.intercepts - v.slopes @ origin).regauged(nw)
        zeta = (zeta - origin) @ basis
        mu_atoms = (mu.atoms - origin) @ basis
    if rule is None:
        rule = default_rule(v.dim, v.n_pieces)
    elif rule.dim != v.dim:
        # the certificate runs in hull coordinates; rebuild at reduced rank
        if rule.is_gh:
            rule = QuadratureRule.gauss_hermite(len(rule.axis_nodes), v.dim)
        else:
            rule = QuadratureRule.monte_carlo(len(rule.weights), v.dim, seed=rule.seed)
    meta = {"kind": rule.kind, "n_nodes": len(rule.weights)}
    primal = float(sum(w * mcov_bass_kernel(v, z, rule) for z, w in zip(zeta, mw)))
    if v.n_pieces == 1:
        # psi is an indicator pinned at the single slope: both values vanish
        return DualCertificate(0.0, primal, -primal, sol.gauge, meta, 1e-12)
    cells = smooth_eval(v, 1.0, rule, zeta, want_cells=True)[2]
    matrix = mw[:, None] * cells
    col = matrix.sum(axis=0)
    keep = col > 0.0
    target = DiscreteMeasure(v.slopes[keep], col[keep] / col[keep].sum())
    src = DiscreteMeasure(mu_atoms, mw)
    tol = max(1e-9, 10.0 * sol.residuals.get("barycenter", 0.0),
              10.0 * sol.residuals.get("marginal", 0.0))
    pi = MartingaleCoupling(src, target, matrix[:, keep], tol=tol)
    dual = relaxed_dual(v, pi, rule)
    gap = dual - primal
    tolerance = 1e-9 if v.dim == 1 else 1e-3 * (1.0 + abs(primal))
    return DualCertificate(dual, primal, gap, sol.gauge, meta, tolerance)
