"""Discrete measures on R^d: moments, 1-D transforms, convex order,
martingale couplings, and the irreducibility test.

A martingale coupling of (mu, nu) is a joint matrix pi >= 0 with row sums
mu_i, column sums nu_j, and row barycenters sum_j pi_ij y_j = mu_i x_i.
Convex order mu <=_c nu is equivalent to the existence of such a coupling
(Strassen); irreducibility additionally demands that every charged atom pair
can communicate through some coupling, which for discrete marginals reduces
to one small LP per atom pair.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import linprog
from .errors import DimensionError, InfeasibleError

_WEIGHT_SUM_TOL = 1e-12
_COUPLING_TOL = 1e-9
_CHARGE_TOL = 1e-10


def _canonical_atoms(atoms: np.ndarray) -> np.ndarray:
    a = np.asarray(atoms, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2 or a.shape[0] == 0:
        raise DimensionError("atoms must be a non-empty (n, d) array")
    return a + 0.0  # normalizes -0.0 so duplicate detection is bitwise-safe


@dataclass(frozen=True)
class DiscreteMeasure:
    """Weighted atom cloud in R^d.

    Weights are strictly positive and sum to 1 within 1e-12; duplicate atoms
    are merged on construction by weight addition, preserving first-occurrence
    order (the irreducibility witness scan relies on input order).
    """

    atoms: np.ndarray
    weights: np.ndarray

    def __init__(self, atoms, weights) -> None:
        a = _canonical_atoms(atoms)
        w = np.asarray(weights, dtype=float)
        if w.ndim != 1 or w.shape[0] != a.shape[0]:
            raise DimensionError("weights must be one scalar per atom")
        if np.any(w <= 0.0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be strictly positive and finite")
        if not np.all(np.isfinite(a)):
            raise ValueError("atoms must be finite")
        if abs(w.sum() - 1.0) > _WEIGHT_SUM_TOL:
            raise ValueError(f"weights sum to {w.sum()!r}, expected 1 within 1e-12")
        # merge exact duplicates, first occurrence wins the slot
        seen: dict[bytes, int] = {}
        idx = []
        acc = []
        for i in range(a.shape[0]):
            key = a[i].tobytes()
            if key in seen:
                acc[seen[key]] += w[i]
            else:
                seen[key] = len(idx)
                idx.append(i)
                acc.append(w[i])
        object.__setattr__(self, "atoms", np.ascontiguousarray(a[idx]))
        object.__setattr__(self, "weights", np.asarray(acc, dtype=float))
        self.atoms.setflags(write=False)
        self.weights.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.atoms.shape[1]

    @property
    def n_atoms(self) -> int:
        return self.atoms.shape[0]

    def sorted_1d(self) -> "DiscreteMeasure":
        """Copy with atoms in increasing order (dim 1 only)."""
        if self.dim != 1:
            raise DimensionError("sorted_1d requires dim 1")
        order = np.argsort(self.atoms[:, 0], kind="stable")
        return DiscreteMeasure(self.atoms[order], self.weights[order])

    def to_dict(self) -> dict:
        return {"atoms": self.atoms.tolist(), "weights": self.weights.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "DiscreteMeasure":
        return cls(np.asarray(d["atoms"], dtype=float), np.asarray(d["weights"], dtype=float))


@dataclass(frozen=True)
class QuantileFunction:
    """Continuous 1-D marginal given through its quantile function.

    `fn` maps u in (0,1) to the u-quantile, vectorized over numpy arrays and
    non-decreasing. Used by the 1-D solver for marginals like gamma that have
    no finite atom representation.
    """

    fn: object
    name: str = ""

    def __call__(self, u):
        return np.asarray(self.fn(np.asarray(u, dtype=float)), dtype=float)


@dataclass(frozen=True)
class MartingaleCoupling:
    """Joint weights pi_ij >= 0 between two discrete measures.

    Row sums match the source weights, column sums the target weights, and
    every source atom is the barycenter of its row kernel, all within `tol`
    (default 1e-9; couplings assembled from iterative solves may pass a looser
    tolerance reflecting their residuals).
    """

    source: DiscreteMeasure
    target: DiscreteMeasure
    matrix: np.ndarray
    tol: float = field(default=_COUPLING_TOL)

    def __post_init__(self) -> None:
        pi = np.asarray(self.matrix, dtype=float)
        object.__setattr__(self, "matrix", pi)
        m, n = self.source.n_atoms, self.target.n_atoms
        if pi.shape != (m, n):
            raise DimensionError(f"matrix shape {pi.shape}, expected {(m, n)}")
        if np.any(pi < -self.tol):
            raise ValueError("coupling has negative mass")
        scale = 1.0 + float(np.abs(self.source.atoms).max())
        row_err = np.max(np.abs(pi.sum(axis=1) - self.source.weights))
        col_err = np.max(np.abs(pi.sum(axis=0) - self.target.weights))
        bary = pi @ self.target.atoms
        want = self.source.weights[:, None] * self.source.atoms
        bary_err = np.max(np.abs(bary - want)) / scale
        if max(row_err, col_err, bary_err) > self.tol:
            raise ValueError(
                "coupling violates marginal/barycenter constraints: "
                f"row {row_err:.3e} col {col_err:.3e} bary {bary_err:.3e} tol {self.tol:.1e}"
            )

    def kernel(self, i: int) -> DiscreteMeasure:
        """Conditional kernel pi_x at source atom i, atoms restricted to charged targets."""
        row = self.matrix[i]
        mask = row > _CHARGE_TOL
        return DiscreteMeasure(self.target.atoms[mask], row[mask] / row[mask].sum())


# ---------------------------------------------------------------------------
# moments and 1-D transforms


def moments(m: DiscreteMeasure) -> tuple[np.ndarray, float]:
    """Barycenter sum w_i x_i and second moment sum w_i |x_i|^2."""
    bary = m.weights @ m.atoms
    second = float(m.weights @ np.sum(m.atoms**2, axis=1))
    return bary, second


def wasserstein2_1d(p: DiscreteMeasure, q: DiscreteMeasure) -> float:
    """W_2 between 1-D discrete measures via quantile matching.

    The comonotone coupling is optimal in dimension 1, so W_2^2 integrates
    |F_p^{-1} - F_q^{-1}|^2 over the common refinement of the two cumulative
    weight grids.
    """
    if p.dim != 1 or q.dim != 1:
        raise DimensionError("wasserstein2_1d requires dim 1")
    ps, qs = p.sorted_1d(), q.sorted_1d()
    xp, wp = ps.atoms[:, 0], ps.weights
    xq, wq = qs.atoms[:, 0], qs.weights
    cp = np.concatenate(([0.0], np.cumsum(wp)))
    cq = np.concatenate(([0.0], np.cumsum(wq)))
    grid = np.unique(np.concatenate((cp, cq)))
    grid[-1] = 1.0
    du = np.diff(grid)
    mid = (grid[:-1] + grid[1:]) / 2.0
    ip = np.minimum(np.searchsorted(cp[1:], mid, side="right"), len(xp) - 1)
    iq = np.minimum(np.searchsorted(cq[1:], mid, side="right"), len(xq) - 1)
    return float(np.sqrt(np.sum(du * (xp[ip] - xq[iq]) ** 2)))


# ---------------------------------------------------------------------------
# coupling LPs


def _coupling_lp(mu: DiscreteMeasure, nu: DiscreteMeasure, cost: np.ndarray | None):
    """Equality system of MT(mu, nu) as a dense LP; returns (c, A, b)."""
    m, n, d = mu.n_atoms, nu.n_atoms, mu.dim
    nv = m * n
    rows = m + n + m * d
    A = np.zeros((rows, nv))
    b = np.zeros(rows)
    for i in range(m):
        A[i, i * n : (i + 1) * n] = 1.0
        b[i] = mu.weights[i]
    for j in range(n):
        A[m + j, j::n] = 1.0
        b[m + j] = nu.weights[j]
    for i in range(m):
        for a in range(d):
            r = m + n + i * d + a
            A[r, i * n : (i + 1) * n] = nu.atoms[:, a]
            b[r] = mu.weights[i] * mu.atoms[i, a]
    c = np.zeros(nv) if cost is None else cost.ravel()
    return c, A, b


def find_mt_coupling(
    mu: DiscreteMeasure,
    nu: DiscreteMeasure,
    promote: tuple[int, int] | None = None,
) -> MartingaleCoupling:
    """Find a martingale coupling of (mu, nu), optionally maximizing one entry.

    Parameters
    ----------
    promote : (i, j) atom-index pair or None
        When given, the LP maximizes pi_ij over MT(mu, nu) and the achieved
        optimum is stored on the result as `promoted_mass`.

    Raises
    ------
    InfeasibleError
        When no coupling exists (the marginals are not in convex order).
    """
    if mu.dim != nu.dim:
        raise DimensionError("marginals must share a dimension")
    cost = None
    if promote is not None:
        i, j = promote
        cost = np.zeros((mu.n_atoms, nu.n_atoms))
        cost[i, j] = -1.0  # maximize pi_ij
    c, A, b = _coupling_lp(mu, nu, cost)
    res = linprog.solve_lp(c, A, b)
    if res.status != linprog.OPTIMAL:
        raise InfeasibleError(
            "no martingale coupling: marginal/barycenter system infeasible "
            f"({mu.n_atoms}x{nu.n_atoms} atoms)"
        )
    pi = res.x.reshape(mu.n_atoms, nu.n_atoms)
    coupling = MartingaleCoupling(mu, nu, pi)
    if promote is not None:
        object.__setattr__(coupling, "promoted_mass", float(pi[promote]))
    return coupling


def check_convex_order(mu: DiscreteMeasure, nu: DiscreteMeasure) -> bool:
    """True iff mu <=_c nu, i.e. a martingale coupling exists.

    In dimension 1 a fast path compares the potential functions
    u_m(k) = sum_i w_i |x_i - k| at all atom locations of both measures
    (u_mu <= u_nu everywhere iff it holds at the kinks, given equal means);
    higher dimensions run the coupling LP feasibility phase.
    """
    if mu.dim != nu.dim:
        raise DimensionError("marginals must share a dimension")
    if mu.dim == 1:
        scale = 1.0 + max(float(np.abs(mu.atoms).max()), float(np.abs(nu.atoms).max()))
        mean_mu = float(mu.weights @ mu.atoms[:, 0])
        mean_nu = float(nu.weights @ nu.atoms[:, 0])
        if abs(mean_mu - mean_nu) > _COUPLING_TOL * scale:
            return False
        ks = np.concatenate((mu.atoms[:, 0], nu.atoms[:, 0]))
        u_mu = np.abs(mu.atoms[:, 0][None, :] - ks[:, None]) @ mu.weights
        u_nu = np.abs(nu.atoms[:, 0][None, :] - ks[:, None]) @ nu.weights
        return bool(np.all(u_nu - u_mu >= -_COUPLING_TOL * scale))
    try:
        find_mt_coupling(mu, nu)
        return True
    except InfeasibleError:
        return False


def check_irreducible(
    mu: DiscreteMeasure, nu: DiscreteMeasure
) -> tuple[bool, tuple[np.ndarray, np.ndarray] | None]:
    """Atom-pairwise irreducibility test.

    For every atom pair (x_i, y_j) an LP maximizes pi_ij over MT(mu, nu); the
    pair is irreducible iff every optimum exceeds 1e-10. Countable convex
    combinations of the maximizing couplings reduce the charged-set condition
    to atom pairs, so this is exact for discrete marginals.

    Returns
    -------
    (True, None) if irreducible, else (False, (x_i, y_j)) with the first
    blocking pair in atom input order.

    Raises
    ------
    InfeasibleError when (mu, nu) is not in convex order.
    """
    for i in range(mu.n_atoms):
        for j in range(nu.n_atoms):
            coupling = find_mt_coupling(mu, nu, promote=(i, j))
            if coupling.promoted_mass <= _CHARGE_TOL:
                return False, (mu.atoms[i].copy(), nu.atoms[j].copy())
    return True, None


# ---------------------------------------------------------------------------
# geometry helper


def affine_hull(points: np.ndarray, tol: float = 1e-9) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal basis of the affine hull of a point cloud.

    Returns (origin, Q) with Q of shape (d, r) such that every point equals
    origin + Q @ coords for some coords in R^r; r is the numerical rank of the
    centered cloud at relative tolerance `tol`.
    """
    pts = np.asarray(points, dtype=float)
    origin = pts.mean(axis=0)
    centered = pts - origin
    if pts.shape[0] == 1:
        return origin, np.zeros((pts.shape[1], 0))
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    cutoff = tol * (s[0] if s.size and s[0] > 0 else 1.0)
    r = int(np.sum(s > cutoff))
    return origin, vt[:r].T


# ---------------------------------------------------------------------------
# CSV interface: header `weight,x1,...,xd`


def read_measure_csv(path) -> DiscreteMeasure:
    """Load a measure from CSV with header `weight,x1,...,xd`.

    Weights need not be normalized: a deviation of the sum from 1 beyond 1e-6
    triggers a warning and renormalization; smaller deviations are rescaled
    silently to keep the constructor's 1e-12 invariant.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [
            r
            for r in csv.reader(fh)
            if r and any(f.strip() for f in r) and not r[0].lstrip().startswith("#")
        ]
    if not rows:
        raise ValueError(f"{path}: empty measure file")
    header = [h.strip().lower() for h in rows[0]]
    if header[0] != "weight" or len(header) < 2:
        raise ValueError(f"{path}: expected header 'weight,x1,...,xd', got {rows[0]}")
    d = len(header) - 1
    if header[1:] != [f"x{k}" for k in range(1, d + 1)]:
        raise ValueError(f"{path}: coordinate columns must be x1..x{d}")
    data = np.array([[float(f) for f in r] for r in rows[1:]], dtype=float)
    if data.ndim != 2 or data.shape[1] != d + 1:
        raise ValueError(f"{path}: ragged rows")
    w, atoms = data[:, 0], data[:, 1:]
    total = w.sum()
    if abs(total - 1.0) > 1e-6:
        warnings.warn(
            f"{path}: weights sum to {total:.8g}; normalizing", stacklevel=2
        )
    return DiscreteMeasure(atoms, w / total)


def write_measure_csv(m: DiscreteMeasure, path, comment: str | None = None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        fh.write("weight," + ",".join(f"x{k}" for k in range(1, m.dim + 1)) + "\n")
        for w, x in zip(m.weights, m.atoms):
            fh.write(",".join([repr(float(w))] + [repr(float(v)) for v in x]) + "\n")
