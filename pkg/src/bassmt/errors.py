"""Exception types shared across the package.

Solver-facing errors carry enough context to be reported on stderr and mapped
to CLI exit codes; see cli.EXIT_CODES.
"""


class BassmtError(Exception):
    """Base class for all package errors."""


class DimensionError(BassmtError):
    """An operation received measures or points of the wrong dimension."""


class InfeasibleError(BassmtError):
    """A coupling LP has no feasible point (marginals not in convex order).

    Attributes
    ----------
    detail : str
        Description of the violated constraint set.
    """

    def __init__(self, detail: str = "") -> None:
        super().__init__(detail or "martingale coupling constraints are infeasible")
        self.detail = detail


class NotConvexOrderError(BassmtError):
    """The marginals are not in convex order; no martingale coupling exists."""


class NotIrreducibleError(BassmtError):
    """The pair (mu, nu) is reducible; no Bass martingale exists.

    Attributes
    ----------
    witness : tuple
        A blocking atom pair (x_i, y_j) that no martingale coupling charges.
    """

    def __init__(self, witness) -> None:
        super().__init__(f"pair is not irreducible; blocking atom pair {witness}")
        self.witness = witness


class MaxIterationsError(BassmtError):
    """The fixed-point iteration did not meet its tolerances.

    Attributes
    ----------
    iterations : int
    residuals : dict
        Last observed residuals, for diagnostics.
    """

    def __init__(self, iterations: int, residuals: dict) -> None:
        super().__init__(
            f"no convergence after {iterations} iterations; residuals {residuals}"
        )
        self.iterations = iterations
        self.residuals = residuals


class OutOfRangeError(BassmtError):
    """A target point lies outside the range of the smoothed gradient.

    The range of (grad v * gamma) is the interior of conv{slopes of v}; the
    Newton iterates diverge for targets outside it.
    """


class RankError(BassmtError):
    """Slopes (or atoms) do not affinely span the ambient space."""


class QuadratureError(BassmtError):
    """A quadrature rule is incompatible with the requested integral."""
