"""Exception taxonomy shared across the package.

Exit-code mapping used by the CLI: DataError -> 1, SingularityError -> 2.
Inconsistency *flags* (bootstrap, validation) are values, not exceptions.
"""


class DataError(ValueError):
    """Structural problem in inputs: missing curve points, bad CSV rows,
    invalid configuration, violated preconditions on market data."""


class SingularityError(ArithmeticError):
    """Numeric singularity during evolution (e.g. a factor 1 + g(e^rho - 1)
    dropping to or below zero, or 1 + delta*L <= 0).  Carries the model
    coordinates where the abort happened."""

    def __init__(self, message: str, t: float | None = None,
                 k: int | None = None, x: float | None = None):
        self.t, self.k, self.x = t, k, x
        coords = ", ".join(
            f"{name}={val}" for name, val in (("t", t), ("k", k), ("x", x))
            if val is not None
        )
        super().__init__(f"{message} [{coords}]" if coords else message)


class InsufficientPathsError(RuntimeError):
    """An estimator received no effective samples (e.g. every path was wiped
    out before the payoff date)."""
