"""Exception and warning types shared across the package."""


class ProblemDefinitionError(ValueError):
    """Invalid problem data: grids, signals, material laws or configs."""


class CflViolationError(ValueError):
    """A fixed time step exceeds the stability bound of an explicit scheme."""

    def __init__(self, dt: float, bound: float):
        self.dt = dt
        self.bound = bound
        super().__init__(
            f"fixed step dt={dt:.6g} exceeds the stability bound "
            f"dt_max={bound:.6g}; reduce dt or use adaptive stepping"
        )


class DivergenceError(RuntimeError):
    """A scheme produced a non-finite value."""

    def __init__(self, step: int, node: int):
        self.step = step
        self.node = node
        super().__init__(f"non-finite field value at step {step}, node {node}")


class SingularSystemError(RuntimeError):
    """Zero pivot encountered while eliminating a tridiagonal system."""

    def __init__(self, row: int):
        self.row = row
        super().__init__(f"singular tridiagonal system: zero pivot at row {row}")


class SingularBoundaryError(RuntimeError):
    """The closed-form boundary flux denominator vanished."""

    def __init__(self, biot: float, a: float, dx: float, nu: float):
        self.biot = biot
        self.a = a
        self.dx = dx
        self.nu = nu
        super().__init__(
            "singular boundary flux denominator for "
            f"Bi={biot:.6g}, a={a:.6g}, dx={dx:.6g}, nu={nu:.6g}"
        )


class SteadyStateError(RuntimeError):
    """The steady-state march did not converge."""

    def __init__(self, residuals):
        self.residuals = list(residuals)
        tail = ", ".join(f"{r:.3e}" for r in self.residuals[-5:])
        super().__init__(f"steady-state march did not converge; residual tail: [{tail}]")


class OracleUnreliableError(RuntimeError):
    """The refined reference failed its Richardson self-check."""


class FitInfeasibleError(RuntimeError):
    """Every candidate evaluated during a parameter fit was infeasible."""


class PhysicalRangeWarning(UserWarning):
    """A computed quantity left its physically meaningful range."""
