"""Error functionals, refined reference solutions and convergence orders."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from . import driver
from .errors import OracleUnreliableError, ProblemDefinitionError
from .model import Grid1D, ProblemSpec, SolutionField, TimeControls

__all__ = [
    "ErrorReport",
    "ConvergenceTable",
    "l2_errors",
    "reference_solution",
    "error_vs_reference",
    "observed_order",
    "fit_convergence",
]


@dataclass(frozen=True)
class ErrorReport:
    """Global, per-node and per-stamp L2 errors of one run against a reference.

    ``eps`` is the root mean square over all stored values; ``eps_x[j]``
    averages over stamps at node ``j`` and ``eps_t[n]`` averages over nodes
    at stamp ``n``, so ``eps^2 = mean(eps_x^2) = mean(eps_t^2)``.
    """

    eps: float
    eps_x: np.ndarray
    eps_t: np.ndarray
    dx: float
    dt: float
    scheme: str

    def to_csv(self, path) -> None:
        """Write rows ``axis,coord,eps`` for the x and t profiles plus a global row."""
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("axis,coord,eps\n")
            fh.write(f"global,,{self.eps:.17g}\n")
            for j, v in enumerate(self.eps_x):
                fh.write(f"x,{j},{v:.17g}\n")
            for n, v in enumerate(self.eps_t):
                fh.write(f"t,{n},{v:.17g}\n")


def l2_errors(num: SolutionField, ref: SolutionField) -> ErrorReport:
    """L2 error functionals between two runs stored on the same grid and stamps."""
    if num.values.shape != ref.values.shape:
        raise ProblemDefinitionError(
            f"field shapes differ: {num.values.shape} vs {ref.values.shape}"
        )
    if num.grid.node_count != ref.grid.node_count or \
            abs(num.grid.spacing - ref.grid.spacing) > 1e-12:
        raise ProblemDefinitionError(
            f"grids differ: {num.grid.node_count}@{num.grid.spacing} vs "
            f"{ref.grid.node_count}@{ref.grid.spacing}"
        )
    if not np.allclose(num.stamps, ref.stamps, rtol=0.0, atol=1e-10):
        raise ProblemDefinitionError("stored time stamps differ between the two runs")
    diff2 = (num.values - ref.values) ** 2
    eps = float(np.sqrt(diff2.mean()))
    eps_x = np.sqrt(diff2.mean(axis=0))
    eps_t = np.sqrt(diff2.mean(axis=1))
    return ErrorReport(eps=eps, eps_x=eps_x, eps_t=eps_t,
                       dx=num.grid.spacing, dt=num.dt_nominal, scheme=num.scheme)


def field_difference(a: SolutionField, b: SolutionField) -> float:
    """Global RMS difference between two runs on shared grids and stamps."""
    return l2_errors(a, b).eps


def _refined_spec(spec: ProblemSpec, spatial: int, temporal: int) -> ProblemSpec:
    n_ref = (spec.grid.node_count - 1) * spatial + 1
    return replace(
        spec,
        grid=Grid1D(n_ref, spec.grid.spacing / spatial),
        time=TimeControls(
            step=spec.time.step / temporal,
            horizon=spec.time.horizon,
            mode="fixed",
            safety=spec.time.safety,
        ),
    )


def reference_solution(
    spec: ProblemSpec,
    *,
    decimation: int = 1,
    spatial_factor: int = 8,
    temporal_factor: int = 64,
    with_check: bool = True,
) -> SolutionField:
    """Refined-grid reference for ``spec``, stored on the requested grid/stamps.

    Runs the IMEX scheme at ``spatial_factor``-fold finer spacing and
    ``temporal_factor``-fold finer steps, then samples the result back onto
    the request grid (integer refinement keeps the sampling exact).  When
    ``with_check`` is set, a half-refined companion run is computed and the
    RMS change between the two is stored as ``oracle_delta``; it bounds the
    reference error from above and feeds the Richardson acceptance check.
    """
    fine = _refined_spec(spec, spatial_factor, temporal_factor)
    field, report = driver.solve(
        fine, "cn_imex",
        decimation=decimation * temporal_factor,
        node_stride=spatial_factor,
    )
    if not report.completed:
        raise OracleUnreliableError(f"reference run ended with status {report.status}")
    delta = None
    if with_check:
        half = _refined_spec(spec, spatial_factor // 2, temporal_factor // 2)
        half_field, half_report = driver.solve(
            half, "cn_imex",
            decimation=decimation * (temporal_factor // 2),
            node_stride=spatial_factor // 2,
        )
        if not half_report.completed:
            raise OracleUnreliableError(
                f"reference half-check run ended with status {half_report.status}"
            )
        delta = field_difference(half_field, field)
    return SolutionField(
        grid=field.grid,
        stamps=field.stamps,
        values=field.values.copy(),
        scheme="cn_imex(reference)",
        dt_nominal=spec.time.step,
        oracle_delta=delta,
    )


def error_vs_reference(
    num: SolutionField,
    spec: ProblemSpec,
    *,
    decimation: int = 1,
    reference: SolutionField | None = None,
) -> tuple[ErrorReport, SolutionField]:
    """Error of ``num`` against a Richardson-verified reference.

    The reference change under further refinement must stay below 10% of the
    measured error; otherwise refinement escalates once (doubled factors)
    before giving up with :class:`OracleUnreliableError`.
    """
    ref = reference if reference is not None else reference_solution(spec, decimation=decimation)
    report = l2_errors(num, ref)
    if ref.oracle_delta is None or ref.oracle_delta < 0.1 * report.eps:
        return report, ref
    ref2 = reference_solution(
        spec, decimation=decimation,
        spatial_factor=16, temporal_factor=128, with_check=False,
    )
    delta2 = field_difference(ref, ref2)
    report2 = l2_errors(num, ref2)
    if delta2 >= 0.1 * report2.eps:
        raise OracleUnreliableError(
            f"reference not trustworthy: refinement change {delta2:.3e} "
            f"vs measured error {report2.eps:.3e}"
        )
    ref2 = replace(ref2, oracle_delta=delta2)
    return report2, ref2


@dataclass(frozen=True)
class ConvergenceTable:
    """Step sizes, errors and the least-squares observed order."""

    h: np.ndarray
    eps: np.ndarray
    slope: float
    residual: float
    monotone: bool

    def rows(self):
        return list(zip(self.h.tolist(), self.eps.tolist()))


def observed_order(h, eps) -> float:
    """Least-squares slope of ``log(eps)`` against ``log(h)``.

    A non-monotone error sequence (a plateau, usually) raises a warning but
    the slope is still returned.
    """
    h = np.asarray(h, dtype=float)
    eps = np.asarray(eps, dtype=float)
    if h.size < 3:
        raise ProblemDefinitionError(f"need at least 3 points, got {h.size}")
    if np.any(h <= 0.0) or np.any(eps <= 0.0):
        raise ProblemDefinitionError("step sizes and errors must be positive")
    order = np.argsort(h)
    e_sorted = eps[order]
    if np.any(np.diff(e_sorted) < 0.0):
        warnings.warn("errors are not monotone over the selected range", stacklevel=2)
    slope, _ = np.polyfit(np.log(h), np.log(eps), 1)
    return float(slope)


def fit_convergence(h, eps) -> ConvergenceTable:
    h = np.asarray(h, dtype=float)
    eps = np.asarray(eps, dtype=float)
    order = np.argsort(h)
    monotone = bool(np.all(np.diff(eps[order]) >= 0.0))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        slope = observed_order(h, eps)
    fit = np.polyfit(np.log(h), np.log(eps), 1)
    resid = float(np.sqrt(np.mean((np.polyval(fit, np.log(h)) - np.log(eps)) ** 2)))
    return ConvergenceTable(h=h, eps=eps, slope=slope, residual=resid, monotone=monotone)
