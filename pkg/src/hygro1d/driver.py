"""Time-marching driver: fixed or stability-bound adaptive stepping.

A run marches on the schedule ``t_i = i * dt`` (clamped to land exactly on
the horizon), stores every ``decimation``-th landing, and samples probes at
the stored stamps.  Adaptive runs subdivide each interval with steps bounded
by the stability limit scaled by the safety factor, so the stored dynamics
do not depend on the decimation factor.
"""

from __future__ import annotations

import math
import time as _time
import warnings
from dataclasses import dataclass

import numpy as np

from . import _kernels, schemes
from .errors import (
    CflViolationError,
    PhysicalRangeWarning,
    ProblemDefinitionError,
    SingularSystemError,
    SteadyStateError,
)
from .model import ProbeSet, ProblemSpec, SolutionField

_LOG_CAP = 1_000_000
_STATUS = {
    _kernels.COMPLETED: "completed",
    _kernels.DIVERGED: "diverged",
    _kernels.UNDERFLOW: "step-underflow",
}


@dataclass(frozen=True)
class RunReport:
    """Bookkeeping of one run."""

    status: str
    accepted_steps: int
    clamped_steps: int
    dt_min: float
    dt_max: float
    wall_time: float
    log_truncated: bool = False

    @property
    def completed(self) -> bool:
        return self.status == "completed"

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "accepted_steps": self.accepted_steps,
            "clamped_steps": self.clamped_steps,
            "dt_min": self.dt_min,
            "dt_max": self.dt_max,
            "wall_time": self.wall_time,
            "log_truncated": self.log_truncated,
        }


def _signal_arrays(sig):
    amps = np.array([s.amplitude for s in sig.sinusoids], dtype=float)
    pers = np.array([s.period for s in sig.sinusoids], dtype=float)
    phs = np.array([s.phase for s in sig.sinusoids], dtype=float)
    st0 = np.array([s[0] for s in sig.steps], dtype=float)
    st1 = np.array([s[1] for s in sig.steps], dtype=float)
    sv = np.array([s[2] for s in sig.steps], dtype=float)
    return float(sig.offset), amps, pers, phs, st0, st1, sv


def _peclet_arrays(pe, horizon):
    if pe.is_constant:
        return (np.array([0.0]), np.array([horizon]), np.array([float(pe.value)]))
    t0 = np.array([s[0] for s in pe.segments], dtype=float)
    t1 = np.array([s[1] for s in pe.segments], dtype=float)
    v = np.array([s[2] for s in pe.segments], dtype=float)
    return t0, t1, v


def _law_array(law):
    return np.array([law.p0, law.p1, law.gauss_amp, law.gauss_rate, law.gauss_center])


def _schedule(time):
    """Marching targets i*dt (last forced to the horizon exactly)."""
    dt, tau = time.step, time.horizon
    m = int(math.floor(tau / dt + 1e-9))
    targets = np.arange(1, m + 1, dtype=float) * dt
    if m == 0 or tau - targets[-1] > 1e-12 * max(1.0, tau):
        targets = np.append(targets, tau)
    targets[-1] = tau
    return targets


def _store_flags(targets, decimation):
    flags = np.zeros(targets.size, dtype=np.bool_)
    flags[decimation - 1 :: decimation] = True
    flags[-1] = True
    return flags


def _probe_positions(probes):
    if probes is None:
        return np.empty(0), None
    if isinstance(probes, ProbeSet):
        return np.asarray(probes.positions, dtype=float), probes
    pset = ProbeSet.at(probes)
    return np.asarray(pset.positions, dtype=float), pset


def _check_range(spec, values):
    lo, hi = spec.material.admissible_range
    vmin, vmax = float(np.min(values)), float(np.max(values))
    if vmin < lo - 1e-12 or vmax > hi + 1e-12:
        warnings.warn(
            f"field left the admissible material range [{lo}, {hi}]: "
            f"reached [{vmin:.6g}, {vmax:.6g}]",
            PhysicalRangeWarning,
            stacklevel=3,
        )


def _python_sg_march(spec, targets, store_flags, adaptive, sigma, probe_pos,
                     node_stride, sup_limit, n_store):
    """Reference march composed from the public single-step operations."""
    n = spec.grid.node_count
    dx = spec.grid.spacing
    n_keep = (n - 1) // node_stride + 1
    u = spec.initial_state()
    out = np.empty((n_store, n_keep))
    stamps = np.empty(n_store)
    probe_u = np.empty((n_store, probe_pos.size))
    dt_log = []

    def sample(row, t):
        out[row] = u[::node_stride]
        stamps[row] = t
        pe = spec.peclet.value_at(t)
        d = np.asarray(spec.material.diffusion(u), dtype=float)
        for p, x in enumerate(probe_pos):
            j = min(int(x / dx), n - 2)
            xi = x - j * dx
            if xi < 1e-12 * dx:
                probe_u[row, p] = u[j]
            else:
                nu = 0.5 * (d[j] + d[j + 1])
                probe_u[row, p] = schemes.sg_interpolate(
                    x, j * dx, (j + 1) * dx, u[j], u[j + 1], pe, nu,
                    schemes.sg_interface_flux(u[j], u[j + 1], pe, nu, dx))
        return row + 1

    row = sample(0, 0.0)
    status = "completed"
    n_acc = n_clamp = 0
    t = 0.0
    for i_t, t_goal in enumerate(targets):
        while t < t_goal - 1e-15 * (1.0 + t_goal):
            if adaptive:
                dt = sigma * min(schemes.sg_cfl_max_dt(spec, u, t),
                                 schemes.sg_boundary_safe_dt(spec, u, t))
                clamped = t_goal - t < dt
                dt = min(dt, t_goal - t)
            else:
                dt = spec.time.step
                clamped = t_goal - t < dt * (1.0 - 1e-12)
                if clamped:
                    dt = t_goal - t
            if dt < 1e-12:
                status = "step-underflow"
                break
            u_try = schemes.sg_step(u, spec, t, dt)
            if not np.all(np.isfinite(u_try)) or np.max(np.abs(u_try)) > sup_limit:
                status = "diverged"
                break
            u = u_try
            n_acc += 1
            n_clamp += int(clamped)
            dt_log.append(dt)
            t = t_goal if clamped else t + dt
        if status != "completed":
            break
        t = t_goal
        if store_flags[i_t]:
            row = sample(row, t)
    if status != "completed" and row < n_store:
        row = sample(row, t)
    dt_arr = np.array(dt_log) if dt_log else np.empty(0)
    return out[:row], stamps[:row], probe_u[:row], dt_arr, n_acc, n_clamp, status


def solve(
    spec: ProblemSpec,
    scheme: str = "sg",
    probes=None,
    *,
    decimation: int = 1,
    node_stride: int = 1,
    use_kernels: bool = True,
    enforce_cfl: bool = True,
) -> tuple[SolutionField, RunReport]:
    """March ``spec`` to its horizon and return the stored field and a report.

    ``scheme`` is one of ``sg`` (explicit exponential fitting), ``cn``
    (Crank-Nicolson, constant coefficients only) or ``cn_imex`` (coefficients
    frozen at the current layer).  Adaptive stepping applies to ``sg`` only.
    Probes are sampled at the stored stamps, by exact in-cell interpolation
    for ``sg`` and linearly for the implicit schemes.
    """
    if scheme not in ("sg", "cn", "cn_imex"):
        raise ProblemDefinitionError(f"unknown scheme {scheme!r}")
    if scheme == "cn" and not spec.material.is_constant:
        raise ProblemDefinitionError(
            "classical Crank-Nicolson requires u-independent coefficients; use cn_imex"
        )
    adaptive = spec.time.mode == "adaptive"
    if adaptive and scheme != "sg":
        raise ProblemDefinitionError("adaptive stepping is only available for the sg scheme")
    if decimation < 1:
        raise ProblemDefinitionError(f"decimation must be >= 1, got {decimation}")
    if scheme == "sg" and not adaptive and enforce_cfl:
        bound = schemes.sg_cfl_max_dt(spec, spec.initial_state(), 0.0)
        if spec.time.step > bound * (1.0 + 1e-12):
            raise CflViolationError(spec.time.step, bound)

    targets = _schedule(spec.time)
    flags = _store_flags(targets, decimation)
    n_store = 1 + int(flags.sum())
    probe_pos, _ = _probe_positions(probes)
    sup_limit = 1e6 * max(spec.ambient_envelope(), 1e-6)

    cs = _law_array(spec.material.storage)
    ds = _law_array(spec.material.diffusion)
    mat_const = spec.material.is_constant
    pe_t0, pe_t1, pe_v = _peclet_arrays(spec.peclet, spec.time.horizon)
    off_l, amp_l, per_l, ph_l, sl0, sl1, slv = _signal_arrays(spec.left.ambient)
    off_r, amp_r, per_r, ph_r, sr0, sr1, srv = _signal_arrays(spec.right.ambient)

    start = _time.perf_counter()
    log_truncated = False
    if scheme == "sg":
        if use_kernels:
            (out, stamps, probe_u, dt_log, n_log, log_truncated, n_acc, n_clamp,
             dt_min, dt_max, status_code, _bad, rows) = _kernels.sg_march(
                spec.initial_state(), spec.grid.spacing, targets, flags,
                adaptive, spec.time.safety, spec.time.step,
                cs, ds, mat_const, pe_t0, pe_t1, pe_v,
                spec.left.biot, spec.left.liquid_flux, spec.left.advective,
                off_l, amp_l, per_l, ph_l, sl0, sl1, slv,
                spec.right.biot, spec.right.advective,
                off_r, amp_r, per_r, ph_r, sr0, sr1, srv,
                probe_pos, node_stride, sup_limit, n_store, _LOG_CAP,
            )
            out, stamps, probe_u = out[:rows], stamps[:rows], probe_u[:rows]
            dt_log = dt_log[:n_log].copy()
            status = _STATUS[status_code]
        else:
            out, stamps, probe_u, dt_log, n_acc, n_clamp, status = _python_sg_march(
                spec, targets, flags, adaptive, spec.time.safety,
                probe_pos, node_stride, sup_limit, n_store,
            )
            dt_min = float(dt_log.min()) if dt_log.size else math.inf
            dt_max = float(dt_log.max()) if dt_log.size else 0.0
    else:
        (out, stamps, probe_u, n_acc, n_clamp, status_code, bad, rows) = _kernels.imex_march(
            spec.initial_state(), spec.grid.spacing, targets, flags, spec.time.step,
            cs, ds, mat_const, pe_t0, pe_t1, pe_v,
            spec.left.biot, spec.left.liquid_flux, spec.left.advective,
            off_l, amp_l, per_l, ph_l, sl0, sl1, slv,
            spec.right.biot, spec.right.advective,
            off_r, amp_r, per_r, ph_r, sr0, sr1, srv,
            probe_pos, node_stride, sup_limit, n_store,
        )
        if status_code == _kernels.SINGULAR:
            raise SingularSystemError(int(bad))
        out, stamps, probe_u = out[:rows], stamps[:rows], probe_u[:rows]
        status = _STATUS[status_code]
        dt_log = np.empty(0)
        dt_min = dt_max = spec.time.step
    wall = _time.perf_counter() - start

    _check_range(spec, out)

    grid = spec.grid
    if node_stride > 1:
        from .model import Grid1D

        grid = Grid1D((spec.grid.node_count - 1) // node_stride + 1,
                      spec.grid.spacing * node_stride)
    probe_set = None
    if probe_pos.size:
        probe_set = ProbeSet(tuple(probe_pos.tolist()), times=stamps.copy(), values=probe_u)
    field = SolutionField(
        grid=grid,
        stamps=stamps,
        values=out,
        scheme=scheme,
        dt_nominal=spec.time.step,
        dt_log=dt_log,
        probes=probe_set,
    )
    report = RunReport(
        status=status,
        accepted_steps=int(n_acc),
        clamped_steps=int(n_clamp),
        dt_min=float(dt_min) if n_acc else math.inf,
        dt_max=float(dt_max),
        wall_time=wall,
        log_truncated=bool(log_truncated),
    )
    return field, report


def _constant_boundary_value(boundary, horizon):
    sig = boundary.ambient
    if sig.sinusoids:
        raise ProblemDefinitionError(
            f"steady solve requires a constant {boundary.side} ambient signal"
        )
    if sig.steps:
        if len(sig.steps) > 1 or sig.steps[0][0] > 1e-12 or sig.steps[0][1] < horizon:
            raise ProblemDefinitionError(
                f"steady solve requires a constant {boundary.side} ambient signal"
            )
        return sig.offset + sig.steps[0][2]
    return sig.offset


def steady_state_solve(
    spec: ProblemSpec,
    scheme: str = "sg",
    *,
    tol: float = 1e-10,
    max_steps: int = 50_000_000,
) -> np.ndarray:
    """March with frozen boundary values until ``max|du|/dt < tol``.

    For the explicit scheme the converged row satisfies flux constancy
    exactly, so constant-coefficient solves reproduce the analytic steady
    profile.  The implicit schemes may take steps far above the explicit
    bound but their stationary point carries the upwind truncation error.
    """
    u_l = _constant_boundary_value(spec.left, spec.time.horizon)
    u_r = _constant_boundary_value(spec.right, spec.time.horizon)
    if scheme == "sg":
        u, status, steps, tail = _kernels.sg_steady(
            spec.initial_state(), spec.grid.spacing, spec.time.safety,
            _law_array(spec.material.storage), _law_array(spec.material.diffusion),
            spec.material.is_constant, spec.peclet.value_at(0.0),
            spec.left.biot, spec.left.liquid_flux, spec.left.advective, u_l,
            spec.right.biot, spec.right.advective, u_r,
            tol, max_steps,
        )
        if status != _kernels.COMPLETED:
            raise SteadyStateError(tail)
        return u
    if scheme in ("cn", "cn_imex"):
        u = spec.initial_state()
        dt = spec.time.step
        tail = []
        for _ in range(max_steps):
            u_new = schemes.cn_imex_step(u, spec, 0.0, dt)
            resid = float(np.max(np.abs(u_new - u))) / dt
            tail = (tail + [resid])[-5:]
            stalled = float(np.max(np.abs(u_new - u))) <= 4e-16 * (1.0 + float(np.max(np.abs(u_new))))
            u = u_new
            if resid < tol or stalled:
                return u
        raise SteadyStateError(tail)
    raise ProblemDefinitionError(f"unknown scheme {scheme!r}")
