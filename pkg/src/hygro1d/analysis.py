"""Sensitivity coefficients, Peclet estimation and synthetic measurements.

The sensitivity of the computed relative humidity to a model parameter p is
the scaled central difference ``Theta(t) = p * dphi/dp``; the Peclet number
of a measured series is recovered by minimizing the RMS misfit between
simulated and measured humidity, with a coarse scan followed by
golden-section refinement (constant model) or coordinate descent over time
segments (piecewise model).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import driver
from .errors import FitInfeasibleError, ProblemDefinitionError
from .model import PecletModel, ProbeSet, ProblemSpec, relative_humidity

__all__ = [
    "MeasurementSeries",
    "SensitivitySeries",
    "PecletFit",
    "sensitivity",
    "fit_peclet_constant",
    "fit_peclet_piecewise",
    "generate_synthetic_measurements",
    "read_measurements",
    "write_measurements",
]

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class MeasurementSeries:
    """Humidity observations at one probe depth.

    ``position`` is dimensionless when ``dimensionless`` is set, metres
    otherwise; times follow the same convention (dimensionless vs seconds).
    """

    position: float
    times: np.ndarray
    phi: np.ndarray
    temperature: np.ndarray | None = None
    dimensionless: bool = True

    def __post_init__(self):
        if self.times.size != self.phi.size:
            raise ProblemDefinitionError("times and phi must have equal length")
        if self.times.size and np.any(np.diff(self.times) <= 0.0):
            raise ProblemDefinitionError("measurement times must be strictly increasing")
        if self.phi.size and (np.any(self.phi < 0.0) or np.any(self.phi > 1.0)):
            raise ProblemDefinitionError("relative humidity samples must lie in [0, 1]")
        for arr in (self.times, self.phi):
            arr.setflags(write=False)
        if self.temperature is not None:
            self.temperature.setflags(write=False)


@dataclass(frozen=True)
class SensitivitySeries:
    """Scaled parameter sensitivity ``Theta(t)`` at one probe depth."""

    parameter: str
    position: float
    times: np.ndarray
    theta: np.ndarray


@dataclass(frozen=True)
class PecletFit:
    """Result of a Peclet estimation."""

    model: PecletModel
    misfit: float
    evaluations: int
    bounds: tuple[float, float]


def _perturbed(spec: ProblemSpec, param: str, factor: float) -> ProblemSpec:
    if param == "pe":
        return replace(spec, peclet=spec.peclet.scaled(factor))
    if param == "dm":
        material = replace(spec.material, diffusion=spec.material.diffusion.scaled(factor))
        return replace(spec, material=material)
    raise ProblemDefinitionError(f"unknown parameter {param!r}; use 'dm' or 'pe'")


def _probe_phi(spec: ProblemSpec, probes, scheme: str, decimation: int):
    field, report = driver.solve(spec, scheme, probes=probes, decimation=decimation)
    if not report.completed:
        raise RuntimeError(f"run ended with status {report.status}")
    phi = relative_humidity(field.probes.values, spec.phi_initial)
    return field.probes.times, phi


def sensitivity(
    spec: ProblemSpec,
    param: str,
    probes,
    delta: float = 0.01,
    *,
    scheme: str = "sg",
    decimation: int = 1,
) -> list[SensitivitySeries]:
    """Central-difference sensitivity of phi to ``param`` ('dm' or 'pe').

    ``Theta(t) = p * (phi(p(1+delta)) - phi(p(1-delta))) / (2 delta p)``; a
    parameter that is exactly zero has zero sensitivity by the scaling
    prefactor, so no runs are needed in that case.
    """
    if not 0.0 < delta <= 0.1:
        raise ProblemDefinitionError(f"delta must lie in (0, 0.1], got {delta}")
    if spec.phi_initial is None:
        raise ProblemDefinitionError("spec must define phi_initial for sensitivities")
    probe_list = tuple(ProbeSet.at(probes).positions)

    if param == "pe" and spec.peclet.max_abs() == 0.0:
        field, _ = driver.solve(spec, scheme, probes=probe_list, decimation=decimation)
        times = field.probes.times
        zero = np.zeros_like(times)
        return [SensitivitySeries("pe", x, times, zero.copy()) for x in probe_list]

    try:
        t_hi, phi_hi = _probe_phi(_perturbed(spec, param, 1.0 + delta), probe_list,
                                  scheme, decimation)
        t_lo, phi_lo = _probe_phi(_perturbed(spec, param, 1.0 - delta), probe_list,
                                  scheme, decimation)
    except RuntimeError as exc:
        raise RuntimeError(f"perturbed run for {param} failed: {exc}") from exc
    if t_hi.shape != t_lo.shape or not np.allclose(t_hi, t_lo, atol=1e-10):
        # adaptive stamp sets always share the nominal cadence, so this is defensive
        raise RuntimeError("perturbed runs produced different stamp sets")
    theta = (phi_hi - phi_lo) / (2.0 * delta)
    return [
        SensitivitySeries(param, x, t_hi, theta[:, i].copy())
        for i, x in enumerate(probe_list)
    ]


def _misfit(spec: ProblemSpec, series_list, scheme: str, decimation: int,
            t_min: float | None = None) -> float:
    """RMS humidity misfit over all samples (optionally only t >= t_min)."""
    positions = tuple(s.position for s in series_list)
    try:
        times, phi_sim = _probe_phi(spec, positions, scheme, decimation)
    except RuntimeError:
        return math.inf
    total = 0.0
    count = 0
    for i, s in enumerate(series_list):
        sel = slice(None) if t_min is None else s.times >= t_min - 1e-12
        ts = s.times[sel]
        ms = s.phi[sel]
        sim = np.interp(ts, times, phi_sim[:, i])
        total += float(np.sum((sim - ms) ** 2))
        count += ts.size
    if count == 0:
        return math.inf
    return math.sqrt(total / count)


def _golden_minimize(fn, lo: float, hi: float, coarse: int, tol: float):
    """Coarse scan then golden-section refinement; returns best evaluated point."""
    evals = {}

    def f(x):
        if x not in evals:
            evals[x] = fn(x)
        return evals[x]

    grid = np.linspace(lo, hi, coarse)
    vals = [f(x) for x in grid]
    if all(math.isinf(v) for v in vals):
        raise FitInfeasibleError("every candidate in the coarse scan was infeasible")
    k = int(np.argmin(vals))
    a = grid[max(k - 1, 0)]
    b = grid[min(k + 1, coarse - 1)]

    x1 = b - _GOLDEN * (b - a)
    x2 = a + _GOLDEN * (b - a)
    f1, f2 = f(x1), f(x2)
    while b - a > tol:
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - _GOLDEN * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + _GOLDEN * (b - a)
            f2 = f(x2)
    best = min(evals, key=evals.get)
    return best, evals[best], len(evals)


def fit_peclet_constant(
    spec: ProblemSpec,
    series_list,
    bounds: tuple[float, float],
    *,
    scheme: str = "sg",
    decimation: int = 1,
    coarse: int = 32,
    tol: float = 1e-3,
) -> PecletFit:
    """Estimate a constant Peclet number from measured humidity series."""
    lo, hi = bounds
    if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
        raise ProblemDefinitionError(f"invalid bounds {bounds}")
    if not series_list:
        raise ProblemDefinitionError("need at least one measurement series")

    def objective(pe):
        return _misfit(replace(spec, peclet=PecletModel.constant(pe)),
                       series_list, scheme, decimation)

    best, val, n_eval = _golden_minimize(objective, lo, hi, coarse, tol)
    return PecletFit(
        model=PecletModel.constant(best),
        misfit=val,
        evaluations=n_eval,
        bounds=(lo, hi),
    )


def fit_peclet_piecewise(
    spec: ProblemSpec,
    series_list,
    segment_times,
    bounds: tuple[float, float],
    *,
    scheme: str = "sg",
    decimation: int = 1,
    coarse: int = 16,
    tol: float = 1e-3,
    sweeps: int = 3,
    misfit_tol: float = 1e-6,
) -> PecletFit:
    """Estimate a piecewise-constant Peclet profile by coordinate descent.

    ``segment_times`` are the segment boundaries (must start at 0 and end at
    the horizon).  Each inner fit minimizes the misfit restricted to samples
    from the segment start onward, which is exact coordinate descent because
    earlier samples cannot depend on later segments.  A candidate only
    replaces the incumbent when the full misfit improves, so the final
    misfit never exceeds that of a constant fit seeded as the start point.
    """
    ts = [float(t) for t in segment_times]
    if len(ts) < 2:
        raise ProblemDefinitionError("need at least two segment boundaries")
    segs = [(ts[i], ts[i + 1]) for i in range(len(ts) - 1)]
    lo, hi = bounds
    if not series_list:
        raise ProblemDefinitionError("need at least one measurement series")

    start = fit_peclet_constant(spec, series_list, bounds, scheme=scheme,
                                decimation=decimation, coarse=coarse, tol=tol)
    values = [float(start.model.value)] * len(segs)
    n_eval = start.evaluations

    def model_for(vals):
        return PecletModel.piecewise([(a, b, v) for (a, b), v in zip(segs, vals)])

    full = _misfit(replace(spec, peclet=model_for(values)), series_list,
                   scheme, decimation)
    n_eval += 1

    for _ in range(sweeps):
        prev = full
        for k, (t0, _t1) in enumerate(segs):
            def objective(pe, _k=k, _t0=t0):
                trial = list(values)
                trial[_k] = pe
                return _misfit(replace(spec, peclet=model_for(trial)),
                               series_list, scheme, decimation, t_min=_t0)

            cand, _, used = _golden_minimize(objective, lo, hi, coarse, tol)
            n_eval += used
            trial = list(values)
            trial[k] = cand
            trial_full = _misfit(replace(spec, peclet=model_for(trial)),
                                 series_list, scheme, decimation)
            n_eval += 1
            if trial_full < full:
                values = trial
                full = trial_full
        if prev - full < misfit_tol:
            break

    if math.isinf(full):
        raise FitInfeasibleError("piecewise fit never produced a feasible model")
    return PecletFit(
        model=model_for(values),
        misfit=full,
        evaluations=n_eval,
        bounds=(lo, hi),
    )


def generate_synthetic_measurements(
    spec: ProblemSpec,
    probes,
    noise_std: float,
    period: float,
    *,
    seed: int = 0,
    scheme: str = "sg",
    decimation: int = 1,
) -> list[MeasurementSeries]:
    """Solve ``spec`` and sample noisy humidity series at the probe depths.

    Samples are taken every ``period`` time units (linear interpolation of
    the stored probe series) with additive zero-mean Gaussian noise of
    standard deviation ``noise_std``; a fixed seed yields bitwise-identical
    output.
    """
    if noise_std < 0.0:
        raise ProblemDefinitionError(f"noise_std must be >= 0, got {noise_std}")
    if period <= 0.0:
        raise ProblemDefinitionError(f"period must be > 0, got {period}")
    positions = tuple(ProbeSet.at(probes).positions)
    times, phi_sim = _probe_phi(spec, positions, scheme, decimation)
    sample_times = np.arange(period, spec.time.horizon + 1e-9, period)
    rng = np.random.default_rng(seed)
    out = []
    for i, x in enumerate(positions):
        clean = np.interp(sample_times, times, phi_sim[:, i])
        noisy = clean + rng.normal(0.0, noise_std, clean.size) if noise_std > 0.0 else clean
        out.append(MeasurementSeries(
            position=x,
            times=sample_times.copy(),
            phi=np.clip(noisy, 0.0, 1.0),
            dimensionless=True,
        ))
    return out


def write_measurements(path, series_list) -> None:
    """CSV with header ``t,x,phi[,T]``; floats at 17 significant digits."""
    with_temp = any(s.temperature is not None for s in series_list)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t,x,phi,T\n" if with_temp else "t,x,phi\n")
        for s in series_list:
            for i in range(s.times.size):
                row = f"{s.times[i]:.17g},{s.position:.17g},{s.phi[i]:.17g}"
                if with_temp:
                    tv = s.temperature[i] if s.temperature is not None else math.nan
                    row += f",{tv:.17g}"
                fh.write(row + "\n")


def read_measurements(path, *, dimensionless: bool = True,
                      length: float | None = None,
                      time_ref: float | None = None) -> list[MeasurementSeries]:
    """Parse a ``t,x,phi[,T]`` CSV into one series per probe position.

    With ``dimensionless=False`` the stamps are seconds and positions metres;
    ``length`` and ``time_ref`` must then be given to rescale them.
    """
    if not dimensionless and (length is None or time_ref is None):
        raise ProblemDefinitionError("dimensional data needs length and time_ref")
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().lower().split(",")
        if header[:3] != ["t", "x", "phi"]:
            raise ProblemDefinitionError(
                f"expected header starting with t,x,phi; got {','.join(header)!r}"
            )
        has_temp = len(header) > 3 and header[3] == "t"
        for ln, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) < 3:
                raise ProblemDefinitionError(f"line {ln}: expected at least 3 columns")
            try:
                t, x, phi = float(parts[0]), float(parts[1]), float(parts[2])
                temp = float(parts[3]) if has_temp and len(parts) > 3 else None
            except ValueError as exc:
                raise ProblemDefinitionError(f"line {ln}: {exc}") from exc
            rows.append((x, t, phi, temp))
    if not rows:
        raise ProblemDefinitionError(f"no measurement rows in {path}")
    out = []
    for x in sorted({r[0] for r in rows}):
        sub = [r for r in rows if r[0] == x]
        times = np.array([r[1] for r in sub])
        phi = np.array([r[2] for r in sub])
        temps = [r[3] for r in sub]
        temperature = None
        if any(tv is not None for tv in temps):
            temperature = np.array([math.nan if tv is None else tv for tv in temps])
        pos = x
        if not dimensionless:
            pos = x / length
            times = times / time_ref
        out.append(MeasurementSeries(
            position=pos, times=times, phi=phi,
            temperature=temperature, dimensionless=True,
        ))
    return out
