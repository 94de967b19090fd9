"""Core domain model: grids, time controls, material laws, boundaries.

Everything here describes the dimensionless problem

    c(u) du/dt = d/dx ( d(u) du/dx ) - Pe du/dx,   x in [0, 1],

with Robin boundary conditions driven by ambient signals, plus the
conversions from a dimensional scenario into this form.  All values are
immutable after construction and safe to share between workers.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import PhysicalRangeWarning, ProblemDefinitionError

_SCAN_POINTS = 2048


@dataclass(frozen=True)
class Grid1D:
    """Uniform node grid on [0, 1].

    Nodes sit at ``x_j = j * spacing`` for ``j = 0 .. node_count - 1``; the
    first and last node lie exactly on the bounding surfaces.
    """

    node_count: int
    spacing: float

    def __post_init__(self):
        if not isinstance(self.node_count, int) or self.node_count < 3:
            raise ProblemDefinitionError(
                f"node_count must be an integer >= 3, got {self.node_count!r}"
            )
        if abs((self.node_count - 1) * self.spacing - 1.0) > 1e-12:
            raise ProblemDefinitionError(
                f"(node_count - 1) * spacing must equal 1, got "
                f"{(self.node_count - 1) * self.spacing!r}"
            )

    @classmethod
    def with_nodes(cls, node_count: int) -> "Grid1D":
        return cls(node_count, 1.0 / (node_count - 1))

    @classmethod
    def with_spacing(cls, spacing: float) -> "Grid1D":
        n = round(1.0 / spacing) + 1
        return cls(n, 1.0 / (n - 1))

    @property
    def nodes(self) -> np.ndarray:
        x = np.linspace(0.0, 1.0, self.node_count)
        x.setflags(write=False)
        return x


@dataclass(frozen=True)
class TimeControls:
    """Time-step controls.

    ``step`` is the marching step in fixed mode; in adaptive mode it is the
    output cadence while the actual step follows the stability bound scaled
    by ``safety``.
    """

    step: float
    horizon: float
    mode: str = "fixed"
    safety: float = 0.9

    def __post_init__(self):
        if self.step <= 0.0:
            raise ProblemDefinitionError(f"step must be > 0, got {self.step}")
        if self.horizon <= 0.0:
            raise ProblemDefinitionError(f"horizon must be > 0, got {self.horizon}")
        if self.mode not in ("fixed", "adaptive"):
            raise ProblemDefinitionError(f"mode must be 'fixed' or 'adaptive', got {self.mode!r}")
        if self.mode == "fixed" and self.step > self.horizon * (1.0 + 1e-12):
            raise ProblemDefinitionError(
                f"fixed step {self.step} exceeds horizon {self.horizon}"
            )
        if not 0.0 < self.safety <= 1.0:
            raise ProblemDefinitionError(f"safety must lie in (0, 1], got {self.safety}")


@dataclass(frozen=True)
class CoefficientLaw:
    """Scalar coefficient law ``p0 + p1*u + amp * exp(-rate*(u - center)^2)``.

    Constants are the degenerate case ``p1 = amp = 0``.
    """

    p0: float
    p1: float = 0.0
    gauss_amp: float = 0.0
    gauss_rate: float = 0.0
    gauss_center: float = 0.0

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        v = self.p0 + self.p1 * u
        if self.gauss_amp != 0.0:
            v = v + self.gauss_amp * np.exp(-self.gauss_rate * (u - self.gauss_center) ** 2)
        if v.ndim == 0:
            return float(v)
        return v

    @property
    def is_constant(self) -> bool:
        return self.p1 == 0.0 and self.gauss_amp == 0.0

    def scaled(self, factor: float) -> "CoefficientLaw":
        """The law multiplied pointwise by ``factor``."""
        return CoefficientLaw(
            self.p0 * factor, self.p1 * factor, self.gauss_amp * factor,
            self.gauss_rate, self.gauss_center,
        )


@dataclass(frozen=True)
class MaterialModel:
    """Storage law ``c(u)`` and diffusion law ``d(u)`` with their admissible range.

    Both laws must be strictly positive on ``admissible_range``; the
    constructor rejects models that fail a 1000-point scan of the range.
    """

    storage: CoefficientLaw
    diffusion: CoefficientLaw
    admissible_range: tuple[float, float] = (0.0, 3.0)

    def __post_init__(self):
        lo, hi = self.admissible_range
        if not lo < hi:
            raise ProblemDefinitionError(f"admissible_range must be increasing, got {self.admissible_range}")
        u = np.linspace(lo, hi, 1000)
        for name, law in (("storage", self.storage), ("diffusion", self.diffusion)):
            vals = law(u)
            j = int(np.argmin(vals))
            if vals[j] <= 0.0:
                raise ProblemDefinitionError(
                    f"{name} law is non-positive on the admissible range: "
                    f"value {vals[j]:.6g} at u = {u[j]:.6g}"
                )

    @classmethod
    def constant(cls, c_value: float, d_value: float,
                 admissible_range: tuple[float, float] = (0.0, 3.0)) -> "MaterialModel":
        return cls(CoefficientLaw(c_value), CoefficientLaw(d_value), admissible_range)

    @property
    def is_constant(self) -> bool:
        return self.storage.is_constant and self.diffusion.is_constant


@dataclass(frozen=True)
class PecletModel:
    """Peclet number, either constant or piecewise constant in time.

    ``segments`` is a tuple of ``(t_start, t_end, value)`` triples; they must
    be contiguous and non-overlapping.  Coverage of the full horizon is
    checked when the model is attached to a :class:`ProblemSpec`.
    """

    value: float | None = None
    segments: tuple[tuple[float, float, float], ...] = ()

    def __post_init__(self):
        if (self.value is None) == (len(self.segments) == 0):
            raise ProblemDefinitionError("provide either a constant value or segments, not both")
        prev_end = None
        for t0, t1, _ in self.segments:
            if t1 <= t0:
                raise ProblemDefinitionError(f"empty Peclet segment [{t0}, {t1}]")
            if prev_end is not None and abs(t0 - prev_end) > 1e-12:
                raise ProblemDefinitionError(
                    f"Peclet segments must be contiguous; gap or overlap at t = {t0}"
                )
            prev_end = t1

    @classmethod
    def constant(cls, value: float) -> "PecletModel":
        return cls(value=float(value))

    @classmethod
    def piecewise(cls, segments) -> "PecletModel":
        return cls(value=None, segments=tuple((float(a), float(b), float(v)) for a, b, v in segments))

    @property
    def is_constant(self) -> bool:
        return self.value is not None

    def value_at(self, t: float) -> float:
        if self.value is not None:
            return self.value
        for t0, t1, v in self.segments[:-1]:
            if t0 <= t < t1:
                return v
        return self.segments[-1][2]

    def covers(self, horizon: float) -> bool:
        if self.value is not None:
            return True
        return (abs(self.segments[0][0]) <= 1e-12
                and self.segments[-1][1] >= horizon - 1e-12)

    def scaled(self, factor: float) -> "PecletModel":
        if self.value is not None:
            return PecletModel.constant(self.value * factor)
        return PecletModel.piecewise([(a, b, v * factor) for a, b, v in self.segments])

    def max_abs(self) -> float:
        if self.value is not None:
            return abs(self.value)
        return max(abs(v) for _, _, v in self.segments)


@dataclass(frozen=True)
class Sinusoid:
    amplitude: float
    period: float
    phase: float = 0.0

    def __post_init__(self):
        if self.period <= 0.0:
            raise ProblemDefinitionError(f"sinusoid period must be > 0, got {self.period}")


@dataclass(frozen=True)
class AmbientSignal:
    """Ambient value as offset plus sinusoids plus optional piecewise steps.

    The step terms add ``value`` on ``[t_start, t_end)`` (last step is
    end-inclusive), which covers square adsorption/desorption cycles.
    """

    offset: float
    sinusoids: tuple[Sinusoid, ...] = ()
    steps: tuple[tuple[float, float, float], ...] = ()

    def __post_init__(self):
        prev_end = None
        for t0, t1, _ in self.steps:
            if t1 <= t0:
                raise ProblemDefinitionError(f"empty signal step [{t0}, {t1}]")
            if prev_end is not None and t0 < prev_end - 1e-12:
                raise ProblemDefinitionError(f"signal steps overlap at t = {t0}")
            prev_end = t1

    def value(self, t: float) -> float:
        v = self.offset
        for s in self.sinusoids:
            v += s.amplitude * math.sin(2.0 * math.pi * t / s.period + s.phase)
        n = len(self.steps)
        for i, (t0, t1, sv) in enumerate(self.steps):
            if t0 <= t and (t < t1 or (i == n - 1 and t <= t1)):
                v += sv
                break
        return v

    def values(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return np.vectorize(self.value)(t) if t.ndim else np.float64(self.value(float(t)))


@dataclass(frozen=True)
class RobinBoundary:
    """Robin boundary: surface transfer Biot number and ambient signal.

    ``liquid_flux`` models driving rain and is only meaningful on the left
    side.  With ``advective`` set, the advective term enters the boundary
    balance, i.e. the surface condition constrains the total flux rather
    than the diffusive flux alone.
    """

    side: str
    biot: float
    ambient: AmbientSignal
    liquid_flux: float = 0.0
    advective: bool = False

    def __post_init__(self):
        if self.side not in ("left", "right"):
            raise ProblemDefinitionError(f"side must be 'left' or 'right', got {self.side!r}")
        if self.biot < 0.0:
            raise ProblemDefinitionError(f"Biot number must be >= 0, got {self.biot}")
        if self.side == "right" and self.liquid_flux != 0.0:
            raise ProblemDefinitionError("liquid flux is only supported on the left boundary")


def eval_boundary_signal(boundary: RobinBoundary, t: float) -> float:
    """Ambient value of ``boundary`` at dimensionless time ``t``."""
    return boundary.ambient.value(t)


@dataclass(frozen=True)
class ProblemSpec:
    """Complete dimensionless problem definition."""

    grid: Grid1D
    time: TimeControls
    material: MaterialModel
    peclet: PecletModel
    left: RobinBoundary
    right: RobinBoundary
    initial_value: float = 1.0
    phi_initial: float | None = None

    def __post_init__(self):
        if self.left.side != "left" or self.right.side != "right":
            raise ProblemDefinitionError("boundary sides do not match their slots")
        if not self.peclet.covers(self.time.horizon):
            raise ProblemDefinitionError(
                f"Peclet segments do not cover [0, {self.time.horizon}]"
            )
        if self.phi_initial is not None and not 0.0 < self.phi_initial < 1.0:
            raise ProblemDefinitionError(
                f"initial relative humidity must lie in (0, 1), got {self.phi_initial}"
            )
        ts = np.linspace(0.0, self.time.horizon, _SCAN_POINTS)
        for name, b in (("left", self.left), ("right", self.right)):
            vals = np.array([b.ambient.value(t) for t in ts])
            j = int(np.argmin(vals))
            if vals[j] <= 0.0:
                raise ProblemDefinitionError(
                    f"{name} ambient signal is non-positive at t = {ts[j]:.6g} "
                    f"(value {vals[j]:.6g}); vapour pressure ratios must stay positive"
                )

    def initial_state(self) -> np.ndarray:
        return np.full(self.grid.node_count, float(self.initial_value))

    def ambient_envelope(self) -> float:
        """Largest magnitude among the initial value and both ambient signals."""
        ts = np.linspace(0.0, self.time.horizon, _SCAN_POINTS)
        env = abs(float(self.initial_value))
        for b in (self.left, self.right):
            vals = np.abs([b.ambient.value(t) for t in ts])
            env = max(env, float(np.max(vals)))
        return env


@dataclass(frozen=True)
class DimensionalScenario:
    """Physical scales of a moisture-transfer scenario.

    Units: length [m], time_ref [s], diffusion_ref [s], vapour pressure [Pa],
    temperature [K], gas constant [J/kg/K], velocity [m/s], surface
    coefficients [s/m], liquid flux [kg/m^2/s].
    """

    length: float
    time_ref: float
    diffusion_ref: float
    vapour_pressure_init: float
    temperature: float
    gas_constant: float = 461.5
    velocity: float = 0.0
    surface_left: float = 0.0
    surface_right: float = 0.0
    liquid_flux_left: float = 0.0
    phi_init: float = 0.5

    def __post_init__(self):
        for name in ("length", "time_ref", "diffusion_ref", "vapour_pressure_init",
                     "temperature", "gas_constant"):
            v = getattr(self, name)
            if v <= 0.0:
                raise ProblemDefinitionError(f"{name} must be strictly positive, got {v}")
        for name in ("surface_left", "surface_right"):
            if getattr(self, name) < 0.0:
                raise ProblemDefinitionError(f"{name} must be >= 0")
        if not 0.0 < self.phi_init < 1.0:
            raise ProblemDefinitionError(f"phi_init must lie in (0, 1), got {self.phi_init}")

    @property
    def peclet(self) -> float:
        return (self.velocity * self.length
                / (self.gas_constant * self.temperature * self.diffusion_ref))

    @property
    def biot_left(self) -> float:
        return self.surface_left * self.length / self.diffusion_ref

    @property
    def biot_right(self) -> float:
        return self.surface_right * self.length / self.diffusion_ref

    @property
    def liquid_flux_star(self) -> float:
        return (self.liquid_flux_left * self.length
                / (self.diffusion_ref * self.vapour_pressure_init))


def _law_to_dimensionless(law: CoefficientLaw, scale: float, p_ref: float) -> CoefficientLaw:
    # physical law of P_v mapped pointwise onto u = P_v / p_ref
    return CoefficientLaw(
        p0=law.p0 * scale,
        p1=law.p1 * p_ref * scale,
        gauss_amp=law.gauss_amp * scale,
        gauss_rate=law.gauss_rate * p_ref ** 2,
        gauss_center=law.gauss_center / p_ref,
    )


def _signal_to_dimensionless(sig: AmbientSignal, p_ref: float, t_ref: float) -> AmbientSignal:
    return AmbientSignal(
        offset=sig.offset / p_ref,
        sinusoids=tuple(
            Sinusoid(s.amplitude / p_ref, s.period / t_ref, s.phase) for s in sig.sinusoids
        ),
        steps=tuple((t0 / t_ref, t1 / t_ref, v / p_ref) for t0, t1, v in sig.steps),
    )


def nondimensionalize(
    scenario: DimensionalScenario,
    storage_law: CoefficientLaw,
    diffusion_law: CoefficientLaw,
    ambient_left: AmbientSignal,
    ambient_right: AmbientSignal,
    grid: Grid1D,
    time: TimeControls,
    *,
    advective_left: bool = False,
    advective_right: bool = False,
    admissible_range: tuple[float, float] = (0.0, 3.0),
) -> ProblemSpec:
    """Convert a dimensional scenario to a :class:`ProblemSpec`.

    The material laws are given in physical units as functions of the vapour
    pressure; ambient signals carry pascals and seconds.  ``grid`` and
    ``time`` are already dimensionless.

    Scalings applied pointwise:

    * ``c*(u) = c(P_v) * L^2 / (d_ref * t_ref)``
    * ``d*(u) = d(P_v) / d_ref``
    * ``Pe = v * L / (R_v * T * d_ref)``, ``Bi = h * L / d_ref``
    * ``g* = g * L / (d_ref * P_ref)``, ``u = P_v / P_ref``
    """
    s = scenario
    c_scale = s.length ** 2 / (s.diffusion_ref * s.time_ref)
    d_scale = 1.0 / s.diffusion_ref
    material = MaterialModel(
        storage=_law_to_dimensionless(storage_law, c_scale, s.vapour_pressure_init),
        diffusion=_law_to_dimensionless(diffusion_law, d_scale, s.vapour_pressure_init),
        admissible_range=admissible_range,
    )
    left = RobinBoundary(
        side="left",
        biot=s.biot_left,
        ambient=_signal_to_dimensionless(ambient_left, s.vapour_pressure_init, s.time_ref),
        liquid_flux=s.liquid_flux_star,
        advective=advective_left,
    )
    right = RobinBoundary(
        side="right",
        biot=s.biot_right,
        ambient=_signal_to_dimensionless(ambient_right, s.vapour_pressure_init, s.time_ref),
        advective=advective_right,
    )
    return ProblemSpec(
        grid=grid,
        time=time,
        material=material,
        peclet=PecletModel.constant(s.peclet),
        left=left,
        right=right,
        initial_value=1.0,
        phi_initial=s.phi_init,
    )


def relative_humidity(u, phi_initial: float):
    """Relative humidity ``phi = u * phi_initial`` under isothermal conditions.

    Values outside [0, 1.05] trigger a :class:`PhysicalRangeWarning` but are
    returned unchanged.
    """
    if not 0.0 < phi_initial < 1.0:
        raise ProblemDefinitionError(f"phi_initial must lie in (0, 1), got {phi_initial}")
    phi = np.asarray(u, dtype=float) * phi_initial
    if np.any(phi < 0.0) or np.any(phi > 1.05):
        warnings.warn(
            "relative humidity left the physical range [0, 1.05]",
            PhysicalRangeWarning,
            stacklevel=2,
        )
    if phi.ndim == 0:
        return float(phi)
    return phi


@dataclass(frozen=True)
class ProbeSet:
    """Probe positions in [0, 1] and, after a run, their sampled series."""

    positions: tuple[float, ...]
    times: np.ndarray | None = None
    values: np.ndarray | None = None  # shape (n_times, n_probes)

    def __post_init__(self):
        for x in self.positions:
            if not 0.0 <= x <= 1.0:
                raise ProblemDefinitionError(f"probe position {x} outside [0, 1]")

    @classmethod
    def at(cls, positions) -> "ProbeSet":
        return cls(tuple(float(x) for x in positions))


@dataclass(frozen=True)
class SolutionField:
    """Stored solution layers of one run.

    ``values[n, j]`` is the field at stamp ``n`` and node ``j``.  Row 0 is
    the initial condition.  ``dt_log`` holds the accepted steps of adaptive
    runs (possibly truncated for very long runs).
    """

    grid: Grid1D
    stamps: np.ndarray
    values: np.ndarray
    scheme: str = ""
    dt_nominal: float = 0.0
    dt_log: np.ndarray = field(default_factory=lambda: np.empty(0))
    probes: ProbeSet | None = None
    oracle_delta: float | None = None

    def __post_init__(self):
        if self.values.shape != (self.stamps.size, self.grid.node_count):
            raise ProblemDefinitionError(
                f"field shape {self.values.shape} does not match "
                f"{self.stamps.size} stamps x {self.grid.node_count} nodes"
            )
        for arr in (self.stamps, self.values, self.dt_log):
            arr.setflags(write=False)

    def subsample_nodes(self, stride: int) -> "SolutionField":
        """View of the field on every ``stride``-th node (must tile the grid)."""
        if (self.grid.node_count - 1) % stride != 0:
            raise ProblemDefinitionError(
                f"stride {stride} does not tile a grid of {self.grid.node_count} nodes"
            )
        n = (self.grid.node_count - 1) // stride + 1
        return SolutionField(
            grid=Grid1D(n, self.grid.spacing * stride),
            stamps=self.stamps.copy(),
            values=self.values[:, ::stride].copy(),
            scheme=self.scheme,
            dt_nominal=self.dt_nominal,
        )
