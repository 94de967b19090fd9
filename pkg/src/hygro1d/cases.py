"""Built-in benchmark cases.

Three ready-made problems cover the solver surface: a linear benchmark with
constant coefficients and two-tone sinusoidal ambient signals, a nonlinear
benchmark with strongly field-dependent storage and diffusion laws, and a
gypsum-board adsorption/desorption cycle with advective boundary conditions
and probe depths matching a two-sensor experiment.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ProblemDefinitionError
from .model import (
    AmbientSignal,
    CoefficientLaw,
    Grid1D,
    MaterialModel,
    PecletModel,
    ProblemSpec,
    RobinBoundary,
    Sinusoid,
    TimeControls,
)

__all__ = ["NamedCase", "build_linear_case", "build_nonlinear_case",
           "build_gypsum_case", "build_case", "CASE_IDS"]

CASE_IDS = ("linear_s4", "nonlinear_s5", "gypsum_s6")

# gypsum scenario scales
GYPSUM_LENGTH = 0.0375            # m
GYPSUM_D_REF = 5.6e-11            # s
GYPSUM_SURFACE = 2.41e-8          # s/m
GYPSUM_TEMPERATURE = 296.15       # K
GYPSUM_TIME_REF = 3600.0          # s
GYPSUM_BIOT = GYPSUM_SURFACE * GYPSUM_LENGTH / GYPSUM_D_REF
GYPSUM_PROBES = (12.5 / 37.5, 25.0 / 37.5)
GYPSUM_DEFAULT_PECLET = 1.8
# storage scale chosen so the 48 h cycle relaxes within a few hours, matching
# a board capacity of roughly 4e-3 kg/m^3/Pa at these scales
GYPSUM_STORAGE = 30.0


@dataclass(frozen=True)
class NamedCase:
    """A ready-made problem with an id, its spec and suggested probe depths."""

    case_id: str
    spec: ProblemSpec
    description: str
    probes: tuple[float, ...] = ()


def build_linear_case(*, node_count: int = 101, dt: float = 1e-2,
                      mode: str = "fixed", safety: float = 0.9) -> NamedCase:
    """Linear benchmark: constant properties, sinusoidal two-sided forcing.

    d = 1, c = 47, Pe = 20, horizon 120 with Biot numbers 2.5 (left) and
    1 (right); the left signal mixes 24- and 4-periodic tones, the right one
    is 12-periodic.
    """
    spec = ProblemSpec(
        grid=Grid1D.with_nodes(node_count),
        time=TimeControls(step=dt, horizon=120.0, mode=mode, safety=safety),
        material=MaterialModel.constant(47.0, 1.0),
        peclet=PecletModel.constant(20.0),
        left=RobinBoundary(
            side="left", biot=2.5,
            ambient=AmbientSignal(1.0, (Sinusoid(0.5, 24.0), Sinusoid(0.3, 4.0))),
        ),
        right=RobinBoundary(
            side="right", biot=1.0,
            ambient=AmbientSignal(1.0, (Sinusoid(0.8, 12.0),)),
        ),
        initial_value=1.0,
        phi_initial=0.3,
    )
    return NamedCase(
        case_id="linear_s4",
        spec=spec,
        description="linear moisture transport benchmark with periodic ambient forcing",
    )


def _nonlinear_admissible_upper() -> float:
    """Largest u below which the nonlinear storage law stays positive."""
    law = CoefficientLaw(900.0, -400.0, 1e4, 10.0, 2.3)
    lo, hi = 2.3, 4.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if law(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return lo


def build_nonlinear_case(*, node_count: int = 101, dt: float = 1e-3,
                         mode: str = "fixed", safety: float = 0.9) -> NamedCase:
    """Nonlinear benchmark: field-dependent storage and diffusion laws.

    d(u) = 1 + 0.91 u + 600 exp(-10 (u - 2.3)^2) and
    c(u) = 900 - 400 u + 1e4 exp(-10 (u - 2.3)^2) with Pe = 10 and strongly
    asymmetric Biot numbers; the forcing drives the field toward the
    capillary region around u = 2.3.  The storage law turns negative beyond
    u ~ 2.9, which caps the admissible range.
    """
    u_max = np.floor(_nonlinear_admissible_upper() * 100.0) / 100.0
    spec = ProblemSpec(
        grid=Grid1D.with_nodes(node_count),
        time=TimeControls(step=dt, horizon=48.0, mode=mode, safety=safety),
        material=MaterialModel(
            storage=CoefficientLaw(900.0, -400.0, 1e4, 10.0, 2.3),
            diffusion=CoefficientLaw(1.0, 0.91, 600.0, 10.0, 2.3),
            admissible_range=(0.0, float(u_max)),
        ),
        peclet=PecletModel.constant(10.0),
        left=RobinBoundary(
            side="left", biot=28.75,
            ambient=AmbientSignal(1.0, (Sinusoid(0.5, 12.0),)),
        ),
        right=RobinBoundary(
            side="right", biot=4.28,
            ambient=AmbientSignal(1.0, (Sinusoid(0.85, 24.0), Sinusoid(0.1, 0.5))),
        ),
        initial_value=1.0,
        phi_initial=0.5,
    )
    return NamedCase(
        case_id="nonlinear_s5",
        spec=spec,
        description="nonlinear benchmark with moisture-dependent storage and diffusion",
    )


def build_gypsum_case(peclet: PecletModel | None = None, *,
                      node_count: int = 101, dt: float = 1e-2,
                      mode: str = "adaptive", safety: float = 0.9) -> NamedCase:
    """Gypsum board under a 48 h adsorption/desorption cycle (30-72-30 %RH).

    Both faces see the same square cycle stepping at 24 h; the boundary
    balance includes the advective term.  The Biot number follows from a
    surface coefficient of 2.41e-8 s/m on a 37.5 mm board with reference
    diffusion 5.6e-11 s.  Probes sit at 12.5 and 25 mm depth.
    """
    if peclet is None:
        peclet = PecletModel.constant(GYPSUM_DEFAULT_PECLET)
    phi_i = 0.3
    cycle = AmbientSignal(
        offset=0.0,
        steps=((0.0, 24.0, 0.72 / phi_i), (24.0, 48.0, 0.30 / phi_i)),
    )
    spec = ProblemSpec(
        grid=Grid1D.with_nodes(node_count),
        time=TimeControls(step=dt, horizon=48.0, mode=mode, safety=safety),
        material=MaterialModel.constant(GYPSUM_STORAGE, 1.0),
        peclet=peclet,
        left=RobinBoundary(side="left", biot=GYPSUM_BIOT, ambient=cycle, advective=True),
        right=RobinBoundary(side="right", biot=GYPSUM_BIOT, ambient=cycle, advective=True),
        initial_value=1.0,
        phi_initial=phi_i,
    )
    return NamedCase(
        case_id="gypsum_s6",
        spec=spec,
        description="gypsum board, 48 h adsorption/desorption cycle with advective boundaries",
        probes=GYPSUM_PROBES,
    )


def build_case(case_id: str, **kwargs) -> NamedCase:
    """Build a case by id; keyword arguments override grid and time defaults."""
    builders = {
        "linear_s4": build_linear_case,
        "nonlinear_s5": build_nonlinear_case,
        "gypsum_s6": build_gypsum_case,
    }
    if case_id not in builders:
        raise ProblemDefinitionError(
            f"unknown case {case_id!r}; available: {', '.join(CASE_IDS)}"
        )
    return builders[case_id](**kwargs)


def with_discretization(case: NamedCase, *, dx: float | None = None,
                        dt: float | None = None, mode: str | None = None,
                        safety: float | None = None) -> NamedCase:
    """Copy of ``case`` with grid or time controls replaced."""
    spec = case.spec
    grid = spec.grid if dx is None else Grid1D.with_spacing(dx)
    time = TimeControls(
        step=spec.time.step if dt is None else dt,
        horizon=spec.time.horizon,
        mode=spec.time.mode if mode is None else mode,
        safety=spec.time.safety if safety is None else safety,
    )
    return replace(case, spec=replace(spec, grid=grid, time=time))
