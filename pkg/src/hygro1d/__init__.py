"""hygro1d: 1-D advection-diffusion solver for moisture transfer in porous media.

The package solves ``c(u) du/dt = (d(u) u_x)_x - Pe u_x`` on [0, 1] with
Robin boundaries, using an explicit exponential-fitting finite-volume scheme
and Crank-Nicolson variants, and provides error/convergence harnesses,
sensitivity analysis and Peclet-number estimation against humidity series.
"""

from .analysis import (
    MeasurementSeries,
    PecletFit,
    SensitivitySeries,
    fit_peclet_constant,
    fit_peclet_piecewise,
    generate_synthetic_measurements,
    read_measurements,
    sensitivity,
    write_measurements,
)
from .cases import NamedCase, build_case, build_gypsum_case, build_linear_case, build_nonlinear_case
from .config import problem_from_json, problem_to_json
from .driver import RunReport, solve, steady_state_solve
from .errors import (
    CflViolationError,
    DivergenceError,
    FitInfeasibleError,
    OracleUnreliableError,
    PhysicalRangeWarning,
    ProblemDefinitionError,
    SingularBoundaryError,
    SingularSystemError,
    SteadyStateError,
)
from .metrics import (
    ConvergenceTable,
    ErrorReport,
    error_vs_reference,
    fit_convergence,
    l2_errors,
    observed_order,
    reference_solution,
)
from .model import (
    AmbientSignal,
    CoefficientLaw,
    DimensionalScenario,
    Grid1D,
    MaterialModel,
    PecletModel,
    ProbeSet,
    ProblemSpec,
    RobinBoundary,
    Sinusoid,
    SolutionField,
    TimeControls,
    eval_boundary_signal,
    nondimensionalize,
    relative_humidity,
)
from .schemes import (
    InterfaceFlux,
    SchemeCoefficients,
    TridiagonalSystem,
    bernoulli,
    cn_assemble_linear,
    cn_imex_step,
    sg_boundary_flux_left,
    sg_boundary_flux_right,
    sg_cfl_max_dt,
    sg_interface_flux,
    sg_interpolate,
    sg_step,
    thomas_solve,
)

__version__ = "0.1.0"
