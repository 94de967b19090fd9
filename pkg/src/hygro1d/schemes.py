"""Numerical schemes for the 1-D advection-diffusion equation.

Two discretizations are provided:

* an explicit exponential-fitting (Scharfetter-Gummel) finite-volume scheme
  whose interface fluxes solve a constant-flux two-point boundary-value
  problem on each cell, weighted by the Bernoulli function, and
* a Crank-Nicolson scheme with upwind advective fluxes, in a classical
  (constant-coefficient) form and an IMEX form that freezes the nonlinear
  coefficients at the current layer to avoid sub-iterations.

Flux conventions: the dimensionless flux is ``J = Pe*u - d(u)*du/dx`` and a
node update reads ``c_j du_j/dt = -(J_{j+1/2} - J_{j-1/2}) / w_j`` with cell
width ``w_j`` (half cells at the two boundary nodes).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import (
    DivergenceError,
    ProblemDefinitionError,
    SingularBoundaryError,
    SingularSystemError,
)
from .model import ProblemSpec, RobinBoundary

__all__ = [
    "InterfaceFlux",
    "SchemeCoefficients",
    "TridiagonalSystem",
    "bernoulli",
    "sg_interface_flux",
    "sg_boundary_flux_left",
    "sg_boundary_flux_right",
    "sg_step",
    "sg_cfl_max_dt",
    "sg_interpolate",
    "cn_assemble_linear",
    "cn_imex_step",
    "thomas_solve",
]


class InterfaceFlux(NamedTuple):
    """Flux value at a cell interface, tagged with the interface index."""

    value: float
    index: int


@dataclass(frozen=True)
class SchemeCoefficients:
    """Dimensionless step coefficients shared by the schemes.

    ``lam = nu*dt/(2*dx^2)``, ``gamma = a*dt/(2*dx)``,
    ``b_plus/b_minus = (1 +- sign(a))/2`` and ``theta = a*dx/nu``.
    """

    lam: float
    gamma: float
    b_plus: float
    b_minus: float
    theta: float

    @classmethod
    def from_coefficients(cls, a: float, nu: float, dx: float, dt: float) -> "SchemeCoefficients":
        if nu <= 0.0:
            raise ProblemDefinitionError(f"diffusion coefficient must be > 0, got {nu}")
        sgn = (a > 0.0) - (a < 0.0)
        return cls(
            lam=nu * dt / (2.0 * dx * dx),
            gamma=a * dt / (2.0 * dx),
            b_plus=0.5 * (1.0 + sgn),
            b_minus=0.5 * (1.0 - sgn),
            theta=a * dx / nu,
        )


def bernoulli(z):
    """Bernoulli function ``B(z) = z / (exp(z) - 1)``, extended by ``B(0) = 1``.

    Accurate to better than 1e-12 relative over ``|z| <= 50``; large negative
    arguments return the asymptote ``-z`` and large positive arguments decay
    to zero without overflowing.
    """
    z = np.asarray(z, dtype=float)
    scalar = z.ndim == 0
    z = np.atleast_1d(z)
    out = np.empty_like(z)

    small = np.abs(z) < 1e-5
    big = z > 500.0
    mid = ~(small | big)

    zs = z[small]
    z2 = zs * zs
    out[small] = 1.0 - 0.5 * zs + z2 / 12.0 - z2 * z2 / 720.0
    zm = z[mid]
    out[mid] = zm / np.expm1(zm)
    zb = z[big]
    e = np.exp(-zb)
    out[big] = zb * e / (1.0 - e)

    if scalar:
        return float(out[0])
    return out


def _phi1(x: float) -> float:
    # expm1(x)/x with the removable singularity at 0 filled in
    if abs(x) < 1e-8:
        return 1.0 + 0.5 * x + x * x / 6.0
    return math.expm1(x) / x


def sg_interface_flux(u_j, u_j1, a: float, nu: float, dx: float):
    """Exponential-fitting interface flux between two adjacent nodes.

    Solves ``J = a*u - nu*u'`` with end values ``u_j``, ``u_j1`` on a cell of
    width ``dx`` and returns the constant flux

        ``J = (nu/dx) * (-B(theta)*u_j1 + B(-theta)*u_j)``, ``theta = a*dx/nu``.
    """
    if nu <= 0.0:
        raise ProblemDefinitionError(f"diffusion coefficient must be > 0, got {nu}")
    if dx <= 0.0:
        raise ProblemDefinitionError(f"dx must be > 0, got {dx}")
    theta = a * dx / nu
    return (nu / dx) * (-bernoulli(theta) * np.asarray(u_j1, dtype=float)
                        + bernoulli(-theta) * np.asarray(u_j, dtype=float))


def _boundary_flux_left(u_1: float, bi: float, u_amb: float, g: float,
                        a: float, nu: float, dist: float, advective: bool) -> float:
    """Constant flux on the left boundary interval of length ``dist``.

    The classic form constrains the diffusive flux at the surface,
    ``nu*u' = Bi*(u - u_amb) - g``; the advective form constrains the total
    flux, ``J = Bi*(u_amb - u) + g``.  Both are the exact solution of the
    two-point boundary-value problem, written so the ``a -> 0`` limit is
    evaluated without cancellation.
    """
    theta_b = a * dist / nu
    s = (dist / nu) * _phi1(theta_b)  # = expm1(theta_b)/a, finite at a = 0
    if advective:
        den = 1.0 + (a + bi) * s
        if den == 0.0:
            raise SingularBoundaryError(bi, a, 2.0 * dist, nu)
        return (bi * (u_amb - u_1) + g + (bi * u_amb + g) * a * s) / den
    den = 1.0 + bi * s
    if den == 0.0:
        raise SingularBoundaryError(bi, a, 2.0 * dist, nu)
    return -(bi * (u_1 - u_amb) - g - a * u_1 - (bi * u_amb + g) * a * s) / den


def _boundary_flux_right(u_n: float, bi: float, u_amb: float,
                         a: float, nu: float, dist: float, advective: bool) -> float:
    """Constant flux on the right boundary interval of length ``dist``."""
    theta_b = a * dist / nu
    s = (dist / nu) * _phi1(theta_b)
    if advective:
        den = 1.0 + bi * s
        if den == 0.0:
            raise SingularBoundaryError(bi, a, 2.0 * dist, nu)
        return bi * (u_n - u_amb + u_n * a * s) / den
    den = 1.0 + (a + bi) * s
    if den == 0.0:
        raise SingularBoundaryError(bi, a, 2.0 * dist, nu)
    return (bi * (u_n - u_amb) + a * u_n + (a + bi) * u_n * a * s) / den


def sg_boundary_flux_left(u_1: float, boundary: RobinBoundary, t: float,
                          a: float, nu: float, dx: float) -> InterfaceFlux:
    """Closed-form flux through the left half cell, Robin side at distance dx/2.

    For the classic boundary form this evaluates

        ``J = a * [(Bi - a)*u_1 - (Bi*uL + g)*E] / [Bi - a - Bi*E]``

    with ``E = exp(a*dx/(2*nu))``; the removable ``a -> 0`` singularity is
    handled analytically and reproduces the diffusive Robin flux.
    """
    if boundary.side != "left":
        raise ProblemDefinitionError("expected a left boundary")
    if nu <= 0.0 or dx <= 0.0:
        raise ProblemDefinitionError("nu and dx must be > 0")
    u_amb = boundary.ambient.value(t)
    val = _boundary_flux_left(float(u_1), boundary.biot, u_amb, boundary.liquid_flux,
                              a, nu, 0.5 * dx, boundary.advective)
    return InterfaceFlux(val, 0)


def sg_boundary_flux_right(u_n: float, boundary: RobinBoundary, t: float,
                           a: float, nu: float, dx: float,
                           index: int = -1) -> InterfaceFlux:
    """Closed-form flux through the right half cell, Robin side at distance dx/2."""
    if boundary.side != "right":
        raise ProblemDefinitionError("expected a right boundary")
    if nu <= 0.0 or dx <= 0.0:
        raise ProblemDefinitionError("nu and dx must be > 0")
    u_amb = boundary.ambient.value(t)
    val = _boundary_flux_right(float(u_n), boundary.biot, u_amb,
                               a, nu, 0.5 * dx, boundary.advective)
    return InterfaceFlux(val, index)


def _interface_coefficients(state: np.ndarray, spec: ProblemSpec, t: float):
    """Nodal storage, interface diffusion (arithmetic mean) and Peclet value."""
    c = np.asarray(spec.material.storage(state), dtype=float)
    d = np.asarray(spec.material.diffusion(state), dtype=float)
    d_half = 0.5 * (d[:-1] + d[1:])
    pe = spec.peclet.value_at(t)
    return c, d, d_half, pe


def sg_fluxes(state: np.ndarray, spec: ProblemSpec, t: float) -> np.ndarray:
    """All fluxes seen by the finite-volume update: surface, interior, surface.

    Returns an array of ``node_count + 1`` values; entries 0 and -1 are the
    exact surface fluxes implied by the Robin conditions at the boundary
    nodes, the rest are interior exponential-fitting fluxes with
    frozen-coefficient interface values.
    """
    c, d, d_half, pe = _interface_coefficients(state, spec, t)
    dx = spec.grid.spacing
    n = state.size
    fluxes = np.empty(n + 1)
    theta = pe * dx / d_half
    fluxes[1:-1] = (d_half / dx) * (-bernoulli(theta) * state[1:] + bernoulli(-theta) * state[:-1])
    fluxes[0] = _boundary_flux_left(
        float(state[0]), spec.left.biot, spec.left.ambient.value(t),
        spec.left.liquid_flux, pe, float(d[0]), 0.0, spec.left.advective,
    )
    fluxes[-1] = _boundary_flux_right(
        float(state[-1]), spec.right.biot, spec.right.ambient.value(t),
        pe, float(d[-1]), 0.0, spec.right.advective,
    )
    return fluxes


def sg_step(state: np.ndarray, spec: ProblemSpec, t: float, dt: float) -> np.ndarray:
    """One explicit exponential-fitting step of size ``dt`` starting at ``t``.

    ``u_j^{n+1} = u_j^n - dt/(c_j w_j) * (J_{j+1/2} - J_{j-1/2})`` with full
    cell widths in the interior and half cells at the boundary nodes, whose
    outer fluxes are the exact surface fluxes of the Robin conditions.
    """
    state = np.asarray(state, dtype=float)
    c, _, _, _ = _interface_coefficients(state, spec, t)
    fluxes = sg_fluxes(state, spec, t)
    dx = spec.grid.spacing
    w = np.full(state.size, dx)
    w[0] = w[-1] = 0.5 * dx
    new = state - (dt / (c * w)) * np.diff(fluxes)
    if not np.all(np.isfinite(new)):
        bad = int(np.flatnonzero(~np.isfinite(new))[0])
        raise DivergenceError(step=0, node=bad)
    return new


def sg_cfl_max_dt(spec: ProblemSpec, state: np.ndarray | None = None, t: float = 0.0) -> float:
    """Largest stable step of the explicit scheme at the current state.

    Nodewise bound ``dt_j = (c_j*dx/|Pe|) * tanh(Pe*dx/(2*d_j))`` with the
    analytic limit ``c_j*dx^2/(2*d_j)`` at ``Pe = 0``; returns the minimum
    over nodes.
    """
    if state is None:
        state = spec.initial_state()
    state = np.asarray(state, dtype=float)
    c = np.asarray(spec.material.storage(state), dtype=float)
    d = np.asarray(spec.material.diffusion(state), dtype=float)
    pe = spec.peclet.value_at(t)
    dx = spec.grid.spacing
    if pe == 0.0:
        bounds = c * dx * dx / (2.0 * d)
    else:
        bounds = (c * dx / abs(pe)) * np.tanh(abs(pe) * dx / (2.0 * d))
    return float(np.min(bounds))


def sg_boundary_safe_dt(spec: ProblemSpec, state: np.ndarray | None = None,
                        t: float = 0.0) -> float:
    """Positivity bound of the two half-cell boundary updates.

    The half cells react faster than interior cells when the Biot numbers
    are large; adaptive stepping uses the minimum of this bound and
    :func:`sg_cfl_max_dt`.
    """
    if state is None:
        state = spec.initial_state()
    state = np.asarray(state, dtype=float)
    c, d, d_half, pe = _interface_coefficients(state, spec, t)
    dx = spec.grid.spacing

    def one_side(d_iface, c_node, bi, advective, right):
        theta = pe * dx / d_iface
        b = bernoulli(theta if right else -theta)
        grad = (d_iface / dx) * b + bi
        if not right and not advective:
            grad -= pe
        if right and not advective:
            grad += pe
        if grad <= 0.0:
            return math.inf
        return c_node * (0.5 * dx) / grad

    left = one_side(float(d_half[0]), float(c[0]), spec.left.biot, spec.left.advective, False)
    right = one_side(float(d_half[-1]), float(c[-1]), spec.right.biot, spec.right.advective, True)
    return min(left, right)


def sg_interpolate(x: float, x_j: float, x_j1: float, u_j: float, u_j1: float,
                   a: float, nu: float, flux: float) -> float:
    """Exact in-cell interpolant of the constant-flux two-point problem.

    ``u(x) = J/a + (u_j - u_j1) * e^{a x/nu} / (e^{a x_j/nu} - e^{a x_j1/nu})``
    evaluated in overflow-safe form; ``a = 0`` falls back to linear
    interpolation.
    """
    if not x_j <= x <= x_j1:
        raise ProblemDefinitionError(f"x={x} outside cell [{x_j}, {x_j1}]")
    dx = x_j1 - x_j
    theta = a * dx / nu
    if abs(theta) < 1e-12:
        w = (x - x_j) / dx
        return (1.0 - w) * u_j + w * u_j1
    if theta > 0.0:
        ratio = math.exp(a * (x - x_j1) / nu) / math.expm1(-theta)
    else:
        ratio = -math.exp(a * (x - x_j) / nu) / math.expm1(theta)
    return flux / a + (u_j - u_j1) * ratio


@dataclass
class TridiagonalSystem:
    """Tridiagonal system ``lower[j]*u[j-1] + diag[j]*u[j] + upper[j]*u[j+1] = rhs[j]``.

    ``lower[0]`` and ``upper[-1]`` are ignored by convention.
    """

    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray
    rhs: np.ndarray

    def __post_init__(self):
        n = self.diag.size
        if not (self.lower.size == self.upper.size == self.rhs.size == n):
            raise ProblemDefinitionError("tridiagonal arrays must share one length")

    @property
    def size(self) -> int:
        return self.diag.size


def thomas_solve(system: TridiagonalSystem) -> np.ndarray:
    """Solve a tridiagonal system by forward elimination and back substitution."""
    n = system.size
    diag = system.diag
    lower = system.lower
    upper = system.upper
    rhs = system.rhs
    scale = float(np.max(np.abs(diag)) + np.max(np.abs(lower)) + np.max(np.abs(upper)))
    tiny = 1e-300 if scale == 0.0 else scale * 1e-280

    w = np.empty(n)
    g = np.empty(n)
    piv = diag[0]
    if abs(piv) < tiny:
        raise SingularSystemError(0)
    w[0] = upper[0] / piv
    g[0] = rhs[0] / piv
    for j in range(1, n):
        piv = diag[j] - lower[j] * w[j - 1]
        if abs(piv) < tiny:
            raise SingularSystemError(j)
        w[j] = upper[j] / piv
        g[j] = (rhs[j] - lower[j] * g[j - 1]) / piv
    out = np.empty(n)
    out[-1] = g[-1]
    for j in range(n - 2, -1, -1):
        out[j] = g[j] - w[j] * out[j + 1]
    return out


def _cn_rows(state, c, d_half, d_node, pe, spec, dx, dt, t_new):
    """Assemble the IMEX Crank-Nicolson tridiagonal system.

    Interior rows use the CN average of upwind advective and central
    diffusive fluxes with coefficients frozen at the current layer; the two
    boundary rows discretize the Robin conditions one-sidedly, implicit at
    the new layer.
    """
    n = state.size
    lower = np.zeros(n)
    diag = np.zeros(n)
    upper = np.zeros(n)
    rhs = np.zeros(n)

    sgn = (pe > 0.0) - (pe < 0.0)
    bp = 0.5 * (1.0 + sgn)
    bm = 0.5 * (1.0 - sgn)

    cj = c[1:-1]
    lam_r = d_half[1:] * dt / (2.0 * dx * dx * cj)
    lam_l = d_half[:-1] * dt / (2.0 * dx * dx * cj)
    gam = pe * dt / (2.0 * dx * cj)

    diag[1:-1] = 1.0 + gam * (bp - bm) + lam_r + lam_l
    upper[1:-1] = -(lam_r - gam * bm)
    lower[1:-1] = -(gam * bp + lam_l)
    rhs[1:-1] = ((1.0 - gam * (bp - bm) - lam_r - lam_l) * state[1:-1]
                 + (lam_r - gam * bm) * state[2:]
                 + (gam * bp + lam_l) * state[:-2])

    # Robin rows, first order one-sided, new-layer ambient values
    bl, br = spec.left, spec.right
    d0 = d_node[0]
    diag[0] = d0 / dx + bl.biot + (pe if bl.advective else 0.0)
    upper[0] = -d0 / dx
    rhs[0] = bl.biot * bl.ambient.value(t_new) + bl.liquid_flux
    dn = d_node[-1]
    diag[-1] = dn / dx + br.biot - (pe if br.advective else 0.0)
    lower[-1] = -dn / dx
    rhs[-1] = br.biot * br.ambient.value(t_new)

    if np.any(diag == 0.0):
        raise SingularSystemError(int(np.flatnonzero(diag == 0.0)[0]))
    return TridiagonalSystem(lower, diag, upper, rhs)


def cn_assemble_linear(state: np.ndarray, spec: ProblemSpec, t: float, t_new: float) -> TridiagonalSystem:
    """Crank-Nicolson system for one step of a constant-coefficient problem."""
    if not spec.material.is_constant:
        raise ProblemDefinitionError(
            "cn_assemble_linear requires u-independent material laws; use cn_imex_step"
        )
    state = np.asarray(state, dtype=float)
    c, d_node, d_half, pe = _interface_coefficients(state, spec, t)
    return _cn_rows(state, c, d_half, d_node, pe, spec, spec.grid.spacing,
                    t_new - t, t_new)


def cn_imex_step(state: np.ndarray, spec: ProblemSpec, t: float, dt: float) -> np.ndarray:
    """One IMEX Crank-Nicolson step with coefficients frozen at layer ``t``.

    For constant coefficients this is identical to the classical scheme; for
    field-dependent coefficients it avoids sub-iterations at the cost of one
    order in time.
    """
    state = np.asarray(state, dtype=float)
    c, d_node, d_half, pe = _interface_coefficients(state, spec, t)
    system = _cn_rows(state, c, d_half, d_node, pe, spec, spec.grid.spacing, dt, t + dt)
    return thomas_solve(system)
