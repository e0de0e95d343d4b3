"""Coupled fluid-body stepping and the energy budget audit.

The step functions in fluid.py advance one scenario each; this module
dispatches on the scenario, accumulates the per-step dissipation tallies
into running series, and checks the discrete energy budget

    E(t_n) + D(t_n) <= E(0),    D = eps-weighted viscous + slip terms,

which is the quantity the solver is supposed to keep nonincreasing. It also
provides the standalone surface-traction quadrature used by the body ODE
right sides, with the body-outward normal convention

    force = sum_q w_q (-p I + eps T) n_q,

so a positive pressure gradient pushes the body down-gradient.
"""

from dataclasses import dataclass, field

import numpy as np

from .core import RHO_FLOOR, FluidState, GasLaw, RigidState, SolverParams
from .errors import CouplingError
from .fluid import (
    DiscMesh,
    PistonMesh,
    StepDiagnostics,
    step_disc_2d,
    step_piston_1d,
)
from .rigid import Traction, kinetic_energy


def fluid_energies(fluid: FluidState, law: GasLaw):
    """Kinetic and pressure-potential energy of the gas, as a pair."""
    rho = np.maximum(fluid.rho, RHO_FLOOR)
    ke = 0.5 * float(np.sum(np.sum(fluid.mom ** 2, axis=1) / rho
                            * fluid.cell_volumes))
    pe = float(np.sum(fluid.rho ** law.gamma / (law.gamma - 1.0)
                      * fluid.cell_volumes))
    return ke, pe


def grid_interpolant(mesh: DiscMesh, values):
    """Bilinear interpolant for cell-centered grid data.

    values has shape (nx, ny) or (nx, ny, ...) with trailing component
    axes. The returned callable maps points (n, 2) to interpolated values
    and raises CouplingError when a point leaves the hull of cell centers.
    """
    values = np.asarray(values, dtype=float)
    nx, ny = mesh.nx, mesh.ny
    if values.shape[:2] != (nx, ny):
        raise ValueError(f"values shaped {values.shape} do not match the "
                         f"{nx} x {ny} grid")

    def interp(pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        fx = (pts[:, 0] - (mesh.x0 + 0.5 * mesh.dx)) / mesh.dx
        fy = (pts[:, 1] - (mesh.y0 + 0.5 * mesh.dy)) / mesh.dy
        if np.any(fx < 0) or np.any(fx > nx - 1) \
                or np.any(fy < 0) or np.any(fy > ny - 1):
            raise CouplingError("interpolation point outside the grid "
                                "stencil hull")
        i0 = np.minimum(fx.astype(int), nx - 2)
        j0 = np.minimum(fy.astype(int), ny - 2)
        tx = fx - i0
        ty = fy - j0
        extra = (1,) * (values.ndim - 2)
        tx = tx.reshape(-1, *extra)
        ty = ty.reshape(-1, *extra)
        return (values[i0, j0] * (1 - tx) * (1 - ty)
                + values[i0 + 1, j0] * tx * (1 - ty)
                + values[i0, j0 + 1] * (1 - tx) * ty
                + values[i0 + 1, j0 + 1] * tx * ty)

    return interp


def surface_traction(p_field, stress_field, rb: RigidState, epsilon: float,
                     quadrature) -> Traction:
    """Net pressure and viscous force/torque on the body boundary.

    quadrature is the world-frame triple (points, outward normals, weights)
    of the body surface. stress_field is only evaluated when epsilon > 0
    and may be None otherwise.
    """
    pts, normals, w = quadrature
    p = np.asarray(p_field(pts), dtype=float)
    if not np.all(np.isfinite(p)):
        raise CouplingError("pressure field not interpolable at quadrature "
                            "points")
    tr = -p[:, None] * normals
    if epsilon > 0.0:
        T = np.asarray(stress_field(pts), dtype=float)
        if not np.all(np.isfinite(T)):
            raise CouplingError("stress field not interpolable at quadrature "
                                "points")
        tr = tr + epsilon * np.einsum("qij,qj->qi", T, normals)
    force = w @ tr
    r = pts - rb.X
    if rb.dim == 2:
        torque = float(np.sum(w * (r[:, 0] * tr[:, 1] - r[:, 1] * tr[:, 0])))
    else:
        torque = np.einsum("q,qi->i", w, np.cross(r, tr))
    return Traction(force=force, torque=torque)


@dataclass
class EnergyReport:
    """Time series of the coupled energy budget.

    Dissipation columns are cumulative eps-weighted integrals, so the
    budget check is simply E_total[n] + sum of the three columns at n
    against E_total[0].
    """

    time: list = field(default_factory=list)
    E_total: list = field(default_factory=list)
    E_fluid_kin: list = field(default_factory=list)
    E_fluid_press: list = field(default_factory=list)
    E_body: list = field(default_factory=list)
    diss_visc: list = field(default_factory=list)
    diss_bdry_wall: list = field(default_factory=list)
    diss_bdry_body: list = field(default_factory=list)
    mass_fluid: list = field(default_factory=list)
    mass_body: list = field(default_factory=list)
    X: list = field(default_factory=list)
    V: list = field(default_factory=list)
    omega: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.time)

    def append_state(self, fluid: FluidState, rb: RigidState, law: GasLaw,
                     diag: StepDiagnostics | None = None) -> None:
        ke, pe = fluid_energies(fluid, law)
        eb = kinetic_energy(rb)
        dv = self.diss_visc[-1] if self.diss_visc else 0.0
        dw = self.diss_bdry_wall[-1] if self.diss_bdry_wall else 0.0
        db = self.diss_bdry_body[-1] if self.diss_bdry_body else 0.0
        if diag is not None:
            dv += diag.diss_visc
            dw += diag.diss_wall
            db += diag.diss_body
        mass = float(np.sum(fluid.rho * fluid.cell_volumes))
        row = (fluid.time, ke + pe + eb, ke, pe, eb, dv, dw, db, mass, rb.M)
        if not np.all(np.isfinite(row)):
            raise CouplingError("non-finite value in energy report row")
        self.time.append(float(fluid.time))
        self.E_total.append(ke + pe + eb)
        self.E_fluid_kin.append(ke)
        self.E_fluid_press.append(pe)
        self.E_body.append(eb)
        self.diss_visc.append(dv)
        self.diss_bdry_wall.append(dw)
        self.diss_bdry_body.append(db)
        self.mass_fluid.append(mass)
        self.mass_body.append(rb.M)
        self.X.append(np.array(rb.X, dtype=float))
        self.V.append(np.array(rb.V, dtype=float))
        self.omega.append(np.atleast_1d(np.asarray(rb.omega,
                                                   dtype=float)).copy())

    def as_arrays(self) -> dict:
        out = {k: np.asarray(getattr(self, k))
               for k in ("time", "E_total", "E_fluid_kin", "E_fluid_press",
                         "E_body", "diss_visc", "diss_bdry_wall",
                         "diss_bdry_body", "mass_fluid", "mass_body")}
        out["X"] = np.vstack(self.X) if self.X else np.empty((0, 0))
        out["V"] = np.vstack(self.V) if self.V else np.empty((0, 0))
        out["omega"] = np.vstack(self.omega) if self.omega else \
            np.empty((0, 0))
        return out


def coupled_step(fluid: FluidState, rb: RigidState, domain,
                 params: SolverParams, law: GasLaw,
                 report: EnergyReport | None = None):
    """Advance the coupled system one step.

    domain selects the scenario: a PistonMesh for the 1D channel, or a
    (DiscMesh, BodyShape) pair for the 2D box. When a report is given the
    new state is appended (with a baseline row first if it is empty).
    """
    if isinstance(domain, PistonMesh):
        out = step_piston_1d(fluid, rb, domain, params, law)
    elif isinstance(domain, tuple) and len(domain) == 2 \
            and isinstance(domain[0], DiscMesh):
        mesh, shape = domain
        out = step_disc_2d(fluid, rb, shape, mesh, params, law)
    else:
        raise TypeError("domain must be a PistonMesh or a "
                        "(DiscMesh, BodyShape) pair")
    fluid2, rb2, trac, diag = out
    if report is not None:
        if len(report) == 0:
            report.append_state(fluid, rb, law)
        report.append_state(fluid2, rb2, law, diag)
    return fluid2, rb2, trac, diag


@dataclass(frozen=True)
class AuditSummary:
    E0: float
    max_violation: float
    tolerance: float
    passed: bool
    argmax_time: float


def energy_audit(report: EnergyReport, tol_rel: float = 1e-3) -> AuditSummary:
    """Largest positive excess of E(t_n) + dissipation over E(0).

    Passes when the excess stays within tol_rel * E(0).
    """
    if len(report) == 0:
        raise ValueError("energy report is empty")
    E = np.asarray(report.E_total)
    D = (np.asarray(report.diss_visc) + np.asarray(report.diss_bdry_wall)
         + np.asarray(report.diss_bdry_body))
    excess = E + D - E[0]
    k = int(np.argmax(excess))
    max_violation = max(0.0, float(excess[k]))
    tol = tol_rel * float(E[0])
    return AuditSummary(E0=float(E[0]), max_violation=max_violation,
                        tolerance=tol, passed=max_violation <= tol,
                        argmax_time=float(report.time[k]))
