"""Finite-volume solvers for the barotropic gas.

Shared pieces: a Rusanov flux (ALE-capable via a face speed), the viscous
stress T(u) = grad u + grad u^T + (div u) I, and mirror-ghost slip
closures. Two scenarios are built from them:

* 1D piston in a channel, sharp interface on a moving mesh whose nodes
  follow the piston faces affinely (the geometric conservation law holds
  by construction);
* 2D disc in a box on a fixed Cartesian grid, with the interface imposed
  by relaxing the normal relative velocity inside the body and the
  traction sampled on a surface quadrature.

Tangential slip friction scales with the same epsilon as the volume
viscosity: the fluid sees a tangential force density -eps * u_tan on the
outer walls and -eps * (u_F - u_B)_tan on the body surface, the body the
opposite of the latter. The per-step dissipation tallies integrate
|grad u|^2 + (div u)^2 and the squared tangential slips, i.e. exactly the
quantities whose epsilon-weighted time integrals the energy audit adds
back to E(t).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (
    RHO_FLOOR,
    FluidState,
    GasLaw,
    RigidState,
    SolverParams,
    eos_pressure,
    polar_orthonormalize,
    rigid_velocity,
    rotation_exp,
    sound_speed,
)
from .errors import GeometryError, SolverError
from .geometry import boundary_quadrature_world, signed_distance
from .rigid import Traction, rigid_rates

VACUUM_FRACTION = 0.10  # fraction of near-vacuum cells that aborts a run


# ---------------------------------------------------------------------------
# flux and stress
# ---------------------------------------------------------------------------

def numerical_flux(left, right, normal, law: GasLaw, face_speed=0.0):
    """Rusanov flux of the conserved state (rho, m) across a face.

    left/right: conserved states, shape (k, 1+d) or (1+d,). normal: unit
    face normal, scalar +-1 in 1D or shape (d,). face_speed: normal speed
    of the face itself (ALE). Consistent: flux(w, w, n) is the exact flux
    of w through a static face.
    """
    wl = np.atleast_2d(np.asarray(left, dtype=float))
    wr = np.atleast_2d(np.asarray(right, dtype=float))
    if not (np.all(np.isfinite(wl)) and np.all(np.isfinite(wr))):
        raise ValueError("non-finite state in numerical_flux")
    d = wl.shape[1] - 1
    n = np.asarray(normal, dtype=float).reshape(-1, d) if d > 1 else \
        np.asarray(normal, dtype=float).reshape(-1, 1)
    w = np.asarray(face_speed, dtype=float)

    def f_normal(state):
        rho = state[:, 0]
        m = state[:, 1:]
        p = eos_pressure(rho, law)
        un = np.sum(m * n, axis=1) / np.maximum(rho, RHO_FLOOR)
        flux = np.empty_like(state)
        flux[:, 0] = rho * un
        flux[:, 1:] = m * un[:, None] + p[:, None] * n
        # ALE: subtract the face motion's share of the conserved transport
        flux -= w.reshape(-1, 1) * state if np.ndim(w) else w * state
        return flux, un

    fl, unl = f_normal(wl)
    fr, unr = f_normal(wr)
    cl = sound_speed(wl[:, 0], law)
    cr = sound_speed(wr[:, 0], law)
    s = np.maximum(np.abs(unl - w) + cl, np.abs(unr - w) + cr)
    out = 0.5 * (fl + fr) - 0.5 * s[:, None] * (wr - wl)
    return out if out.shape[0] > 1 else out[0]


def viscous_stress(u, mesh):
    """Cell-centered stress T(u) = grad u + grad u^T + (div u) I.

    1D: u of shape (n,) with mesh the cell-center coordinates (possibly
    nonuniform); returns (n, 1, 1) holding 3 du/dx. 2D: u of shape
    (nx, ny, 2) with mesh = (dx, dy); returns (nx, ny, 2, 2). Central
    differences inside, second-order one-sided at the edges.
    """
    u = np.asarray(u, dtype=float)
    if u.ndim == 1:
        x = np.asarray(mesh, dtype=float)
        ux = np.gradient(u, x, edge_order=2)
        return 3.0 * ux[:, None, None]
    dx, dy = mesh
    d1x = np.gradient(u[:, :, 0], dx, axis=0, edge_order=2)
    d1y = np.gradient(u[:, :, 0], dy, axis=1, edge_order=2)
    d2x = np.gradient(u[:, :, 1], dx, axis=0, edge_order=2)
    d2y = np.gradient(u[:, :, 1], dy, axis=1, edge_order=2)
    div = d1x + d2y
    T = np.empty(u.shape[:2] + (2, 2))
    T[:, :, 0, 0] = 2.0 * d1x + div
    T[:, :, 1, 1] = 2.0 * d2y + div
    T[:, :, 0, 1] = T[:, :, 1, 0] = d1y + d2x
    return T


def mirror_state(rho, u_n, face_speed):
    """Slip ghost across a face moving at face_speed: density copied, the
    normal velocity reflected about the face speed."""
    return rho, 2.0 * face_speed - u_n


def navier_slip_closure(u_n, u_tan_rel, face_speed, epsilon):
    """Boundary closure for the slip condition.

    Returns (ghost normal velocity, tangential traction on the fluid).
    The ghost enforces zero normal relative velocity at the face; the
    traction is the friction -epsilon * tangential slip (zero for
    epsilon = 0, and in 1D where the tangential space is empty).
    """
    _, ghost = mirror_state(1.0, u_n, face_speed)
    return ghost, -epsilon * np.asarray(u_tan_rel, dtype=float)


# ---------------------------------------------------------------------------
# step diagnostics
# ---------------------------------------------------------------------------

@dataclass
class StepDiagnostics:
    """Per-step bookkeeping consumed by the energy audit and the harness.

    diss_* are energies dissipated during this step already weighted by
    epsilon; the *_sq entries are the unweighted time integrals of the
    squared stress norm / squared tangential slips over the step.
    """

    dt: float
    diss_visc: float = 0.0
    diss_wall: float = 0.0
    diss_body: float = 0.0
    stress_sq: float = 0.0
    wall_slip_sq: float = 0.0
    body_slip_sq: float = 0.0
    interface_impulse: np.ndarray = field(default_factory=lambda: np.zeros(1))
    action_reaction_mismatch: float = 0.0


# ---------------------------------------------------------------------------
# 1D piston scenario
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PistonMesh:
    """Moving two-region mesh for the piston channel.

    The gas occupies [x_left, X - half_length] and [X + half_length,
    x_right]; each region is an affine lattice, so the piston faces sit at
    X -+ half_length exactly and interior nodes follow affinely.
    """

    x_left: float
    x_right: float
    half_length: float
    n_left: int
    n_right: int
    sigma: float

    def __post_init__(self):
        # lattice templates, cached because nodes() sits on the hot path
        object.__setattr__(self, "_idx_l",
                           np.arange(self.n_left + 1, dtype=float))
        object.__setattr__(self, "_idx_r",
                           np.arange(self.n_right + 1, dtype=float))
        object.__setattr__(self, "_unit_l",
                           np.linspace(0.0, 1.0, self.n_left + 1))
        object.__setattr__(self, "_unit_r",
                           np.linspace(1.0, 0.0, self.n_right + 1))

    def nodes(self, X: float):
        a, b = X - self.half_length, X + self.half_length
        xl = self._idx_l * ((a - self.x_left) / self.n_left) + self.x_left
        xr = self._idx_r * ((self.x_right - b) / self.n_right) + b
        # affine lattice endpoints must be exact for the flux bookkeeping
        xl[-1] = a
        xr[0] = b
        xr[-1] = self.x_right
        return xl, xr

    def node_velocities(self, V: float):
        return V * self._unit_l, V * self._unit_r

    def gap(self, X: float) -> float:
        return min(X - self.half_length - self.x_left,
                   self.x_right - X - self.half_length)


def piston_state(mesh: PistonMesh, rb: RigidState, rho_fn, u_fn) -> FluidState:
    """Assemble a FluidState from density/velocity profiles on the piston mesh."""
    xl, xr = mesh.nodes(rb.X[0])
    centers = np.concatenate([0.5 * (xl[1:] + xl[:-1]), 0.5 * (xr[1:] + xr[:-1])])
    vols = np.concatenate([np.diff(xl), np.diff(xr)])
    rho = np.asarray(rho_fn(centers), dtype=float)
    u = np.asarray(u_fn(centers), dtype=float)
    return FluidState(1, centers, vols, rho, (rho * u)[:, None], time=rb.time)


def ale_stage_1d(nodes, Q, law: GasLaw, epsilon: float, bc_left, bc_right,
                 node_vel, dt: float):
    """One forward-Euler stage of the 1D ALE scheme on a single region.

    nodes: face positions (n+1,); Q: per-cell conserved integrals
    (n, 2) = volume * (rho, m); bc_*: ("wall", speed) for a slip wall
    moving at that speed or ("state", (rho, u)) for a far-field state;
    node_vel: face velocities (n+1,).

    Returns (new nodes, new Q, info) with info carrying the boundary
    momentum fluxes (oriented +x) and the stage's dissipation rates.

    The Rusanov pass runs once over all n+1 faces with ghost cells
    closing both ends (mirror for a wall, the prescribed state for a far
    field); this routine sits on the piston hot path, so the flux math is
    inlined rather than routed through numerical_flux. Divergence shows
    up as non-finite output, checked by the step drivers.
    """
    n = Q.shape[0]
    vol = nodes[1:] - nodes[:-1]
    rho = Q[:, 0] / vol
    m = Q[:, 1] / vol
    u = m / np.maximum(rho, RHO_FLOOR)
    centers = 0.5 * (nodes[1:] + nodes[:-1])

    rho_e = np.empty(n + 2)
    m_e = np.empty(n + 2)
    rho_e[1:-1] = rho
    m_e[1:-1] = m
    for idx, adj, bc in ((0, 0, bc_left), (n + 1, n - 1, bc_right)):
        kind, val = bc
        if kind == "wall":
            rho_g, u_g = mirror_state(rho[adj], u[adj], val)
        else:
            rho_g, u_g = val
        rho_e[idx] = rho_g
        m_e[idx] = rho_g * u_g

    rho_f = np.maximum(rho_e, RHO_FLOOR)
    u_e = m_e / rho_f
    p_e = rho_e ** law.gamma
    c_e = np.sqrt(law.gamma * rho_f ** (law.gamma - 1.0))
    w = node_vel
    uL, uR = u_e[:-1] - w, u_e[1:] - w
    s = np.maximum(np.abs(uL) + c_e[:-1], np.abs(uR) + c_e[1:])
    rhoL, rhoR = rho_e[:-1], rho_e[1:]
    mL, mR = m_e[:-1], m_e[1:]
    G0 = 0.5 * (rhoL * uL + rhoR * uR - s * (rhoR - rhoL))
    G1 = 0.5 * (mL * uL + p_e[:-1] + mR * uR + p_e[1:] - s * (mR - mL))
    if bc_left[0] == "wall":
        G0[0] = 0.0  # impermeable: the mass flux is analytically zero
    if bc_right[0] == "wall":
        G0[-1] = 0.0

    # viscous momentum flux -3 eps du/dx at faces (one-sided at walls,
    # where the face velocity is the wall speed)
    dxc = centers[1:] - centers[:-1]
    ux_face = np.empty(n + 1)
    ux_face[1:-1] = (u[1:] - u[:-1]) / dxc
    dual = np.empty(n + 1)
    dual[1:-1] = dxc
    for idx, bc, xc, uc in ((0, bc_left, centers[0], u[0]),
                            (-1, bc_right, centers[-1], u[-1])):
        if bc[0] == "wall":
            # one-sided, oriented toward increasing x
            ux_face[idx] = (uc - bc[1]) / (xc - nodes[idx])
            dual[idx] = abs(xc - nodes[idx])
        else:
            ux_face[idx] = 0.0
            dual[idx] = 0.0
    if epsilon != 0.0:
        G1 -= 3.0 * epsilon * ux_face

    Q_new = np.empty_like(Q)
    Q_new[:, 0] = Q[:, 0] - dt * (G0[1:] - G0[:-1])
    Q_new[:, 1] = Q[:, 1] - dt * (G1[1:] - G1[:-1])
    nodes_new = nodes + dt * node_vel

    sq = float(np.sum(ux_face * ux_face * dual))
    info = {
        "G_left": np.array([G0[0], G1[0]]),
        "G_right": np.array([G0[-1], G1[-1]]),
        "grad_sq_rate": 2.0 * sq,
        "stress_sq_rate": 9.0 * sq,
    }
    return nodes_new, Q_new, info


def _dt_stable_1d(vol, u, w_cell, c, rho, params: SolverParams):
    dt = params.cfl * np.min(vol / (np.abs(u - w_cell) + c))
    if params.epsilon > 0.0:
        # explicit diffusion of velocity at rate 3*eps/rho; the one-sided
        # wall gradient tightens the interior h^2/(6*eps/rho) bound to
        # h^2/(9*...), so keep a margin beyond that
        rho_min = max(float(np.min(rho)), RHO_FLOOR)
        dt = min(dt, rho_min * np.min(vol) ** 2 / (12.0 * params.epsilon))
    return min(dt, params.dt_max)


def step_piston_1d(fluid: FluidState, rb: RigidState, mesh: PistonMesh,
                   params: SolverParams, law: GasLaw):
    """One coupled SSP-RK2 step of the piston scenario.

    Both stages advance fluid and body simultaneously from the same stage
    state; the force on the piston is assembled from the very face fluxes
    that move fluid momentum, so interface action-reaction is exact.
    """
    X, V = float(rb.X[0]), float(rb.V[0])
    if mesh.gap(X) < 0.5 * mesh.sigma:
        raise GeometryError(f"piston-wall gap {mesh.gap(X):.4g} below sigma/2")

    nl = mesh.n_left
    xl, xr = mesh.nodes(X)
    vols = np.concatenate([np.diff(xl), np.diff(xr)])
    Q = np.column_stack([fluid.rho * vols, fluid.mom[:, 0] * vols])

    u = fluid.mom[:, 0] / np.maximum(fluid.rho, RHO_FLOOR)
    wl, wr = mesh.node_velocities(V)
    w_cell = np.concatenate([0.5 * (wl[1:] + wl[:-1]), 0.5 * (wr[1:] + wr[:-1])])
    c = sound_speed(fluid.rho, law)
    dt = _dt_stable_1d(vols, u, w_cell, c, fluid.rho, params)

    def stage(QL, QR, X_s, V_s):
        """Advance both regions one Euler stage; force from the face fluxes."""
        xl_s, xr_s = mesh.nodes(X_s)
        wl_s, wr_s = mesh.node_velocities(V_s)
        _, QL2, infoL = ale_stage_1d(xl_s, QL, law, params.epsilon,
                                     ("wall", 0.0), ("wall", V_s), wl_s, dt)
        _, QR2, infoR = ale_stage_1d(xr_s, QR, law, params.epsilon,
                                     ("wall", V_s), ("wall", 0.0), wr_s, dt)
        force = infoL["G_right"][1] - infoR["G_left"][1]
        return QL2, QR2, force, infoL, infoR

    QL0, QR0 = Q[:nl], Q[nl:]
    # stage 1
    QL1, QR1, F0, iL0, iR0 = stage(QL0, QR0, X, V)
    X1 = X + dt * V
    V1 = V + dt * F0 / rb.M
    # stage 2 from the predictor state
    QL2, QR2, F1, iL1, iR1 = stage(QL1, QR1, X1, V1)
    QLn = 0.5 * (QL0 + QL2)
    QRn = 0.5 * (QR0 + QR2)
    Xn = 0.5 * (X + X1 + dt * V1)
    Vn = 0.5 * (V + V1 + dt * F1 / rb.M)

    rb_new = rb.copy()
    rb_new.X = np.array([Xn])
    rb_new.V = np.array([Vn])
    rb_new.time = rb.time + dt

    xl_n, xr_n = mesh.nodes(Xn)
    vols_n = np.concatenate([np.diff(xl_n), np.diff(xr_n)])
    centers_n = np.concatenate([0.5 * (xl_n[1:] + xl_n[:-1]),
                                0.5 * (xr_n[1:] + xr_n[:-1])])
    Qn = np.vstack([QLn, QRn])
    rho_n = Qn[:, 0] / vols_n
    mom_n = (Qn[:, 1] / vols_n)[:, None]

    if np.count_nonzero(rho_n < RHO_FLOOR) > VACUUM_FRACTION * len(rho_n):
        raise SolverError("vacuum collapse: density floor reached in "
                          f"{np.count_nonzero(rho_n < RHO_FLOOR)} cells")
    if not np.all(np.isfinite(rho_n)) or not np.all(np.isfinite(mom_n)):
        raise SolverError("solution diverged (non-finite fields)")
    rho_n = np.maximum(rho_n, 0.0)

    fluid_new = FluidState(1, centers_n, vols_n, rho_n, mom_n,
                           time=fluid.time + dt)

    force_avg = 0.5 * (F0 + F1)
    trac = Traction(np.array([force_avg]), 0.0)
    visc_rate = lambda iL, iR: iL["grad_sq_rate"] + iR["grad_sq_rate"]
    stress_rate = lambda iL, iR: iL["stress_sq_rate"] + iR["stress_sq_rate"]
    diag = StepDiagnostics(
        dt=dt,
        diss_visc=params.epsilon * 0.5 * dt * (visc_rate(iL0, iR0) + visc_rate(iL1, iR1)),
        stress_sq=0.5 * dt * (stress_rate(iL0, iR0) + stress_rate(iL1, iR1)),
        interface_impulse=np.array([dt * force_avg]),
        action_reaction_mismatch=0.0,
    )
    return fluid_new, rb_new, trac, diag


# ---------------------------------------------------------------------------
# 2D disc scenario
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DiscMesh:
    """Fixed Cartesian grid over the box [x0,x1] x [y0,y1] with slip walls."""

    x0: float
    x1: float
    y0: float
    y1: float
    nx: int
    ny: int
    sigma: float
    quad_n: int | None = None

    @property
    def dx(self) -> float:
        return (self.x1 - self.x0) / self.nx

    @property
    def dy(self) -> float:
        return (self.y1 - self.y0) / self.ny

    @property
    def xs(self):
        return self.x0 + (np.arange(self.nx) + 0.5) * self.dx

    @property
    def ys(self):
        return self.y0 + (np.arange(self.ny) + 0.5) * self.dy

    def centers(self):
        GX, GY = np.meshgrid(self.xs, self.ys, indexing="ij")
        return np.column_stack([GX.ravel(), GY.ravel()])

    def wall_gap(self, X, radius: float) -> float:
        return min(X[0] - radius - self.x0, self.x1 - X[0] - radius,
                   X[1] - radius - self.y0, self.y1 - X[1] - radius)


def disc_state(mesh: DiscMesh, rho_fn, u_fn, time=0.0) -> FluidState:
    """Assemble a FluidState from density/velocity profiles on the grid."""
    pts = mesh.centers()
    rho = np.asarray(rho_fn(pts), dtype=float)
    u = np.asarray(u_fn(pts), dtype=float)
    vols = np.full(len(pts), mesh.dx * mesh.dy)
    return FluidState(2, pts, vols, rho, rho[:, None] * u, time=time)


def _bilinear_weights(mesh: DiscMesh, pts):
    """Cell indices and weights of the 4-point stencil around each point."""
    gx = (pts[:, 0] - (mesh.x0 + 0.5 * mesh.dx)) / mesh.dx
    gy = (pts[:, 1] - (mesh.y0 + 0.5 * mesh.dy)) / mesh.dy
    i0 = np.clip(np.floor(gx).astype(int), 0, mesh.nx - 2)
    j0 = np.clip(np.floor(gy).astype(int), 0, mesh.ny - 2)
    tx = np.clip(gx - i0, 0.0, 1.0)
    ty = np.clip(gy - j0, 0.0, 1.0)
    return i0, j0, tx, ty


def bilinear_sample(mesh: DiscMesh, f, pts):
    """Bilinear interpolation of a cell-centered field f (nx, ny) at pts."""
    i0, j0, tx, ty = _bilinear_weights(mesh, pts)
    return ((1 - tx) * (1 - ty) * f[i0, j0] + tx * (1 - ty) * f[i0 + 1, j0]
            + (1 - tx) * ty * f[i0, j0 + 1] + tx * ty * f[i0 + 1, j0 + 1])


def _bilinear_scatter(mesh: DiscMesh, target, pts, values):
    """Adjoint of bilinear_sample: deposit values (m, k) into target (nx, ny, k)."""
    i0, j0, tx, ty = _bilinear_weights(mesh, pts)
    for di, dj, wgt in ((0, 0, (1 - tx) * (1 - ty)), (1, 0, tx * (1 - ty)),
                        (0, 1, (1 - tx) * ty), (1, 1, tx * ty)):
        np.add.at(target, (i0 + di, j0 + dj), wgt[:, None] * values)


def _pad_slip(rho, u):
    """Ghost framing for slip walls: density copied, normal velocity
    reflected, tangential velocity copied."""
    nx, ny = rho.shape
    rho_p = np.empty((nx + 2, ny + 2))
    u_p = np.empty((nx + 2, ny + 2, 2))
    rho_p[1:-1, 1:-1] = rho
    u_p[1:-1, 1:-1] = u
    # x walls
    rho_p[0, 1:-1] = rho[0]
    rho_p[-1, 1:-1] = rho[-1]
    u_p[0, 1:-1, 0] = -u[0, :, 0]
    u_p[0, 1:-1, 1] = u[0, :, 1]
    u_p[-1, 1:-1, 0] = -u[-1, :, 0]
    u_p[-1, 1:-1, 1] = u[-1, :, 1]
    # y walls
    rho_p[1:-1, 0] = rho[:, 0]
    rho_p[1:-1, -1] = rho[:, -1]
    u_p[1:-1, 0, 0] = u[:, 0, 0]
    u_p[1:-1, 0, 1] = -u[:, 0, 1]
    u_p[1:-1, -1, 0] = u[:, -1, 0]
    u_p[1:-1, -1, 1] = -u[:, -1, 1]
    # corners (unused by the face stencils, fill for safety)
    rho_p[0, 0] = rho[0, 0]
    rho_p[0, -1] = rho[0, -1]
    rho_p[-1, 0] = rho[-1, 0]
    rho_p[-1, -1] = rho[-1, -1]
    u_p[0, 0] = u_p[0, 1]
    u_p[0, -1] = u_p[0, -2]
    u_p[-1, 0] = u_p[-1, 1]
    u_p[-1, -1] = u_p[-1, -2]
    return rho_p, u_p


def step_disc_2d(fluid: FluidState, rb: RigidState, shape, mesh: DiscMesh,
                 params: SolverParams, law: GasLaw):
    """One coupled SSP-RK2 step of the disc-in-a-box scenario.

    Fluid and body advance simultaneously from each stage state; the body
    is driven by the surface-quadrature traction (pressure and eps T
    sampled bilinearly) plus the slip-friction exchange, whose reaction is
    scattered back onto the fluid so that friction is exactly
    action-reaction. After the step the cells inside the body are relaxed
    toward zero normal relative velocity (pointwise implicit); the
    penalization impulse is compared against the traction impulse and the
    difference reported, not hidden.
    """
    nx, ny = mesh.nx, mesh.ny
    dx, dy = mesh.dx, mesh.dy
    a = shape.radius
    if mesh.wall_gap(rb.X, a) < 0.5 * mesh.sigma:
        raise GeometryError(f"disc-wall gap {mesh.wall_gap(rb.X, a):.4g} "
                            "below sigma/2")

    rho0 = fluid.rho.reshape(nx, ny)
    m0 = fluid.mom.reshape(nx, ny, 2)
    u0 = m0 / np.maximum(rho0, RHO_FLOOR)[:, :, None]
    c0 = sound_speed(rho0, law)
    dt = params.cfl * min(np.min(dx / (np.abs(u0[:, :, 0]) + c0)),
                          np.min(dy / (np.abs(u0[:, :, 1]) + c0)))
    if params.epsilon > 0.0:
        # velocity diffuses at rate up to 3*eps/rho per direction; the 2D
        # explicit bound h^2/(4D) then needs extra room for the cross terms
        rho_min = max(float(np.min(rho0)), RHO_FLOOR)
        dt = min(dt, rho_min * min(dx, dy) ** 2 / (16.0 * params.epsilon))
    dt = min(dt, params.dt_max)

    a_max = float(np.max(np.abs(u0))) + float(np.max(c0))
    kappa = params.penalization_kappa or 1e4 * a_max / min(dx, dy)
    nq = mesh.quad_n or max(64, int(np.ceil(4.0 * np.pi * a / min(dx, dy))))

    def stage(rho, m, body: RigidState):
        u = m / np.maximum(rho, RHO_FLOOR)[:, :, None]
        rho_p, u_p = _pad_slip(rho, u)
        m_p = rho_p[:, :, None] * u_p
        U_p = np.concatenate([rho_p[:, :, None], m_p], axis=2)

        # inviscid fluxes
        L = U_p[0:nx + 1, 1:ny + 1].reshape(-1, 3)
        R = U_p[1:nx + 2, 1:ny + 1].reshape(-1, 3)
        Gx = numerical_flux(L, R, np.array([1.0, 0.0]), law).reshape(nx + 1, ny, 3)
        Gx[0, :, 0] = 0.0
        Gx[-1, :, 0] = 0.0
        B = U_p[1:nx + 1, 0:ny + 1].reshape(-1, 3)
        T_ = U_p[1:nx + 1, 1:ny + 2].reshape(-1, 3)
        Gy = numerical_flux(B, T_, np.array([0.0, 1.0]), law).reshape(nx, ny + 1, 3)
        Gy[:, 0, 0] = 0.0
        Gy[:, -1, 0] = 0.0

        eps = params.epsilon
        if eps > 0.0:
            # face-based viscous momentum fluxes
            dudx_f = (u_p[1:nx + 2, 1:ny + 1] - u_p[0:nx + 1, 1:ny + 1]) / dx
            dudy_c = (u_p[:, 2:] - u_p[:, :-2]) / (2 * dy)  # (nx+2, ny, 2)
            dudy_f = 0.5 * (dudy_c[0:nx + 1] + dudy_c[1:nx + 2])
            div_fx = dudx_f[:, :, 0] + dudy_f[:, :, 1]
            Gx[:, :, 1] -= eps * (2.0 * dudx_f[:, :, 0] + div_fx)
            Gx[:, :, 2] -= eps * (dudx_f[:, :, 1] + dudy_f[:, :, 0])

            dvdy_f = (u_p[1:nx + 1, 1:ny + 2] - u_p[1:nx + 1, 0:ny + 1]) / dy
            dvdx_c = (u_p[2:, :] - u_p[:-2, :]) / (2 * dx)  # (nx, ny+2, 2)
            dvdx_f = 0.5 * (dvdx_c[:, 0:ny + 1] + dvdx_c[:, 1:ny + 2])
            div_fy = dvdx_f[:, :, 0] + dvdy_f[:, :, 1]
            Gy[:, :, 2] -= eps * (2.0 * dvdy_f[:, :, 1] + div_fy)
            Gy[:, :, 1] -= eps * (dvdy_f[:, :, 0] + dvdx_f[:, :, 1])

        dU = -(Gx[1:] - Gx[:-1]) / dx - (Gy[:, 1:] - Gy[:, :-1]) / dy

        # wall friction: tangential force density -eps u_tan on each wall face
        wall_slip_rate = (np.sum(u[0, :, 1] ** 2) * dy
                          + np.sum(u[-1, :, 1] ** 2) * dy
                          + np.sum(u[:, 0, 0] ** 2) * dx
                          + np.sum(u[:, -1, 0] ** 2) * dx)
        if eps > 0.0:
            dU[0, :, 2] -= eps * u[0, :, 1] / dx
            dU[-1, :, 2] -= eps * u[-1, :, 1] / dx
            dU[:, 0, 1] -= eps * u[:, 0, 0] / dy
            dU[:, -1, 1] -= eps * u[:, -1, 0] / dy

        # body surface exchange
        qpts, qnrm, qw = boundary_quadrature_world(shape, body, nq)
        uF = np.column_stack([bilinear_sample(mesh, u[:, :, 0], qpts),
                              bilinear_sample(mesh, u[:, :, 1], qpts)])
        uB = rigid_velocity(body, qpts)
        slip = uF - uB
        slip_tan = slip - np.sum(slip * qnrm, axis=1)[:, None] * qnrm
        body_slip_rate = float(np.sum(qw * np.sum(slip_tan ** 2, axis=1)))

        p_c = eos_pressure(rho, law)
        p_q = bilinear_sample(mesh, p_c, qpts)
        tr_q = -p_q[:, None] * qnrm
        if eps > 0.0:
            Tc = viscous_stress(u, (dx, dy))
            for ii in range(2):
                for jj in range(2):
                    tr_q[:, ii] += eps * bilinear_sample(mesh, Tc[:, :, ii, jj],
                                                         qpts) * qnrm[:, jj]
        r_q = qpts - body.X
        force = qw @ tr_q
        torque = float(np.sum(qw * (r_q[:, 0] * tr_q[:, 1] - r_q[:, 1] * tr_q[:, 0])))
        fric_force = np.zeros(2)
        if eps > 0.0:
            fric = eps * slip_tan  # on the body; the fluid gets the opposite
            fric_force = qw @ fric
            force = force + fric_force
            torque += float(np.sum(qw * (r_q[:, 0] * fric[:, 1]
                                         - r_q[:, 1] * fric[:, 0])))
            dep = np.zeros((nx, ny, 2))
            _bilinear_scatter(mesh, dep, qpts, -fric * qw[:, None])
            dU[:, :, 1:] += dep / (dx * dy)

        # dissipation tallies on fluid cells only
        mask = signed_distance(shape, body, mesh.centers()).reshape(nx, ny) >= 0.0
        gx1 = np.gradient(u[:, :, 0], dx, axis=0, edge_order=2)
        gy1 = np.gradient(u[:, :, 0], dy, axis=1, edge_order=2)
        gx2 = np.gradient(u[:, :, 1], dx, axis=0, edge_order=2)
        gy2 = np.gradient(u[:, :, 1], dy, axis=1, edge_order=2)
        grad_sq = gx1 ** 2 + gy1 ** 2 + gx2 ** 2 + gy2 ** 2 + (gx1 + gy2) ** 2
        grad_sq_rate = float(np.sum(grad_sq[mask]) * dx * dy)
        stress_sq_rate = 0.0
        if eps > 0.0:
            stress_sq_rate = float(np.sum(np.sum(Tc ** 2, axis=(2, 3))[mask]) * dx * dy)

        rates = {"wall_slip_rate": wall_slip_rate,
                 "body_slip_rate": body_slip_rate,
                 "grad_sq_rate": grad_sq_rate,
                 "stress_sq_rate": stress_sq_rate,
                 "fric_force": fric_force}
        return dU, Traction(force, torque), rates

    U0 = np.concatenate([rho0[:, :, None], m0], axis=2)
    dU0, trac0, rates0 = stage(rho0, m0, rb)
    Vd0, wd0 = rigid_rates(rb, trac0)

    rb1 = rb.copy()
    rb1.X = rb.X + dt * rb.V
    rb1.V = rb.V + dt * Vd0
    rb1.omega = rb.omega + dt * wd0
    rb1.O = rotation_exp(rb.omega, dt, 2) @ rb.O
    U1 = U0 + dt * dU0

    dU1, trac1, rates1 = stage(U1[:, :, 0], U1[:, :, 1:], rb1)
    Vd1, wd1 = rigid_rates(rb1, trac1)

    Un = 0.5 * (U0 + U1 + dt * dU1)
    rb_new = rb.copy()
    rb_new.X = rb.X + 0.5 * dt * (rb.V + rb1.V)
    rb_new.V = rb.V + 0.5 * dt * (Vd0 + Vd1)
    rb_new.omega = rb.omega + 0.5 * dt * (wd0 + wd1)
    rb_new.O = polar_orthonormalize(
        rotation_exp(0.5 * (rb.omega + rb1.omega), dt, 2) @ rb.O)
    rb_new.time = rb.time + dt

    rho_n = Un[:, :, 0]
    m_n = Un[:, :, 1:]

    # penalization: relax the normal relative velocity inside the body
    ctr = mesh.centers()
    sdf = signed_distance(shape, rb_new, ctr).reshape(nx, ny)
    inside = sdf < 0.0
    dP = np.zeros(2)
    if np.any(inside):
        u_n_field = m_n / np.maximum(rho_n, RHO_FLOOR)[:, :, None]
        pts_in = ctr.reshape(nx, ny, 2)[inside]
        rvec = pts_in - rb_new.X
        rnorm = np.maximum(np.linalg.norm(rvec, axis=1), 1e-300)
        nhat = rvec / rnorm[:, None]
        u_body = rigid_velocity(rb_new, pts_in)
        urel = u_n_field[inside] - u_body
        urel_n = np.sum(urel * nhat, axis=1)
        factor = 1.0 - np.exp(-kappa * dt)
        du = -factor * urel_n[:, None] * nhat
        m_new_inside = m_n[inside] + rho_n[inside][:, None] * du
        dP = np.sum((m_new_inside - m_n[inside]), axis=0) * dx * dy
        m_n[inside] = m_new_inside

    trac_force = 0.5 * (trac0.force + trac1.force)
    trac_torque = 0.5 * (trac0.torque + trac1.torque)
    # friction is exactly action-reaction by construction; compare the
    # penalization impulse against the remaining (pressure + viscous) part
    fric_avg = 0.5 * (rates0["fric_force"] + rates1["fric_force"])
    mismatch = float(np.linalg.norm(dP + dt * (trac_force - fric_avg)))

    if np.count_nonzero(rho_n < RHO_FLOOR) > VACUUM_FRACTION * rho_n.size:
        raise SolverError("vacuum collapse: density floor reached in "
                          f"{np.count_nonzero(rho_n < RHO_FLOOR)} cells")
    if not np.all(np.isfinite(rho_n)) or not np.all(np.isfinite(m_n)):
        raise SolverError("solution diverged (non-finite fields)")
    rho_flat = np.maximum(rho_n.reshape(-1), 0.0)

    fluid_new = FluidState(2, fluid.cell_centers, fluid.cell_volumes,
                           rho_flat, m_n.reshape(-1, 2), time=fluid.time + dt)

    avg = lambda key: 0.5 * (rates0[key] + rates1[key])
    eps = params.epsilon
    diag = StepDiagnostics(
        dt=dt,
        diss_visc=eps * dt * avg("grad_sq_rate"),
        diss_wall=eps * dt * avg("wall_slip_rate"),
        diss_body=eps * dt * avg("body_slip_rate"),
        stress_sq=dt * avg("stress_sq_rate"),
        wall_slip_sq=dt * avg("wall_slip_rate"),
        body_slip_sq=dt * avg("body_slip_rate"),
        interface_impulse=dt * trac_force,
        action_reaction_mismatch=mismatch,
    )
    return fluid_new, rb_new, Traction(trac_force, trac_torque), diag
