"""Shared domain types, gas law, and rigid kinematics.

Dimension-generic vocabulary used by every other module: the polytropic
pressure law, conserved fluid fields on a mesh, the rigid body state, and
solver parameters. Angular quantities are scalars in 1D/2D and 3-vectors in
3D; the 3D cross-product formulas live in a dimension dispatch so they stay
implemented and tested even though no 3D flow scenario ships.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Density floor used only when reconstructing velocities inside flux and
# diagnostic routines. States themselves store conserved variables and may
# carry exact zeros.
RHO_FLOOR = 1e-12


# ---------------------------------------------------------------------------
# gas law
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GasLaw:
    """Polytropic pressure law p = rho^gamma, gamma strictly above 1."""

    gamma: float

    def __post_init__(self):
        if not self.gamma > 1.0:
            raise ValueError(f"adiabatic exponent must exceed 1, got {self.gamma}")


def eos_pressure(rho, law: GasLaw):
    """Pressure rho^gamma. Negative densities are rejected."""
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0.0):
        raise ValueError("negative density in eos_pressure")
    return rho ** law.gamma


def pressure_potential(rho, law: GasLaw):
    """Pressure potential rho^gamma / (gamma - 1) entering the energy."""
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0.0):
        raise ValueError("negative density in pressure_potential")
    return rho ** law.gamma / (law.gamma - 1.0)


def sound_speed(rho, law: GasLaw):
    """Acoustic speed sqrt(gamma p / rho), vacuum-safe via the density floor."""
    rho = np.maximum(np.asarray(rho, dtype=float), RHO_FLOOR)
    return np.sqrt(law.gamma * rho ** (law.gamma - 1.0))


# ---------------------------------------------------------------------------
# rotations
# ---------------------------------------------------------------------------

def hat(omega, dim: int) -> np.ndarray:
    """Skew matrix of an angular velocity: 2x2 for scalar omega, 3x3 for a vector."""
    if dim == 2:
        w = float(omega)
        return np.array([[0.0, -w], [w, 0.0]])
    if dim == 3:
        wx, wy, wz = np.asarray(omega, dtype=float)
        return np.array([[0.0, -wz, wy], [wz, 0.0, -wx], [-wy, wx, 0.0]])
    raise ValueError(f"hat map defined for dim 2 or 3, got {dim}")


def rotation_exp(omega, dt: float, dim: int) -> np.ndarray:
    """Exponential of dt * hat(omega): planar rotation in 2D, Rodrigues in 3D."""
    if dim == 1:
        return np.array([[1.0]])
    if dim == 2:
        a = float(omega) * dt
        c, s = np.cos(a), np.sin(a)
        return np.array([[c, -s], [s, c]])
    w = np.asarray(omega, dtype=float)
    theta = np.linalg.norm(w) * dt
    if theta < 1e-300:
        return np.eye(3)
    k = w / np.linalg.norm(w)
    K = hat(k, 3)
    return np.eye(3) + np.sin(theta) * K + (1.0 - np.cos(theta)) * (K @ K)


def polar_orthonormalize(O: np.ndarray) -> np.ndarray:
    """Nearest rotation matrix (polar projection via SVD, determinant forced +1)."""
    U, _, Vt = np.linalg.svd(np.asarray(O, dtype=float))
    R = U @ Vt
    if np.linalg.det(R) < 0.0:
        U[:, -1] = -U[:, -1]
        R = U @ Vt
    return R


def cross(omega, r, dim: int):
    """omega x r with the planar convention omega * (-r2, r1) in 2D.

    Accepts r with shape (d,) or (n, d); broadcasts over the leading axis.
    In 1D there is no rotation and the result is zero.
    """
    r = np.asarray(r, dtype=float)
    if dim == 1:
        return np.zeros_like(r)
    if dim == 2:
        w = float(omega)
        out = np.empty_like(r)
        out[..., 0] = -w * r[..., 1]
        out[..., 1] = w * r[..., 0]
        return out
    return np.cross(np.asarray(omega, dtype=float), r)


def cross2_scalar(a, b):
    """Planar cross product a1*b2 - a2*b1 (torque about the out-of-plane axis)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


# ---------------------------------------------------------------------------
# states
# ---------------------------------------------------------------------------

@dataclass
class FluidState:
    """Conserved fields on a 1D or 2D mesh.

    cell_centers has shape (n,) in 1D and (n, 2) in 2D; mom always has a
    trailing component axis of size dim. Vacuum cells must carry zero
    momentum.
    """

    dim: int
    cell_centers: np.ndarray
    cell_volumes: np.ndarray
    rho: np.ndarray
    mom: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.cell_centers = np.asarray(self.cell_centers, dtype=float)
        self.cell_volumes = np.asarray(self.cell_volumes, dtype=float)
        self.rho = np.asarray(self.rho, dtype=float)
        self.mom = np.asarray(self.mom, dtype=float)
        if self.mom.ndim == 1:
            self.mom = self.mom[:, None]
        self.validate()

    def validate(self):
        if self.dim not in (1, 2):
            raise ValueError(f"fluid scenarios are 1D or 2D, got dim={self.dim}")
        if np.any(self.cell_volumes <= 0.0):
            raise ValueError("nonpositive cell volume")
        if np.any(self.rho < 0.0):
            raise ValueError("negative density in FluidState")
        vac = self.rho == 0.0
        if np.any(vac) and np.any(self.mom[vac] != 0.0):
            raise ValueError("vacuum cell with nonzero momentum")
        if self.mom.shape != (self.rho.shape[0], self.dim):
            raise ValueError("momentum shape does not match (n_cells, dim)")

    def velocity(self):
        """mom / rho with the vacuum floor, shape (n, dim)."""
        return self.mom / np.maximum(self.rho, RHO_FLOOR)[:, None]

    def copy(self):
        return FluidState(self.dim, self.cell_centers.copy(), self.cell_volumes.copy(),
                          self.rho.copy(), self.mom.copy(), self.time)


@dataclass
class RigidState:
    """Rigid body pose, velocities, and inertia bookkeeping.

    omega and J are scalars in 1D/2D (J is the planar second moment) and a
    3-vector / 3x3 body-frame tensor in 3D. rho_body holds the transported
    body-frame density samples at the shape's volume quadrature nodes; rigid
    transport is a relabeling, so these values never change.
    """

    dim: int
    X: np.ndarray
    V: np.ndarray
    omega: object
    O: np.ndarray
    M: float
    J: object
    rho_body: np.ndarray = field(default_factory=lambda: np.array([1.0]))
    time: float = 0.0

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float).reshape(self.dim)
        self.V = np.asarray(self.V, dtype=float).reshape(self.dim)
        self.O = np.asarray(self.O, dtype=float).reshape(self.dim, self.dim)
        self.rho_body = np.asarray(self.rho_body, dtype=float)
        if self.dim == 3:
            self.omega = np.asarray(self.omega, dtype=float).reshape(3)
            self.J = np.asarray(self.J, dtype=float).reshape(3, 3)
        else:
            self.omega = float(self.omega)
            self.J = float(self.J)
        self.validate()

    def validate(self):
        if self.M <= 0.0:
            raise ValueError("body mass must be positive")
        err = np.max(np.abs(self.O.T @ self.O - np.eye(self.dim)))
        if err > 1e-10 or np.linalg.det(self.O) < 0.0:
            raise ValueError(f"orientation not orthonormal (|O^T O - I| = {err:.3e})")
        if self.dim == 3:
            if np.max(np.abs(self.J - self.J.T)) > 1e-12 or np.any(np.linalg.eigvalsh(self.J) <= 0.0):
                raise ValueError("inertia tensor must be symmetric positive definite")
        elif self.dim == 2 and self.J <= 0.0:
            raise ValueError("planar inertia must be positive")
        if np.any(self.rho_body <= 0.0):
            raise ValueError("body density must be positive")

    def inertia_world(self):
        """World-frame inertia: O J O^T in 3D, the pose-independent scalar otherwise."""
        if self.dim == 3:
            return self.O @ self.J @ self.O.T
        return self.J

    def angular_momentum(self):
        if self.dim == 3:
            return self.inertia_world() @ self.omega
        return self.J * self.omega

    def copy(self):
        # hot path in steppers: skip re-validation, the fields are copied as-is
        out = object.__new__(RigidState)
        out.dim = self.dim
        out.X = self.X.copy()
        out.V = self.V.copy()
        out.omega = np.copy(self.omega) if self.dim == 3 else self.omega
        out.O = self.O.copy()
        out.M = self.M
        out.J = self.J.copy() if self.dim == 3 else self.J
        out.rho_body = self.rho_body
        out.time = self.time
        return out


def rigid_velocity(rb: RigidState, x):
    """Rigid field u_B(x) = V + omega x (x - X); accepts (d,) or (n, d) points."""
    x = np.asarray(x, dtype=float)
    r = x - rb.X
    return rb.V + cross(rb.omega, r, rb.dim)


@dataclass(frozen=True)
class SolverParams:
    """Time-stepping knobs. epsilon is both the viscosity and the Navier friction
    coefficient (a single parameter couples them)."""

    epsilon: float
    cfl: float = 0.4
    dt_max: float = np.inf
    penalization_kappa: float = 0.0  # 0 means "derive the 2D default from the grid"

    def __post_init__(self):
        if self.epsilon < 0.0:
            raise ValueError("epsilon must be nonnegative")
        if not 0.0 < self.cfl < 1.0:
            raise ValueError("cfl must lie in (0, 1)")
        if self.dt_max <= 0.0:
            raise ValueError("dt_max must be positive")
        if self.penalization_kappa < 0.0:
            raise ValueError("penalization stiffness must be nonnegative")
