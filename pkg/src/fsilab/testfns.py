"""Coupled test fields, boundary-layer blending, and weak-form residuals.

A test pair holds a smooth fluid-side vector field and a rigid body-side
field. The pair is graded by how well the two sides match across the body
boundary: zero normal jump admits it into the basic coupled test class,
zero jump of the normal derivative of the normal component into the
regular subclass. Tangential mismatch is never constrained.

A pair with the extra normal-derivative regularity can be corrected for a
slightly perturbed body pose: inside a collar of width delta the normal
component is pulled toward the rigid value by a smooth plateau profile,
which restores an exact normal match on the perturbed boundary while
moving the field by O(delta^2) and its gradient by O(delta) in sup norm.
The blended evaluator exposes the profile-derivative part of the gradient
separately so that bound can be checked term by term.

The residual evaluators integrate the mass and momentum identities of the
coupled weak form over a recorded piston trajectory. Quadrature is
midpoint in time between consecutive snapshots and cell-average in space,
with one deliberate twist: advective and pressure terms multiply the test
function's exact difference across each cell rather than a sampled
derivative, so uniform states telescope to roundoff and the residual
isolates the trajectory's defect instead of quadrature noise.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .core import GasLaw, RigidState, cross, eos_pressure, hat
from .errors import GeometryError
from .fluid import PistonMesh
from .geometry import BodyShape, boundary_quadrature_world, signed_distance
from .transforms import Cutoff, _smoothstep, _smoothstep_deriv

__all__ = [
    "BlendParams",
    "BlendedTestField",
    "CutoffRigidField",
    "AdmissibilityReport",
    "Plateau",
    "PistonPair",
    "RadialPatchField",
    "RigidField",
    "ScalarTest",
    "SumField",
    "TestFunctionPair",
    "blend_profile",
    "blend_profile_deriv",
    "blend_test_function",
    "piston_admissibility",
    "piston_plateau_pair",
    "piston_probe_pair",
    "validate_admissible",
    "weak_residual_body_transport",
    "weak_residual_mass",
    "weak_residual_momentum",
]


# ---------------------------------------------------------------------------
# blending profile
# ---------------------------------------------------------------------------

def blend_profile(xi):
    """Even plateau profile: 1 on |xi| <= 1/2, 0 on |xi| >= 1, smooth between."""
    return 1.0 - _smoothstep(2.0 * np.abs(np.asarray(xi, dtype=float)) - 1.0)


def blend_profile_deriv(xi):
    xi = np.asarray(xi, dtype=float)
    return -2.0 * np.sign(xi) * _smoothstep_deriv(2.0 * np.abs(xi) - 1.0)


@dataclass(frozen=True)
class BlendParams:
    """Layer width and the profile that interpolates across it."""

    delta: float
    profile: Callable = blend_profile
    profile_deriv: Callable = blend_profile_deriv

    def __post_init__(self):
        if not self.delta > 0.0:
            raise ValueError("layer width delta must be positive")
        if float(self.profile(0.25)) != 1.0 or float(self.profile(2.0)) != 0.0:
            raise ValueError("profile must be 1 at 0.25 and 0 at 2")


# ---------------------------------------------------------------------------
# field atoms (time-slice vector fields with analytic gradients)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RigidField:
    """alpha + spin x (x - center); the body-side test field."""

    alpha: np.ndarray
    spin: object
    center: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "alpha", np.asarray(self.alpha, dtype=float))
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))

    @property
    def dim(self) -> int:
        return self.alpha.shape[0]

    def value(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        return self.alpha + cross(self.spin, pts - self.center, self.dim)

    def gradient(self, pts: np.ndarray) -> np.ndarray:
        n = np.asarray(pts).shape[0]
        return np.broadcast_to(hat(self.spin, self.dim), (n, self.dim, self.dim)).copy()


@dataclass(frozen=True)
class CutoffRigidField:
    """Rigid field times a wall cutoff; the simplest admissible fluid side.

    Near the body the cutoff plateau makes it equal the rigid field to all
    orders; near the domain walls it vanishes identically.
    """

    rigid: RigidField
    cutoff: Cutoff

    def value(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        return self.cutoff(pts)[:, None] * self.rigid.value(pts)

    def gradient(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        xi = self.cutoff(pts)
        dxi = self.cutoff.gradient(pts)
        v = self.rigid.value(pts)
        return xi[:, None, None] * self.rigid.gradient(pts) + v[:, :, None] * dxi[:, None, :]


def _fade(z, z0, z1):
    """1 below z0, 0 above z1, smooth monotone between; also its derivative."""
    s = (np.asarray(z, dtype=float) - z0) / (z1 - z0)
    return 1.0 - _smoothstep(s), -_smoothstep_deriv(s) / (z1 - z0)


@dataclass(frozen=True)
class RadialPatchField:
    """Polar-separable patch around a disc of given radius.

    value = A z^p m(z) cos(k_n th) e_r  +  B m(z) sin(k_t th + phase) e_th

    with z = |x - center| - radius and m a smooth fade to zero over
    [fade_start, fade_end]. The exponent p controls the boundary match at
    z = 0: p = 0 leaves a normal jump, p = 1 removes the jump but not the
    normal derivative, p = 2 removes both. The tangential part keeps a
    nonzero mismatch at z = 0 regardless.
    """

    center: np.ndarray
    radius: float
    z_power: int = 2
    fade_start: float = 0.2
    fade_end: float = 0.5
    amp_normal: float = 1.0
    mode_normal: int = 2
    amp_tangent: float = 0.0
    mode_tangent: int = 3
    phase_tangent: float = 0.4

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        if self.z_power not in (0, 1, 2):
            raise ValueError("z_power must be 0, 1, or 2")
        if not 0.0 < self.fade_start < self.fade_end:
            raise ValueError("need 0 < fade_start < fade_end")

    def _polar(self, pts):
        d = np.asarray(pts, dtype=float) - self.center
        r = np.linalg.norm(d, axis=1)
        er = d / r[:, None]
        et = np.column_stack([-er[:, 1], er[:, 0]])
        th = np.arctan2(d[:, 1], d[:, 0])
        return r, th, er, et

    def _normal_profile(self, z):
        m, dm = _fade(z, self.fade_start, self.fade_end)
        A, p = self.amp_normal, self.z_power
        if p == 0:
            return A * m, A * dm
        return A * z ** p * m, A * (p * z ** (p - 1) * m + z ** p * dm)

    def value(self, pts: np.ndarray) -> np.ndarray:
        r, th, er, et = self._polar(pts)
        s, _ = self._normal_profile(r - self.radius)
        g, _ = _fade(r - self.radius, self.fade_start, self.fade_end)
        c = np.cos(self.mode_normal * th)
        d = np.sin(self.mode_tangent * th + self.phase_tangent)
        return (s * c)[:, None] * er + (self.amp_tangent * g * d)[:, None] * et

    def gradient(self, pts: np.ndarray) -> np.ndarray:
        r, th, er, et = self._polar(pts)
        z = r - self.radius
        s, ds = self._normal_profile(z)
        m, dm = _fade(z, self.fade_start, self.fade_end)
        g, dg = self.amp_tangent * m, self.amp_tangent * dm
        c = np.cos(self.mode_normal * th)
        dc = -self.mode_normal * np.sin(self.mode_normal * th)
        d = np.sin(self.mode_tangent * th + self.phase_tangent)
        dd = self.mode_tangent * np.cos(self.mode_tangent * th + self.phase_tangent)
        NN = er[:, :, None] * er[:, None, :]
        NT = er[:, :, None] * et[:, None, :]
        TN = et[:, :, None] * er[:, None, :]
        TT = et[:, :, None] * et[:, None, :]
        rinv = 1.0 / r
        return ((ds * c)[:, None, None] * NN
                + (s * dc * rinv)[:, None, None] * NT
                + (s * c * rinv)[:, None, None] * TT
                + (dg * d)[:, None, None] * TN
                + (g * dd * rinv)[:, None, None] * TT
                - (g * d * rinv)[:, None, None] * NT)


@dataclass(frozen=True)
class SumField:
    """Pointwise sum of fields sharing the value/gradient protocol."""

    parts: tuple

    def value(self, pts: np.ndarray) -> np.ndarray:
        return sum(p.value(pts) for p in self.parts)

    def gradient(self, pts: np.ndarray) -> np.ndarray:
        return sum(p.gradient(pts) for p in self.parts)


# ---------------------------------------------------------------------------
# pairs and admissibility
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TestFunctionPair:
    """Fluid-side field, body-side rigid field, and declared match grades.

    The flags are the constructor's promise about the boundary match;
    validate_admissible verifies them by sampling.
    """

    __test__ = False  # keep pytest from collecting the class by name

    phiF: object
    phiB: RigidField
    normal_jump_zero: bool
    normal_derivative_jump_zero: bool


@dataclass(frozen=True)
class AdmissibilityReport:
    max_normal_jump: float
    max_normal_deriv_jump: float
    max_wall_normal: float
    passes_v: bool
    passes_vtilde: bool
    flags_consistent: bool
    which: str

    @property
    def passed(self) -> bool:
        return self.passes_vtilde if self.which == "Vtilde" else self.passes_v


def validate_admissible(pair: TestFunctionPair, shape: BodyShape, rb: RigidState,
                        bounds, which: str = "Vtilde", n_body: int = 256,
                        n_wall: int = 128, tol_jump: float = 1e-10,
                        tol_deriv: float = 1e-8,
                        tol_wall: float = 1e-10) -> AdmissibilityReport:
    """Sample the body boundary and the box walls and grade the pair.

    Reports the largest normal jump and normal-derivative jump across the
    body boundary at the given pose, and the largest wall-normal component
    of the fluid side on the box walls.
    """
    if which not in ("V", "Vtilde"):
        raise ValueError(f"unknown test class {which!r}")
    pts, normals, _ = boundary_quadrature_world(shape, rb, n_body)
    dv = pair.phiF.value(pts) - pair.phiB.value(pts)
    jump = np.max(np.abs(np.sum(dv * normals, axis=1)))
    dg = pair.phiF.gradient(pts) - pair.phiB.gradient(pts)
    deriv = np.max(np.abs(np.einsum("ni,nij,nj->n", normals, dg, normals)))

    (x0, x1), (y0, y1) = bounds
    xs = np.linspace(x0, x1, n_wall)
    ys = np.linspace(y0, y1, n_wall)
    wall_max = 0.0
    for wall_pts, axis in [
        (np.column_stack([xs, np.full_like(xs, y0)]), 1),
        (np.column_stack([xs, np.full_like(xs, y1)]), 1),
        (np.column_stack([np.full_like(ys, x0), ys]), 0),
        (np.column_stack([np.full_like(ys, x1), ys]), 0),
    ]:
        wall_max = max(wall_max, np.max(np.abs(pair.phiF.value(wall_pts)[:, axis])))

    passes_v = jump <= tol_jump and wall_max <= tol_wall
    passes_vtilde = passes_v and deriv <= tol_deriv
    # a declared flag is a claim that must hold; an undeclared one claims nothing
    consistent = (not pair.normal_jump_zero or jump <= tol_jump) and \
                 (not pair.normal_derivative_jump_zero or deriv <= tol_deriv)
    return AdmissibilityReport(float(jump), float(deriv), float(wall_max),
                               bool(passes_v), bool(passes_vtilde),
                               bool(consistent), which)


# ---------------------------------------------------------------------------
# layer blending
# ---------------------------------------------------------------------------

class BlendedTestField:
    """Fluid-side field corrected to match a rigid field normally on a disc.

    Outside the collar (transverse distance z > delta) this is the plain
    fluid side; inside the body it is the rigid field; in the layer the
    tangential part stays fluid and the normal component is interpolated
    with profile(3 z / (2 delta)), which equals 1 at z = 0 and 0 at
    z = delta. The normal match on the body boundary is therefore exact.
    """

    def __init__(self, pair: TestFunctionPair, rb: RigidState,
                 params: BlendParams, shape: BodyShape):
        self.pair = pair
        self.rb = rb
        self.params = params
        self.shape = shape

    def _split(self, pts):
        pts = np.asarray(pts, dtype=float)
        sdf = signed_distance(self.shape, self.rb, pts)
        outside = sdf > self.params.delta
        inside = sdf < 0.0
        return pts, outside, inside, ~(outside | inside)

    def _frame(self, pts):
        """Transverse distance and outward unit normal inside the collar."""
        d = pts - self.rb.X
        r = np.linalg.norm(d, axis=1)
        if np.any(r == 0.0):
            raise GeometryError("projection undefined at the disc center")
        return r, r - self.shape.radius, d / r[:, None]

    def value(self, pts) -> np.ndarray:
        pts, outside, inside, layer = self._split(pts)
        out = np.empty_like(pts)
        if np.any(outside):
            out[outside] = self.pair.phiF.value(pts[outside])
        if np.any(inside):
            out[inside] = self.pair.phiB.value(pts[inside])
        if np.any(layer):
            lp = pts[layer]
            _, z, N = self._frame(lp)
            vF = self.pair.phiF.value(lp)
            aF = np.sum(vF * N, axis=1)
            aB = np.sum(self.pair.phiB.value(lp) * N, axis=1)
            eta = self.params.profile(1.5 * z / self.params.delta)
            out[layer] = vF + (eta * (aB - aF))[:, None] * N
        return out

    def piecewise_value(self, pts) -> np.ndarray:
        """The uncorrected comparison field: fluid side for z >= 0, rigid inside."""
        pts = np.asarray(pts, dtype=float)
        sdf = signed_distance(self.shape, self.rb, pts)
        out = np.where((sdf >= 0.0)[:, None], self.pair.phiF.value(pts),
                       self.pair.phiB.value(pts))
        return out

    def piecewise_gradient(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        sdf = signed_distance(self.shape, self.rb, pts)
        return np.where((sdf >= 0.0)[:, None, None], self.pair.phiF.gradient(pts),
                        self.pair.phiB.gradient(pts))

    def _layer_gradient_parts(self, lp):
        r, z, N = self._frame(lp)
        delta = self.params.delta
        vF = self.pair.phiF.value(lp)
        vB = self.pair.phiB.value(lp)
        GF = self.pair.phiF.gradient(lp)
        GB = self.pair.phiB.gradient(lp)
        aF = np.sum(vF * N, axis=1)
        aB = np.sum(vB * N, axis=1)
        # dN/dx = (I - N N) / r for a disc collar
        dN = (np.eye(2) - N[:, :, None] * N[:, None, :]) / r[:, None, None]
        daF = np.einsum("nij,ni->nj", GF, N) + np.einsum("ni,nij->nj", vF, dN)
        daB = np.einsum("nij,ni->nj", GB, N) + np.einsum("ni,nij->nj", vB, dN)
        eta = self.params.profile(1.5 * z / delta)
        deta = self.params.profile_deriv(1.5 * z / delta) * (1.5 / delta)
        gap = aB - aF
        profile_term = (deta * gap)[:, None, None] * (N[:, :, None] * N[:, None, :])
        rest = (N[:, :, None] * (eta[:, None] * (daB - daF))[:, None, :]
                + (eta * gap)[:, None, None] * dN)
        return GF + rest, profile_term

    def gradient(self, pts) -> np.ndarray:
        pts, outside, inside, layer = self._split(pts)
        out = np.empty((pts.shape[0], 2, 2))
        if np.any(outside):
            out[outside] = self.pair.phiF.gradient(pts[outside])
        if np.any(inside):
            out[inside] = self.pair.phiB.gradient(pts[inside])
        if np.any(layer):
            smooth, profile_term = self._layer_gradient_parts(pts[layer])
            out[layer] = smooth + profile_term
        return out

    def profile_gradient_term(self, pts) -> np.ndarray:
        """The profile-derivative part of the gradient, zero off the layer.

        This is the only gradient contribution carrying a 1/delta factor;
        it stays O(delta) because the normal gap it multiplies is
        O(delta^2) across the layer.
        """
        pts, _, _, layer = self._split(pts)
        out = np.zeros((pts.shape[0], 2, 2))
        if np.any(layer):
            _, profile_term = self._layer_gradient_parts(pts[layer])
            out[layer] = profile_term
        return out


def blend_test_function(pair: TestFunctionPair, rb_eps: RigidState,
                        params: BlendParams, shape: BodyShape) -> BlendedTestField:
    """Correct a regular pair's fluid side to match normally on a moved disc.

    The pair must carry the normal-derivative regularity for the sup norm
    of the correction to be O(delta^2); the construction itself only needs
    the collar. Raises GeometryError when the layer width exceeds the
    collar reach or the shape has no circular collar.
    """
    if shape.kind != "disc":
        raise GeometryError(f"layer blending needs a disc collar, got {shape.kind!r}")
    if params.delta > shape.reach:
        raise GeometryError(f"layer width {params.delta:.3g} exceeds the collar "
                            f"reach {shape.reach:.3g}")
    return BlendedTestField(pair, rb_eps, params, shape)


# ---------------------------------------------------------------------------
# 1D piston test pairs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Plateau:
    """Smooth bump rising over [x0, x1], flat at 1 on [x1, x2], falling to 0 by x3."""

    x0: float
    x1: float
    x2: float
    x3: float

    def __post_init__(self):
        if not self.x0 < self.x1 <= self.x2 < self.x3:
            raise ValueError("plateau knots must satisfy x0 < x1 <= x2 < x3")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return (_smoothstep((x - self.x0) / (self.x1 - self.x0))
                - _smoothstep((x - self.x2) / (self.x3 - self.x2)))

    def deriv(self, x):
        x = np.asarray(x, dtype=float)
        return (_smoothstep_deriv((x - self.x0) / (self.x1 - self.x0)) / (self.x1 - self.x0)
                - _smoothstep_deriv((x - self.x2) / (self.x3 - self.x2)) / (self.x3 - self.x2))


@dataclass(frozen=True)
class ScalarTest:
    """Scalar space-time test function with its analytic time derivative."""

    value: Callable
    dt: Callable


@dataclass(frozen=True)
class PistonPair:
    """Fluid-side scalar field with analytic t/x derivatives plus body value.

    In one dimension the body side of an admissible pair is just a time
    function alpha(t); compatibility at the piston faces means the fluid
    side equals alpha there (and has zero slope there for the regular
    subclass).
    """

    value: Callable
    dt: Callable
    dx: Callable
    alpha: Callable
    dalpha: Callable


def piston_plateau_pair(profile: Plateau, amp: Callable, damp: Callable) -> PistonPair:
    """Pair whose fluid side is amp(t) * plateau(x) with the body inside the flat top.

    As long as the piston stays within [x1, x2] the pair is admissible in
    the regular sense: the fluid side equals amp(t) with zero slope at
    both piston faces, and vanishes at the domain walls when the plateau
    support is interior.
    """
    return PistonPair(
        value=lambda t, x: amp(t) * profile(x),
        dt=lambda t, x: damp(t) * profile(x),
        dx=lambda t, x: amp(t) * profile.deriv(x),
        alpha=amp,
        dalpha=damp,
    )


def piston_probe_pair(profile: Plateau, amp: Callable, damp: Callable) -> PistonPair:
    """Fluid-only probe: same shape as the plateau pair but zero on the body.

    Admissible only while the piston stays outside the profile's support.
    """
    return PistonPair(
        value=lambda t, x: amp(t) * profile(x),
        dt=lambda t, x: damp(t) * profile(x),
        dx=lambda t, x: amp(t) * profile.deriv(x),
        alpha=lambda t: 0.0,
        dalpha=lambda t: 0.0,
    )


def piston_admissibility(pair: PistonPair, mesh: PistonMesh, X: float, t: float):
    """Boundary mismatches of a 1D pair at one instant.

    Returns (wall, jump, slope): the fluid side at the domain walls, its
    mismatch against alpha(t) at the piston faces, and its slope there.
    """
    walls = np.array([mesh.x_left, mesh.x_right])
    faces = np.array([X - mesh.half_length, X + mesh.half_length])
    wall = float(np.max(np.abs(pair.value(t, walls))))
    jump = float(np.max(np.abs(pair.value(t, faces) - pair.alpha(t))))
    slope = float(np.max(np.abs(pair.dx(t, faces))))
    return wall, jump, slope


# ---------------------------------------------------------------------------
# weak-form residuals over recorded piston trajectories
# ---------------------------------------------------------------------------

def _faces_and_centers(mesh: PistonMesh, X: float):
    xl, xr = mesh.nodes(X)
    faces = (xl, xr)
    centers = np.concatenate([0.5 * (xl[1:] + xl[:-1]), 0.5 * (xr[1:] + xr[:-1])])
    return faces, centers


def _cell_psi_diff(psi_vals_left, psi_vals_right):
    return np.concatenate([np.diff(psi_vals_left), np.diff(psi_vals_right)])


def _check_trajectory(trajectory):
    if len(trajectory) < 2:
        raise ValueError("need at least two snapshots to integrate in time")


def weak_residual_mass(trajectory: Sequence, mesh: PistonMesh,
                       psi: ScalarTest) -> float:
    """Signed defect of the fluid mass identity over a recorded trajectory.

    The identity integrates rho psi_t + rho u psi_x over the fluid region
    and time, plus the initial mass against psi(0) minus the final mass
    against psi(T). The advective term uses the exact psi difference
    across each cell, so a uniform momentum field contributes the
    telescoped wall values only.
    """
    _check_trajectory(trajectory)
    total = 0.0
    for (fa, ba), (fb, bb) in zip(trajectory[:-1], trajectory[1:]):
        dt = fb.time - fa.time
        tm = 0.5 * (fa.time + fb.time)
        Xm = 0.5 * (ba.X[0] + bb.X[0])
        (xl, xr), centers = _faces_and_centers(mesh, Xm)
        cell_mass = 0.5 * (fa.rho * fa.cell_volumes + fb.rho * fb.cell_volumes)
        mom = 0.5 * (fa.mom[:, 0] + fb.mom[:, 0])
        dpsi = _cell_psi_diff(psi.value(tm, xl), psi.value(tm, xr))
        total += dt * (np.sum(cell_mass * psi.dt(tm, centers)) + np.sum(mom * dpsi))

    f0, b0 = trajectory[0]
    fT, bT = trajectory[-1]
    _, c0 = _faces_and_centers(mesh, b0.X[0])
    _, cT = _faces_and_centers(mesh, bT.X[0])
    total += np.sum(f0.rho * f0.cell_volumes * psi.value(f0.time, c0))
    total -= np.sum(fT.rho * fT.cell_volumes * psi.value(fT.time, cT))
    return float(total)


def weak_residual_body_transport(trajectory: Sequence, mesh: PistonMesh,
                                 psi: ScalarTest, weighted: bool = True) -> float:
    """Signed defect of the transport identity on the rigid interval.

    With weighted=True the integrand carries the (uniform) body density,
    otherwise the plain indicator. The slope term uses the exact psi
    difference between the piston faces; psi_t is integrated with
    Gauss-Legendre nodes across the body.
    """
    _check_trajectory(trajectory)
    h = mesh.half_length
    gl_x, gl_w = np.polynomial.legendre.leggauss(8)

    def body_integral(fn, X):
        pts = X + h * gl_x
        return h * np.sum(gl_w * fn(pts))

    total = 0.0
    for (fa, ba), (fb, bb) in zip(trajectory[:-1], trajectory[1:]):
        dt = fb.time - fa.time
        tm = 0.5 * (fa.time + fb.time)
        Xm = 0.5 * (ba.X[0] + bb.X[0])
        Vm = 0.5 * (ba.V[0] + bb.V[0])
        weight = ba.M / (2.0 * h) if weighted else 1.0
        inner = body_integral(lambda x: psi.dt(tm, x), Xm)
        inner += Vm * (psi.value(tm, Xm + h) - psi.value(tm, Xm - h))
        total += dt * weight * inner

    _, b0 = trajectory[0]
    _, bT = trajectory[-1]
    w0 = b0.M / (2.0 * h) if weighted else 1.0
    total += w0 * body_integral(lambda x: psi.value(b0.time, x), b0.X[0])
    total -= w0 * body_integral(lambda x: psi.value(bT.time, x), bT.X[0])
    return float(total)


def weak_residual_momentum(trajectory: Sequence, mesh: PistonMesh, law: GasLaw,
                           pair: PistonPair, nu_m: Callable | None = None) -> float:
    """Signed defect of the coupled momentum identity.

    Fluid terms pair momentum with the fluid side's time derivative and
    the momentum flux rho u^2 + p with its exact cell difference; body
    terms pair the piston momentum with dalpha. nu_m, when given, is a
    per-cell defect density sampled at cell centers and paired with the
    fluid side's slope; resolved trajectories omit it.
    """
    _check_trajectory(trajectory)
    total = 0.0
    for (fa, ba), (fb, bb) in zip(trajectory[:-1], trajectory[1:]):
        dt = fb.time - fa.time
        tm = 0.5 * (fa.time + fb.time)
        Xm = 0.5 * (ba.X[0] + bb.X[0])
        Vm = 0.5 * (ba.V[0] + bb.V[0])
        (xl, xr), centers = _faces_and_centers(mesh, Xm)
        cell_mom = 0.5 * (fa.mom[:, 0] * fa.cell_volumes + fb.mom[:, 0] * fb.cell_volumes)

        def flux(f):
            u = f.velocity()[:, 0]
            return f.mom[:, 0] * u + eos_pressure(f.rho, law)

        flux_m = 0.5 * (flux(fa) + flux(fb))
        dphi = _cell_psi_diff(pair.value(tm, xl), pair.value(tm, xr))
        inner = np.sum(cell_mom * pair.dt(tm, centers)) + np.sum(flux_m * dphi)
        inner += ba.M * Vm * pair.dalpha(tm)
        if nu_m is not None:
            vols = 0.5 * (fa.cell_volumes + fb.cell_volumes)
            inner += np.sum(vols * nu_m(tm, centers) * pair.dx(tm, centers))
        total += dt * inner

    f0, b0 = trajectory[0]
    fT, bT = trajectory[-1]
    _, c0 = _faces_and_centers(mesh, b0.X[0])
    _, cT = _faces_and_centers(mesh, bT.X[0])
    total += np.sum(f0.mom[:, 0] * f0.cell_volumes * pair.value(f0.time, c0))
    total += b0.M * b0.V[0] * pair.alpha(f0.time)
    total -= np.sum(fT.mom[:, 0] * fT.cell_volumes * pair.value(fT.time, cT))
    total -= bT.M * bT.V[0] * pair.alpha(fT.time)
    return float(total)
