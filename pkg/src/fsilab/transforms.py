"""Coordinate-change machinery for comparing two solutions on one domain.

The pieces, in order of construction: a cutoff that is 1 away from the
container walls and 0 near them; divergence-free velocity fields that agree
with a body's rigid velocity on the interior region and vanish near the
walls; the flow maps of those fields; composed maps that carry one
solution's geometry onto the other's; pulled-back strong-solution fields;
and the mass/momentum source terms the pull-back introduces.

Maps are evaluated on demand by integrating trajectories from time zero
with fixed-step RK4 (inverses integrate backward), so accuracy is set by
the integrator step, not by any stored lattice. Jacobians integrate the
variational equation dJ/dt = grad(field) J along each trajectory; the
field gradient comes from fourth-order centered differences at spacing
h_map, which stay exact to roundoff because field evaluations carry no
integration error. Differencing the map itself would not work: its error
is non-smooth in the start point, and the amplified jitter swamps the
volume-preservation budget.
"""

from dataclasses import dataclass
from math import ceil

import numpy as np

from .core import RigidState, cross
from .errors import MapError


def _smoothstep(s):
    """Quintic ramp: 0 below 0, 1 above 1, C^2 monotone between."""
    s = np.clip(s, 0.0, 1.0)
    return s ** 3 * (10.0 + s * (-15.0 + 6.0 * s))


def _smoothstep_deriv(s):
    out = np.zeros_like(s)
    inside = (s > 0.0) & (s < 1.0)
    si = s[inside]
    out[inside] = 30.0 * si ** 2 * (si - 1.0) ** 2
    return out


@dataclass(frozen=True)
class Cutoff:
    """Wall cutoff: 1 where every wall is farther than sigma, 0 where any
    wall is closer than sigma/2, a product of quintic ramps between.
    """

    bounds: tuple
    sigma: float

    def __post_init__(self):
        if self.sigma <= 0.0:
            raise ValueError("sigma must be positive")
        for lo, hi in self.bounds:
            if not hi - lo > self.sigma:
                raise ValueError("domain side not wider than sigma")

    @property
    def dim(self) -> int:
        return len(self.bounds)

    def _side_args(self, pts):
        """Ramp coordinates (n, 2*dim), one per wall."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        cols = []
        for k, (lo, hi) in enumerate(self.bounds):
            cols.append(pts[:, k] - lo)
            cols.append(hi - pts[:, k])
        d = np.column_stack(cols)
        return (d - 0.5 * self.sigma) / (0.5 * self.sigma)

    def __call__(self, pts):
        return np.prod(_smoothstep(self._side_args(pts)), axis=1)

    def gradient(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        s = self._side_args(pts)
        f = _smoothstep(s)
        df = _smoothstep_deriv(s) * (2.0 / self.sigma)
        grad = np.zeros_like(pts)
        for k in range(self.dim):
            others = np.prod(np.delete(f, (2 * k, 2 * k + 1), axis=1), axis=1)
            # the two walls along axis k contribute with opposite signs
            grad[:, k] = others * (df[:, 2 * k] * f[:, 2 * k + 1]
                                   - f[:, 2 * k] * df[:, 2 * k + 1])
        return grad


def truncated_field(rb: RigidState, cutoff: Cutoff):
    """Divergence-free extension of the body's rigid velocity.

    Returns a callable on points. The field equals V + omega x (x - X)
    wherever the cutoff is 1 (with zero cutoff gradient) and vanishes where
    the cutoff is 0; being a curl, it is divergence-free everywhere.
    """
    if cutoff.dim == 2:
        V, X, om = rb.V, rb.X, float(rb.omega)

        def field(pts):
            pts = np.atleast_2d(np.asarray(pts, dtype=float))
            r = pts - X
            psi = r[:, 1] * V[0] - r[:, 0] * V[1] \
                - 0.5 * om * np.sum(r * r, axis=1)
            dpsi = np.column_stack([-V[1] - om * r[:, 0],
                                    V[0] - om * r[:, 1]])
            xi = cutoff(pts)
            dxi = cutoff.gradient(pts)
            fx = xi * dpsi[:, 1] + psi * dxi[:, 1]
            fy = -(xi * dpsi[:, 0] + psi * dxi[:, 0])
            return np.column_stack([fx, fy])

        return field

    if cutoff.dim == 3:
        V, X, om = rb.V, rb.X, np.asarray(rb.omega, dtype=float)

        def field(pts):
            pts = np.atleast_2d(np.asarray(pts, dtype=float))
            r = pts - X
            A = np.cross(pts, V) + np.sum(r * r, axis=1)[:, None] * om
            xi = cutoff(pts)
            dxi = cutoff.gradient(pts)
            rigid = V + np.cross(om, r)
            return -0.5 * np.cross(dxi, A) + xi[:, None] * rigid

        return field

    raise ValueError("truncated fields exist in 2 or 3 dimensions")


def fd_jacobian(fn, pts, h):
    """Fourth-order centered-difference Jacobian of a map R^d -> R^d."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    n, d = pts.shape
    offsets = np.array([-2.0, -1.0, 1.0, 2.0]) * h
    probes = (pts[None, None, :, :]
              + offsets[:, None, None, None] * np.eye(d)[None, :, None, :])
    vals = fn(probes.reshape(-1, d)).reshape(4, d, n, d)
    J = (vals[0] - 8.0 * vals[1] + 8.0 * vals[2] - vals[3]) / (12.0 * h)
    # J[k, n, i] currently holds dZ_i/dx_k; want (n, i, k)
    return np.transpose(J, (1, 2, 0))


class FlowMap:
    """Trajectory map Z(t, x) of a time-dependent velocity field.

    field(t, pts) returns velocities; bounds is the domain box the
    trajectories must stay in. Evaluation integrates from t=0 each call,
    which keeps Z(0, x) = x exact and makes inversion a backward sweep.
    h_map is the probe spacing for the field gradient that drives the
    variational Jacobian.
    """

    def __init__(self, field, bounds, t=0.0, dt=2.5e-4, h_map=1e-3):
        if dt <= 0.0 or h_map <= 0.0:
            raise ValueError("dt and h_map must be positive")
        self.field = field
        self.bounds = tuple((float(lo), float(hi)) for lo, hi in bounds)
        self.t = float(t)
        self.dt = float(dt)
        self.h_map = float(h_map)

    def _check_inside(self, pts):
        for k, (lo, hi) in enumerate(self.bounds):
            if np.any(pts[:, k] < lo - 1e-9) or np.any(pts[:, k] > hi + 1e-9):
                raise MapError("flow-map trajectory left the domain")

    def _field_jac(self, s, pts):
        return fd_jacobian(lambda p: self.field(s, p), pts, self.h_map)

    def _integrate(self, pts, t_from, t_to, with_jac=False):
        z = np.atleast_2d(np.asarray(pts, dtype=float)).copy()
        J = np.broadcast_to(np.eye(z.shape[1]), z.shape + z.shape[1:]).copy()
        span = t_to - t_from
        if span == 0.0:
            return (z, J) if with_jac else z
        n_steps = max(1, ceil(abs(span) / self.dt))
        h = span / n_steps
        s = t_from
        f = self.field
        for _ in range(n_steps):
            k1 = f(s, z)
            z2 = z + 0.5 * h * k1
            k2 = f(s + 0.5 * h, z2)
            z3 = z + 0.5 * h * k2
            k3 = f(s + 0.5 * h, z3)
            z4 = z + h * k3
            k4 = f(s + h, z4)
            if with_jac:
                m1 = self._field_jac(s, z) @ J
                m2 = self._field_jac(s + 0.5 * h, z2) @ (J + 0.5 * h * m1)
                m3 = self._field_jac(s + 0.5 * h, z3) @ (J + 0.5 * h * m2)
                m4 = self._field_jac(s + h, z4) @ (J + h * m3)
                J += (h / 6.0) * (m1 + 2.0 * m2 + 2.0 * m3 + m4)
            z += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            s += h
        self._check_inside(z)
        return (z, J) if with_jac else z

    def evaluate(self, pts, t=None):
        return self._integrate(pts, 0.0, self.t if t is None else t)

    def inverse(self, pts, t=None):
        return self._integrate(pts, self.t if t is None else t, 0.0)

    def jacobian(self, pts, t=None):
        """dZ/dx at the start points pts, by the variational equation."""
        _, J = self._integrate(pts, 0.0, self.t if t is None else t,
                               with_jac=True)
        return J


def advance_flow_map(fmap: FlowMap, t0: float, t1: float) -> FlowMap:
    """Retarget the map from time t0 to t1 (t1 >= t0)."""
    if t1 < t0:
        raise ValueError("cannot advance a flow map backward")
    if abs(fmap.t - t0) > 1e-12:
        raise ValueError(f"map is at t={fmap.t}, not at t0={t0}")
    return FlowMap(fmap.field, fmap.bounds, t=t1, dt=fmap.dt,
                   h_map=fmap.h_map)


class ComposedMap:
    """outer o inner^{-1} at a common time, e.g. Z2 o Z1^{-1}."""

    def __init__(self, outer: FlowMap, inner: FlowMap, t: float):
        self.outer = outer
        self.inner = inner
        self.t = float(t)
        self.h_map = outer.h_map

    def evaluate(self, pts, t=None):
        s = self.t if t is None else t
        return self.outer.evaluate(self.inner.inverse(pts, s), s)

    def inverse(self, pts, t=None):
        s = self.t if t is None else t
        return self.inner.evaluate(self.outer.inverse(pts, s), s)

    def jacobian(self, pts, t=None):
        """Chain rule through the shared start labels: J_out J_in^{-1}."""
        s = self.t if t is None else t
        labels = self.inner.inverse(pts, s)
        J_out = self.outer.jacobian(labels, s)
        J_in = self.inner.jacobian(labels, s)
        return J_out @ np.linalg.inv(J_in)

    def roundtrip_error(self, pts) -> float:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        back = self.inverse(self.evaluate(pts))
        return float(np.max(np.linalg.norm(back - pts, axis=1)))


def compose_maps(Z1: FlowMap, Z2: FlowMap):
    """The mutually inverse pair (Z1 o Z2^{-1}, Z2 o Z1^{-1})."""
    if abs(Z1.t - Z2.t) > 1e-12:
        raise ValueError("maps must share a common time")
    return ComposedMap(Z1, Z2, Z1.t), ComposedMap(Z2, Z1, Z1.t)


@dataclass
class TransformedStrong:
    """Strong-solution fields pulled back through the composed map.

    R, U, P and u_B are callables on points of the first geometry; V_t and
    omega_t are the rotated rigid velocities; map1/map2 are the composed
    maps (map2 sends the first geometry onto the second, map1 is its
    inverse). rho_B is None when no body density field was supplied.
    """

    R: object
    U: object
    P: object
    V_t: np.ndarray
    omega_t: object
    u_B: object
    rho_B: object
    map1: object
    map2: object
    X1: np.ndarray


def transform_strong(rho_fn, u_fn, p_fn, rb1: RigidState, rb2: RigidState,
                     maps, rho_body_fn=None) -> TransformedStrong:
    """Pull back strong fields through maps = (map1, map2).

    map2 carries a point of the first solution's geometry to the second's;
    fields of the second solution are evaluated there and velocity is
    pushed through the inverse Jacobian, U(x) = (dy/dx)^{-1} u(y).
    """
    map1, map2 = maps
    dim = rb1.dim
    Q = rb1.O @ rb2.O.T
    V_t = Q @ rb2.V
    omega_t = Q @ rb2.omega if dim == 3 else float(rb2.omega)
    X1 = np.array(rb1.X, dtype=float)

    def R(pts):
        return np.asarray(rho_fn(map2.evaluate(pts)), dtype=float)

    def U(pts):
        y = map2.evaluate(pts)
        J = map2.jacobian(pts)
        u = np.asarray(u_fn(y), dtype=float)
        return np.linalg.solve(J, u[..., None])[..., 0]

    def P(pts):
        return np.asarray(p_fn(map2.evaluate(pts)), dtype=float)

    def u_B(pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return V_t + cross(omega_t, pts - X1, dim)

    rho_B = None
    if rho_body_fn is not None:
        def rho_B(pts):
            return np.asarray(rho_body_fn(map2.evaluate(pts)), dtype=float)

    return TransformedStrong(R=R, U=U, P=P, V_t=V_t, omega_t=omega_t,
                             u_B=u_B, rho_B=rho_B, map1=map1, map2=map2,
                             X1=X1)


def _fd_gradient(fn, pts, h):
    """Centered gradient of a scalar or vector field; shape (n, ..., d).

    All probe points go to fn in one batched call, which matters when fn
    hides trajectory integrations.
    """
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    n, d = pts.shape
    probes = np.concatenate([pts + s * h * np.eye(d)[k]
                             for k in range(d) for s in (-1.0, 1.0)])
    vals = np.asarray(fn(probes), dtype=float)
    per = vals.reshape((d, 2, n) + vals.shape[1:])
    return np.moveaxis((per[:, 1] - per[:, 0]) / (2.0 * h), 0, -1)


def source_terms(ts: TransformedStrong, dt_probe: float = 1e-4,
                 h_fd: float | None = None):
    """Mass and momentum sources created by the pull-back.

    Returns callables (H, G). H(x) is the advective mass source
    -(dx/dtau) . grad R; G(x) collects the map-rate terms, the advected
    momentum gradient, the Jacobian-gradient term, and the
    Jacobian-mismatch pressure term. Both vanish when the composed map is
    the identity at all probed times.
    """
    m2 = ts.map2
    t0 = m2.t
    h = m2.h_map if h_fd is None else h_fd

    def x_of_tau(pts, s):
        # material label y is fixed; its first-geometry position at time s
        y = m2.evaluate(pts)
        return ts.map1.evaluate(y, s)

    def dx_dtau(pts):
        return (x_of_tau(pts, t0 + dt_probe) - x_of_tau(pts, t0 - dt_probe)) \
            / (2.0 * dt_probe)

    def H(pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        gradR = _fd_gradient(ts.R, pts, h)
        return -np.sum(dx_dtau(pts) * gradR, axis=-1)

    def G(pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        J = m2.jacobian(pts)
        Jinv = np.linalg.inv(J)
        dtJ = (m2.jacobian(pts, t0 + dt_probe)
               - m2.jacobian(pts, t0 - dt_probe)) / (2.0 * dt_probe)
        dJ = _fd_gradient(lambda p: m2.jacobian(p), pts, h)
        xdot = dx_dtau(pts)
        R = ts.R(pts)
        U = ts.U(pts)
        RU = lambda p: ts.R(p)[:, None] * ts.U(p)
        dRU = _fd_gradient(RU, pts, h)
        dP = _fd_gradient(ts.P, pts, h)

        rate = dtJ + np.einsum("nj,nikj->nik", xdot, dJ)
        term_a = -np.einsum("nli,nik,nk->nl", Jinv, rate, R[:, None] * U)
        term_b = -np.einsum("nj,nlj->nl", xdot, dRU)
        term_c = -np.einsum("nli,nimj,n,nm,nj->nl", Jinv, dJ, R, U, U)
        gram = np.einsum("nli,nji->nlj", Jinv, Jinv)
        gram -= np.eye(pts.shape[1])[None]
        term_d = -np.einsum("nlj,nj->nl", gram, dP)
        return term_a + term_b + term_c + term_d

    return H, G


def identity_deviation(cmap: ComposedMap, pts) -> float:
    """sup |Z(x) - x| over the sample points."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    return float(np.max(np.linalg.norm(cmap.evaluate(pts) - pts, axis=1)))
