"""Body shapes and everything derived from them.

Signed distance maps, boundary and volume quadratures, tubular collar
coordinates around the boundary, and the shape-comparison diagnostics
(symmetric-difference measure, distance of a rotation to the shape's
symmetry group). Shapes are described in the body frame with the centroid
at the origin; world-frame queries compose with the rigid pose (X, O).

Supported shapes: disc, symmetric 1D interval, regular polygon. A ball
volume quadrature is provided separately for the 3D inertia formula path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import RigidState
from .errors import GeometryError


def _gauss_legendre(n: int, a: float, b: float):
    """GL nodes/weights mapped to [a, b]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (b - a) * x + 0.5 * (a + b), 0.5 * (b - a) * w


@dataclass(frozen=True)
class BodyShape:
    """Reference body. kind is one of 'disc', 'interval', 'polygon'.

    radius: disc radius or polygon circumradius; half_length: interval
    half-width; vertices: CCW polygon vertex list (None otherwise).
    """

    kind: str
    dim: int
    radius: float = 0.0
    half_length: float = 0.0
    vertices: np.ndarray | None = None

    # -- basic measures ----------------------------------------------------

    @property
    def circumradius(self) -> float:
        if self.kind == "interval":
            return self.half_length
        return self.radius

    @property
    def measure(self) -> float:
        """Area (2D) or length (1D) of the body."""
        if self.kind == "disc":
            return np.pi * self.radius ** 2
        if self.kind == "interval":
            return 2.0 * self.half_length
        n = len(self.vertices)
        return 0.5 * n * self.radius ** 2 * np.sin(2 * np.pi / n)

    @property
    def boundary_measure(self) -> float:
        if self.kind == "disc":
            return 2.0 * np.pi * self.radius
        if self.kind == "interval":
            return 2.0  # endpoint count
        n = len(self.vertices)
        return 2.0 * n * self.radius * np.sin(np.pi / n)

    @property
    def reach(self) -> float:
        """Collar half-width with a unique boundary projection.

        Half the minimal curvature radius; zero for polygons (corners).
        """
        if self.kind == "disc":
            return 0.5 * self.radius
        if self.kind == "interval":
            return 0.5 * self.half_length
        return 0.0

    @property
    def symmetry_elements(self):
        """Rotations of the symmetry group, or None for a continuous group."""
        if self.kind == "disc":
            return None
        if self.kind == "interval":
            return [np.array([[1.0]]), np.array([[-1.0]])]
        n = len(self.vertices)
        out = []
        for k in range(n):
            a = 2.0 * np.pi * k / n
            out.append(np.array([[np.cos(a), -np.sin(a)], [np.sin(a), np.cos(a)]]))
        return out

    # -- signed distance ---------------------------------------------------

    def sdf(self, y):
        """Body-frame signed distance, negative inside. y: (d,) or (m, d)."""
        y = np.asarray(y, dtype=float)
        y = y.reshape(-1, 1) if self.dim == 1 else np.atleast_2d(y)
        if self.kind == "disc":
            d = np.linalg.norm(y, axis=1) - self.radius
        elif self.kind == "interval":
            d = np.abs(y[:, 0]) - self.half_length
        else:
            d = self._polygon_sdf(y)
        return d if d.size > 1 else float(d[0])

    def _polygon_sdf(self, y):
        V = self.vertices
        m = y.shape[0]
        dist = np.full(m, np.inf)
        inside = np.ones(m, dtype=bool)
        for i in range(len(V)):
            p, q = V[i], V[(i + 1) % len(V)]
            e = q - p
            r = y - p
            t = np.clip((r @ e) / (e @ e), 0.0, 1.0)
            dist = np.minimum(dist, np.linalg.norm(r - t[:, None] * e, axis=1))
            # CCW convex polygon: inside iff left of every edge
            inside &= (e[0] * r[:, 1] - e[1] * r[:, 0]) >= 0.0
        return np.where(inside, -dist, dist)

    # -- quadratures (body frame) -------------------------------------------

    def boundary_quadrature(self, n: int | None = None):
        """(points, outward unit normals, weights); weights sum to the
        boundary measure."""
        if self.kind == "disc":
            n = n or 256
            th = 2.0 * np.pi * np.arange(n) / n
            nrm = np.column_stack([np.cos(th), np.sin(th)])
            pts = self.radius * nrm
            w = np.full(n, 2.0 * np.pi * self.radius / n)
            return pts, nrm, w
        if self.kind == "interval":
            h = self.half_length
            return (np.array([[-h], [h]]), np.array([[-1.0], [1.0]]),
                    np.array([1.0, 1.0]))
        n = n or 16  # nodes per edge
        V = self.vertices
        pts, nrms, ws = [], [], []
        for i in range(len(V)):
            p, q = V[i], V[(i + 1) % len(V)]
            e = q - p
            L = np.linalg.norm(e)
            nrm = np.array([e[1], -e[0]]) / L  # right of CCW edge = outward
            x, w = _gauss_legendre(n, 0.0, 1.0)
            pts.append(p + x[:, None] * e)
            nrms.append(np.broadcast_to(nrm, (n, 2)).copy())
            ws.append(w * L)
        return np.vstack(pts), np.vstack(nrms), np.concatenate(ws)

    def volume_quadrature(self, n: int = 32):
        """(points, weights) for smooth body-frame integrands.

        Disc: Gauss-Legendre in radius, uniform in angle. Interval: plain
        Gauss-Legendre. Polygon: centroid fan with a collapsed-square map
        per triangle.
        """
        if self.kind == "disc":
            r, wr = _gauss_legendre(n, 0.0, self.radius)
            nth = 4 * n
            th = 2.0 * np.pi * np.arange(nth) / nth
            R, TH = np.meshgrid(r, th, indexing="ij")
            pts = np.column_stack([(R * np.cos(TH)).ravel(), (R * np.sin(TH)).ravel()])
            w = (wr[:, None] * r[:, None] * (2.0 * np.pi / nth) * np.ones(nth)).ravel()
            return pts, w
        if self.kind == "interval":
            x, w = _gauss_legendre(n, -self.half_length, self.half_length)
            return x[:, None], w
        V = self.vertices
        u, wu = _gauss_legendre(n, 0.0, 1.0)
        v, wv = _gauss_legendre(n, 0.0, 1.0)
        pts, ws = [], []
        for i in range(len(V)):
            p, q = V[i], V[(i + 1) % len(V)]
            twoA = abs(p[0] * q[1] - p[1] * q[0])
            # x(u, v) = u * ((1-v) p + v q); Jacobian = u * 2A
            M = (1.0 - v)[:, None] * p + v[:, None] * q  # (n, 2)
            P = u[:, None, None] * M[None, :, :]
            pts.append(P.reshape(-1, 2))
            ws.append((wu[:, None] * u[:, None] * wv[None, :] * twoA).ravel())
        return np.vstack(pts), np.concatenate(ws)


def disc(radius: float) -> BodyShape:
    if radius <= 0.0:
        raise GeometryError("disc radius must be positive")
    return BodyShape("disc", 2, radius=radius)


def interval(half_length: float) -> BodyShape:
    if half_length <= 0.0:
        raise GeometryError("interval half-length must be positive")
    return BodyShape("interval", 1, half_length=half_length)


def regular_polygon(n_sides: int, circumradius: float) -> BodyShape:
    if n_sides < 3:
        raise GeometryError("polygon needs at least 3 sides")
    if circumradius <= 0.0:
        raise GeometryError("circumradius must be positive")
    a = 2.0 * np.pi * np.arange(n_sides) / n_sides
    verts = circumradius * np.column_stack([np.cos(a), np.sin(a)])
    return BodyShape("polygon", 2, radius=circumradius, vertices=verts)


def ball_volume_quadrature(radius: float, n: int = 24):
    """Spherical product quadrature for the homogeneous-ball inertia path."""
    r, wr = _gauss_legendre(n, 0.0, radius)
    mu, wmu = _gauss_legendre(n, -1.0, 1.0)
    nphi = 2 * n
    phi = 2.0 * np.pi * np.arange(nphi) / nphi
    R, MU, PH = np.meshgrid(r, mu, phi, indexing="ij")
    s = np.sqrt(1.0 - MU ** 2)
    pts = np.column_stack([(R * s * np.cos(PH)).ravel(),
                           (R * s * np.sin(PH)).ravel(),
                           (R * MU).ravel()])
    w = (wr[:, None, None] * R ** 2 * wmu[None, :, None] * (2.0 * np.pi / nphi))
    return pts, w.ravel()


# ---------------------------------------------------------------------------
# world-frame queries
# ---------------------------------------------------------------------------

def to_body(rb: RigidState, x):
    """World point(s) to body frame: O^T (x - X)."""
    x = np.asarray(x, dtype=float)
    return (x - rb.X) @ rb.O


def to_world(rb: RigidState, y):
    y = np.asarray(y, dtype=float)
    return y @ rb.O.T + rb.X


def signed_distance(shape: BodyShape, rb: RigidState, x):
    """Signed distance to the body at its current pose, negative inside."""
    return shape.sdf(to_body(rb, x))


def boundary_quadrature_world(shape: BodyShape, rb: RigidState, n: int | None = None):
    """Body boundary quadrature mapped to the current pose."""
    pts, nrm, w = shape.boundary_quadrature(n)
    return to_world(rb, pts), nrm @ rb.O.T, w


@dataclass
class TubularFrame:
    """Collar coordinates of a point near the boundary.

    s is the boundary parameter (angle for a disc, +-1 for the interval
    endpoints), z the signed transverse distance (positive outside),
    basepoint the foot of the projection, e_z the outward unit normal
    there, tangents the remaining frame rows, and h_s the metric factor
    along s at offset z.
    """

    s: float
    z: float
    basepoint: np.ndarray
    e_z: np.ndarray
    tangents: np.ndarray
    h_s: float


def tubular_project(shape: BodyShape, rb: RigidState, x) -> TubularFrame:
    """Project a world point onto the boundary collar.

    Raises GeometryError beyond the reach (where the projection would not
    be unique); the boundary of the collar itself is allowed.
    """
    x = np.asarray(x, dtype=float).reshape(rb.dim)
    if shape.reach == 0.0:
        raise GeometryError(f"no tubular collar for shape kind {shape.kind!r}")
    y = to_body(rb, x)
    if shape.kind == "disc":
        r = float(np.linalg.norm(y))
        z = r - shape.radius
        if abs(z) > shape.reach:
            raise GeometryError(f"point at transverse distance {z:.3g} is outside "
                                f"the collar (reach {shape.reach:.3g})")
        if r == 0.0:
            raise GeometryError("projection undefined at the disc center")
        th = float(np.arctan2(y[1], y[0]))
        ez_b = np.array([np.cos(th), np.sin(th)])
        tan_b = np.array([[-np.sin(th), np.cos(th)]])
        return TubularFrame(s=th, z=z,
                            basepoint=to_world(rb, shape.radius * ez_b),
                            e_z=rb.O @ ez_b,
                            tangents=tan_b @ rb.O.T,
                            h_s=shape.radius + z)
    # interval
    side = 1.0 if y[0] >= 0.0 else -1.0
    z = abs(y[0]) - shape.half_length
    if abs(z) > shape.reach:
        raise GeometryError(f"point at transverse distance {z:.3g} is outside "
                            f"the collar (reach {shape.reach:.3g})")
    return TubularFrame(s=side, z=float(z),
                        basepoint=to_world(rb, np.array([side * shape.half_length])),
                        e_z=rb.O @ np.array([side]),
                        tangents=np.zeros((0, 1)),
                        h_s=1.0)


# ---------------------------------------------------------------------------
# shape-comparison diagnostics
# ---------------------------------------------------------------------------

def symmetric_difference_volume(shape: BodyShape, pose_a, pose_b,
                                resolution: int | None = None) -> float:
    """Measure of B(pose_a) symmetric-difference B(pose_b).

    Deterministic cell-center grid over the joint bounding box (default
    1024 per axis in 2D, 2^20 in 1D).
    """
    Xa, Oa = pose_a
    Xb, Ob = pose_b
    Xa = np.asarray(Xa, dtype=float).reshape(shape.dim)
    Xb = np.asarray(Xb, dtype=float).reshape(shape.dim)
    R = shape.circumradius * 1.0001
    lo = np.minimum(Xa, Xb) - R
    hi = np.maximum(Xa, Xb) + R
    if shape.dim == 1:
        n = resolution or 2 ** 20
        dx = (hi[0] - lo[0]) / n
        pts = (lo[0] + (np.arange(n) + 0.5) * dx)[:, None]
        cell = dx
    else:
        n = resolution or 1024
        dx = (hi - lo) / n
        g0 = lo[0] + (np.arange(n) + 0.5) * dx[0]
        g1 = lo[1] + (np.arange(n) + 0.5) * dx[1]
        G0, G1 = np.meshgrid(g0, g1, indexing="ij")
        pts = np.column_stack([G0.ravel(), G1.ravel()])
        cell = dx[0] * dx[1]
    in_a = shape.sdf((pts - Xa) @ np.asarray(Oa, dtype=float)) < 0.0
    in_b = shape.sdf((pts - Xb) @ np.asarray(Ob, dtype=float)) < 0.0
    return float(np.count_nonzero(in_a ^ in_b) * cell)


def symmetry_distance(shape: BodyShape, S) -> float:
    """Operator-norm distance from a rotation S to the shape's symmetry group."""
    S = np.asarray(S, dtype=float)
    if S.shape != (shape.dim, shape.dim):
        raise ValueError(f"rotation must be {shape.dim}x{shape.dim}")
    if np.max(np.abs(S.T @ S - np.eye(shape.dim))) > 1e-9:
        raise ValueError("symmetry_distance requires an orthogonal matrix")
    elems = shape.symmetry_elements
    if elems is None:
        return 0.0
    return float(min(np.linalg.norm(S - Q, ord=2) for Q in elems))
