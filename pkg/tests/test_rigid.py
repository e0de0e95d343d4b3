"""Inertia bookkeeping, Newton-Euler stepping, and the momentum pairing check."""

import numpy as np
import pytest

from fsilab.core import RigidState, rotation_exp
from fsilab.geometry import ball_volume_quadrature, disc
from fsilab.rigid import (
    Traction,
    inertia_tensor,
    kinetic_energy,
    mass_and_center,
    newton_euler_step,
    verify_distributional_momentum,
)


def make_body(dim=2, **kw):
    d = dict(dim=dim, X=np.zeros(dim), V=np.zeros(dim),
             omega=np.zeros(3) if dim == 3 else 0.0,
             O=np.eye(dim), M=1.0, J=np.eye(3) if dim == 3 else 1.0)
    d.update(kw)
    return RigidState(**d)


def half_disc_quadrature(radius, n, right):
    """Polar Gauss quadrature over one half of a disc (split along x=0)."""
    r, wr = np.polynomial.legendre.leggauss(n)
    r = 0.5 * radius * (r + 1.0)
    wr *= 0.5 * radius
    t, wt = np.polynomial.legendre.leggauss(n)
    lo, hi = (-np.pi / 2, np.pi / 2) if right else (np.pi / 2, 3 * np.pi / 2)
    th = 0.5 * (hi - lo) * t + 0.5 * (hi + lo)
    wt *= 0.5 * (hi - lo)
    R, TH = np.meshgrid(r, th, indexing="ij")
    pts = np.column_stack([(R * np.cos(TH)).ravel(), (R * np.sin(TH)).ravel()])
    w = (wr[:, None] * r[:, None] * wt[None, :]).ravel()
    return pts, w


def test_traction_validation():
    Traction(np.zeros(2), 0.0)
    with pytest.raises(ValueError):
        Traction(np.array([np.nan, 0.0]), 0.0)
    with pytest.raises(ValueError):
        Traction(np.zeros(3), np.array([0.0, np.inf, 0.0]))


def test_mass_and_center_homogeneous_disc():
    quad = disc(1.0).volume_quadrature(32)
    M, X = mass_and_center(lambda p: np.ones(len(p)), quad)
    assert M == pytest.approx(np.pi, rel=1e-12)
    assert np.allclose(X, 0.0, atol=1e-12)
    M2, X2 = mass_and_center(lambda p: 2.0 * np.ones(len(p)), quad)
    assert M2 == pytest.approx(2.0 * M, rel=1e-12)
    assert np.allclose(X2, X, atol=1e-12)


def test_mass_and_center_rejects_nonpositive_density():
    quad = disc(1.0).volume_quadrature(8)
    with pytest.raises(ValueError):
        mass_and_center(lambda p: np.zeros(len(p)), quad)


def test_split_density_center_vs_grid_oracle():
    # rho = 0.5 on the left half, 2.0 on the right: quadrature split along
    # the jump vs a 10^6-cell grid oracle
    rho = lambda p: np.where(p[:, 0] >= 0.0, 2.0, 0.5)
    pr, wr = half_disc_quadrature(1.0, 24, right=True)
    pl, wl = half_disc_quadrature(1.0, 24, right=False)
    quad = (np.vstack([pr, pl]), np.concatenate([wr, wl]))
    M, X = mass_and_center(rho, quad)

    n = 1000
    h = 2.0 / n
    g = -1.0 + (np.arange(n) + 0.5) * h
    GX, GY = np.meshgrid(g, g, indexing="ij")
    inside = GX ** 2 + GY ** 2 < 1.0
    dens = np.where(GX >= 0.0, 2.0, 0.5) * inside
    M_ref = dens.sum() * h * h
    X_ref = (dens * GX).sum() * h * h / M_ref

    assert X[0] > 0.0
    assert abs(X[0] - X_ref) < 1e-4
    assert abs(X[1]) < 1e-10
    assert M == pytest.approx(M_ref, abs=1e-3)


def test_disc_inertia_closed_form():
    a = 0.7
    quad = disc(a).volume_quadrature(32)
    rho0 = 3.0
    M, X = mass_and_center(lambda p: rho0 * np.ones(len(p)), quad)
    J = inertia_tensor(lambda p: rho0 * np.ones(len(p)), X, quad)
    assert abs(J - 0.5 * M * a ** 2) < 1e-6


def test_inertia_reflection_invariance():
    quad = disc(1.0).volume_quadrature(24)
    pts, _ = quad
    f = lambda p: 1.0 + 0.4 * np.cos(p[:, 0]) * np.cos(2 * p[:, 1]) + 0.2 * p[:, 0] ** 2
    g = lambda p: f(-p)
    Jf = inertia_tensor(f, np.zeros(2), quad)
    Jg = inertia_tensor(g, np.zeros(2), quad)
    assert Jf == pytest.approx(Jg, rel=1e-12)


def test_ball_inertia_closed_form():
    a = 1.3
    quad = ball_volume_quadrature(a, 16)
    rho0 = 2.0
    M, X = mass_and_center(lambda p: rho0 * np.ones(len(p)), quad)
    J = inertia_tensor(lambda p: rho0 * np.ones(len(p)), X, quad)
    assert M == pytest.approx(rho0 * 4 * np.pi * a ** 3 / 3, rel=1e-10)
    assert np.max(np.abs(J - 0.4 * M * a ** 2 * np.eye(3))) < 1e-4


def test_uniform_translation_exact():
    rb = make_body(V=np.array([0.3, -0.1]))
    s = rb
    for _ in range(100):
        s = newton_euler_step(s, Traction.zero(2), 0.01)
    assert np.allclose(s.X, rb.X + 1.0 * rb.V, atol=1e-13)
    assert np.allclose(s.V, rb.V)
    assert s.time == pytest.approx(1.0)


def test_constant_force_exact_for_rk2():
    f = np.array([0.4, -0.2])
    rb = make_body(M=2.5, V=np.array([0.1, 0.0]))
    s = rb
    dt, nsteps = 0.01, 73
    for _ in range(nsteps):
        s = newton_euler_step(s, Traction(f, 0.0), dt)
    t = dt * nsteps
    assert np.allclose(s.V, rb.V + t * f / rb.M, atol=1e-12)
    assert np.allclose(s.X, rb.X + t * rb.V + 0.5 * t ** 2 * f / rb.M, atol=1e-12)


def _free_body_reference_rk4(J0, omega_b0, T, dt):
    """Body-frame Euler equations integrated with classical RK4."""
    w = omega_b0.copy()
    Jinv = np.linalg.inv(J0)

    def f(w):
        return Jinv @ np.cross(J0 @ w, w)

    n = int(round(T / dt))
    for _ in range(n):
        k1 = f(w)
        k2 = f(w + 0.5 * dt * k1)
        k3 = f(w + 0.5 * dt * k2)
        k4 = f(w + dt * k3)
        w = w + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return w


def test_free_rigid_body_first_integrals():
    J0 = np.diag([1.0, 2.0, 3.0])
    rb = make_body(dim=3, J=J0, omega=np.array([1.0, 1.0, 1.0]))
    E0 = 0.5 * rb.omega @ (J0 @ rb.omega)
    L0 = np.linalg.norm(J0 @ rb.omega)
    s = rb
    dt = 1e-4
    for _ in range(10000):
        s = newton_euler_step(s, Traction.zero(3), dt)
    Jw = s.inertia_world()
    E1 = 0.5 * s.omega @ (Jw @ s.omega)
    L1 = np.linalg.norm(Jw @ s.omega)
    assert abs(E1 - E0) < 1e-6
    assert abs(L1 - L0) < 1e-6
    # trajectory against a fine body-frame RK4 reference
    w_ref_body = _free_body_reference_rk4(J0, np.array([1.0, 1.0, 1.0]), 1.0, 1e-4)
    w_body = s.O.T @ s.omega
    assert np.allclose(w_body, w_ref_body, atol=1e-5)


def test_orientation_stays_orthogonal_many_steps():
    rb = make_body(dim=3, J=np.diag([1.0, 2.0, 3.0]),
                   omega=np.array([0.8, -0.5, 0.3]))
    s = rb
    worst = 0.0
    for _ in range(100000):
        s = newton_euler_step(s, Traction.zero(3), 1e-3)
    worst = np.max(np.abs(s.O.T @ s.O - np.eye(3)))
    assert worst <= 1e-9


def test_rigid_density_transport_is_exact():
    rho_samples = np.array([1.0, 2.0, 0.5, 1.5])
    rb = make_body(rho_body=rho_samples, omega=2.0, V=np.array([1.0, 0.0]))
    s = rb
    for _ in range(50):
        s = newton_euler_step(s, Traction(np.array([0.1, 0.2]), 0.3), 0.01)
    assert s.rho_body.min() == rho_samples.min()
    assert s.rho_body.max() == rho_samples.max()


# -- distributional momentum pairing ------------------------------------------

def test_pairing_zero_rates():
    quad = disc(1.0).volume_quadrature(16)
    rb = make_body(M=np.pi, J=np.pi / 2)
    res = verify_distributional_momentum(
        rb, lambda p: np.ones(len(p)), (np.zeros(2), 0.0),
        (np.array([1.0, 2.0]), 0.7), quad)
    assert res == 0.0


def test_pairing_pure_translation():
    quad = disc(1.0).volume_quadrature(32)
    rho = lambda p: np.ones(len(p))
    M, X = mass_and_center(rho, quad)
    J = inertia_tensor(rho, X, quad)
    rb = make_body(M=M, J=J)
    f = np.array([2.0, -1.0])
    res = verify_distributional_momentum(
        rb, rho, (f / M, 0.0), (np.array([1.0, 0.0]), 0.0), quad)
    assert res <= 1e-8 * np.linalg.norm(f)


def test_pairing_random_rigid_data():
    # quadrature with about 1e5 nodes; integrand is polynomial, so the
    # pairing should close to near machine precision
    quad = disc(1.0).volume_quadrature(160)
    assert len(quad[1]) >= 1e5
    rho = lambda p: np.ones(len(p))
    M, X = mass_and_center(rho, quad)
    J = inertia_tensor(rho, X, quad)
    rng = np.random.default_rng(11)
    rb = make_body(M=M, J=J, omega=rng.normal(), O=rotation_exp(rng.normal(), 1.0, 2))
    rates = (rng.normal(size=2), rng.normal())
    test = (rng.normal(size=2), rng.normal())
    scale = M * (abs(rates[0]).max() + abs(rates[1]) + rb.omega ** 2 + 1.0)
    res = verify_distributional_momentum(rb, rho, rates, test, quad)
    assert res <= 1e-6 * scale


def test_pairing_3d_ball():
    quad = ball_volume_quadrature(0.8, 16)
    rho = lambda p: np.ones(len(p))
    M, X = mass_and_center(rho, quad)
    J = inertia_tensor(rho, X, quad)
    rng = np.random.default_rng(5)
    rb = make_body(dim=3, M=M, J=J, omega=rng.normal(size=3))
    rates = (rng.normal(size=3), rng.normal(size=3))
    test = (rng.normal(size=3), rng.normal(size=3))
    res = verify_distributional_momentum(rb, rho, rates, test, quad)
    assert res <= 1e-8 * M


def test_pairing_residual_refines_at_quadrature_order():
    rho = lambda p: 1.2 + 0.5 * np.cos(6 * p[:, 0]) * np.cos(6 * p[:, 1])
    sh = disc(1.0)
    ref_quad = sh.volume_quadrature(96)
    M, X = mass_and_center(rho, ref_quad)
    J = inertia_tensor(rho, X, ref_quad)
    rng = np.random.default_rng(2)
    rb = make_body(M=M, J=J, omega=0.9)
    rates = (rng.normal(size=2), rng.normal())
    test = (rng.normal(size=2), rng.normal())
    res = [verify_distributional_momentum(rb, rho, rates, test,
                                          sh.volume_quadrature(n))
           for n in (4, 8, 16)]
    assert res[0] > res[1] > res[2]
    assert res[2] < 1e-8


def test_kinetic_energy():
    rb = make_body(M=2.0, J=0.5, V=np.array([3.0, 4.0]), omega=2.0)
    assert kinetic_energy(rb) == pytest.approx(0.5 * 2 * 25 + 0.5 * 0.5 * 4)
