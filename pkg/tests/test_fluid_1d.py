"""Rusanov flux, viscous stress, and the 1D ALE piston scenario."""

import numpy as np
import pytest

from fsilab.core import FluidState, GasLaw, RigidState, SolverParams, sound_speed
from fsilab.errors import GeometryError, SolverError
from fsilab.fluid import (
    PistonMesh,
    ale_stage_1d,
    mirror_state,
    navier_slip_closure,
    numerical_flux,
    piston_state,
    step_piston_1d,
    viscous_stress,
)
from riemann_exact import sample as riemann_sample

LAW = GasLaw(1.4)


def piston_body(X, V, M=1.0):
    return RigidState(dim=1, X=np.array([X]), V=np.array([V]), omega=0.0,
                      O=np.eye(1), M=M, J=1.0)


# -- numerical flux ------------------------------------------------------------

def test_flux_consistency_at_rest():
    w = np.array([1.0, 0.0])
    f = numerical_flux(w, w, 1.0, LAW)
    assert np.allclose(f, [0.0, 1.0])  # p(1) = 1
    f_m = numerical_flux(w, w, -1.0, LAW)
    assert np.allclose(f_m, [0.0, -1.0])


def test_flux_consistency_moving():
    rho, u = 0.7, 0.9
    w = np.array([rho, rho * u])
    f = numerical_flux(w, w, 1.0, LAW)
    p = rho ** LAW.gamma
    assert np.allclose(f, [rho * u, rho * u * u + p], atol=1e-14)


def test_flux_mirror_symmetry():
    wl = np.array([1.0, 0.4])
    wr = np.array([0.5, -0.2])
    f = numerical_flux(wl, wr, 1.0, LAW)
    # reflect: x -> -x swaps sides and negates momenta
    f_ref = numerical_flux(np.array([0.5, 0.2]), np.array([1.0, -0.4]), 1.0, LAW)
    assert f[0] == pytest.approx(-f_ref[0], abs=1e-14)
    assert f[1] == pytest.approx(f_ref[1], abs=1e-14)


def test_flux_rejects_nan():
    with pytest.raises(ValueError):
        numerical_flux(np.array([np.nan, 0.0]), np.array([1.0, 0.0]), 1.0, LAW)


def test_ale_flux_uniform_state_tracks_face():
    # with the face moving at the flow speed, nothing crosses it
    rho, u = 1.3, 0.6
    w = np.array([rho, rho * u])
    f = numerical_flux(w, w, 1.0, LAW, face_speed=u)
    assert f[0] == pytest.approx(0.0, abs=1e-14)


# -- viscous stress -------------------------------------------------------------

def test_viscous_stress_1d_linear():
    x = np.array([0.0, 0.11, 0.3, 0.55, 0.7, 1.0])  # nonuniform on purpose
    u = 2.0 * x + 1.0
    T = viscous_stress(u, x)
    assert T.shape == (6, 1, 1)
    assert np.allclose(T[:, 0, 0], 6.0, atol=1e-12)


def test_viscous_stress_2d_shear_and_dilation():
    n = 8
    dx = dy = 1.0 / n
    xs = (np.arange(n) + 0.5) * dx
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    u = np.stack([Y, np.zeros_like(Y)], axis=-1)
    T = viscous_stress(u, (dx, dy))
    assert np.allclose(T[:, :, 0, 0], 0.0, atol=1e-12)
    assert np.allclose(T[:, :, 0, 1], 1.0, atol=1e-12)
    assert np.allclose(T[:, :, 1, 0], 1.0, atol=1e-12)
    assert np.allclose(T[:, :, 1, 1], 0.0, atol=1e-12)
    u2 = np.stack([X, Y], axis=-1)
    T2 = viscous_stress(u2, (dx, dy))
    assert np.allclose(T2[:, :, 0, 0], 4.0, atol=1e-12)
    assert np.allclose(T2[:, :, 1, 1], 4.0, atol=1e-12)
    assert np.allclose(T2[:, :, 0, 1], 0.0, atol=1e-12)
    # symmetry holds for arbitrary fields
    rng = np.random.default_rng(0)
    u3 = rng.normal(size=(n, n, 2))
    T3 = viscous_stress(u3, (dx, dy))
    assert np.max(np.abs(T3[:, :, 0, 1] - T3[:, :, 1, 0])) < 1e-12


def test_viscous_stress_second_order():
    def exact(X, Y):
        u1 = np.sin(2 * X) * np.cos(Y)
        u2 = np.cos(X) * np.sin(3 * Y)
        d1x = 2 * np.cos(2 * X) * np.cos(Y)
        d1y = -np.sin(2 * X) * np.sin(Y)
        d2x = -np.sin(X) * np.sin(3 * Y)
        d2y = 3 * np.cos(X) * np.cos(3 * Y)
        div = d1x + d2y
        T = np.empty(X.shape + (2, 2))
        T[..., 0, 0] = 2 * d1x + div
        T[..., 1, 1] = 2 * d2y + div
        T[..., 0, 1] = T[..., 1, 0] = d1y + d2x
        return np.stack([u1, u2], axis=-1), T

    errs = []
    hs = []
    for n in (16, 32, 64):
        dx = dy = 1.0 / n
        xs = (np.arange(n) + 0.5) * dx
        X, Y = np.meshgrid(xs, xs, indexing="ij")
        u, T_exact = exact(X, Y)
        T = viscous_stress(u, (dx, dy))
        errs.append(np.sqrt(np.mean((T - T_exact) ** 2)))
        hs.append(dx)
    slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    assert slope >= 1.9


# -- slip closure ---------------------------------------------------------------

def test_mirror_state_and_closure():
    rho_g, u_g = mirror_state(1.2, 0.5, 0.2)
    assert rho_g == 1.2
    assert (u_g + 0.5) / 2 == pytest.approx(0.2)  # face mean equals face speed
    ghost, fric = navier_slip_closure(0.5, np.array([0.3, 0.0]), 0.2, 0.0)
    assert np.allclose(fric, 0.0)  # inviscid limit: only impermeability
    ghost, fric = navier_slip_closure(0.7, np.array([0.0, 0.0]), 0.7, 0.5)
    assert np.allclose(fric, 0.0)  # no slip, no friction
    assert ghost == pytest.approx(0.7)
    _, fric = navier_slip_closure(0.0, np.array([2.0, -1.0]), 0.0, 0.25)
    assert np.allclose(fric, [-0.5, 0.25])


# -- shock tube against the exact solver ----------------------------------------

def run_shock_tube(n_cells, t_end, rho_l, u_l, rho_r, u_r, law=LAW):
    nodes = np.linspace(0.0, 1.0, n_cells + 1)
    centers = 0.5 * (nodes[1:] + nodes[:-1])
    rho = np.where(centers < 0.5, rho_l, rho_r)
    u = np.where(centers < 0.5, u_l, u_r)
    Q = np.column_stack([rho, rho * u]) * np.diff(nodes)[:, None]
    zeros = np.zeros_like(nodes)
    bc_l = ("state", (rho_l, u_l))
    bc_r = ("state", (rho_r, u_r))
    t = 0.0
    while t < t_end - 1e-14:
        vol = np.diff(nodes)
        U = Q / vol[:, None]
        uu = U[:, 1] / np.maximum(U[:, 0], 1e-12)
        c = sound_speed(U[:, 0], law)
        dt = min(0.4 * np.min(vol / (np.abs(uu) + c)), t_end - t)
        _, Q1, _ = ale_stage_1d(nodes, Q, law, 0.0, bc_l, bc_r, zeros, dt)
        _, Q2, _ = ale_stage_1d(nodes, Q1, law, 0.0, bc_l, bc_r, zeros, dt)
        Q = 0.5 * (Q + Q2)
        t += dt
    return centers, Q[:, 0] / np.diff(nodes)


def test_sod_profile_matches_exact_solution():
    t_end = 0.2
    centers, rho = run_shock_tube(400, t_end, 1.0, 0.0, 0.125, 0.0)
    rho_exact, _ = riemann_sample((centers - 0.5) / t_end, 1.0, 0.0, 0.125, 0.0,
                                  LAW.gamma)
    l1 = np.sum(np.abs(rho - rho_exact)) / len(centers)
    assert l1 <= 0.02


def test_geometric_conservation_law():
    # uniform flow on a deforming mesh stays uniform to machine precision
    n = 40
    nodes0 = np.linspace(0.0, 1.0, n + 1)
    rho0, u0 = 1.3, 0.4
    law = LAW
    Q = np.column_stack([np.full(n, rho0), np.full(n, rho0 * u0)]) \
        * np.diff(nodes0)[:, None]
    bc = ("state", (rho0, u0))
    nodes = nodes0.copy()
    dt = 0.004

    def w_of(x):
        return 0.3 * np.sin(np.pi * x)

    for _ in range(50):
        n1, Q1, _ = ale_stage_1d(nodes, Q, law, 0.0, bc, bc, w_of(nodes), dt)
        n2, Q2, _ = ale_stage_1d(n1, Q1, law, 0.0, bc, bc, w_of(n1), dt)
        nodes = 0.5 * (nodes + n2)
        Q = 0.5 * (Q + Q2)
    U = Q / np.diff(nodes)[:, None]
    assert np.max(np.abs(U[:, 0] - rho0)) < 1e-12
    assert np.max(np.abs(U[:, 1] - rho0 * u0)) < 1e-12


# -- piston scenario -------------------------------------------------------------

def make_piston(rho_left=1.0, rho_right=1.0, X=5.0, V=0.0, M=2.0,
                n=100, u0=0.0, domain=(0.0, 10.0), half=0.5, sigma=1.0):
    mesh = PistonMesh(domain[0], domain[1], half, n // 2, n - n // 2, sigma)
    rb = piston_body(X, V, M)
    rho_fn = lambda x: np.where(x < X, rho_left, rho_right)
    u_fn = lambda x: np.full_like(x, u0)
    fluid = piston_state(mesh, rb, rho_fn, u_fn)
    return mesh, rb, fluid


def test_piston_equilibrium():
    mesh, rb, fluid = make_piston()
    params = SolverParams(epsilon=0.0, cfl=0.4)
    f, b = fluid, rb
    for _ in range(100):
        f, b, trac, diag = step_piston_1d(f, b, mesh, params, LAW)
        assert abs(trac.force[0]) < 1e-12
    assert abs(b.V[0]) < 1e-13
    assert abs(b.X[0] - 5.0) < 1e-13
    assert np.max(np.abs(f.rho - 1.0)) < 1e-12
    assert np.max(np.abs(f.mom)) < 1e-12


def test_piston_sign_of_force():
    mesh, rb, fluid = make_piston(rho_left=1.2, rho_right=1.0)
    params = SolverParams(epsilon=0.0)
    f, b, trac, _ = step_piston_1d(fluid, rb, mesh, params, LAW)
    assert trac.force[0] > 0.0  # higher left pressure pushes the piston right
    assert b.V[0] > 0.0


def test_piston_mass_conservation_many_steps():
    mesh, rb, fluid = make_piston(rho_left=1.3, rho_right=0.9, n=120, M=0.7)
    params = SolverParams(epsilon=1e-3, cfl=0.4)
    mass0 = np.sum(fluid.rho * fluid.cell_volumes)
    f, b = fluid, rb
    for _ in range(10000):
        f, b, _, _ = step_piston_1d(f, b, mesh, params, LAW)
    mass1 = np.sum(f.rho * f.cell_volumes)
    assert abs(mass1 - mass0) <= 1e-12 * mass0


def test_piston_interface_bookkeeping_symmetric():
    # symmetric initial data: wall fluxes cancel, so the fluid momentum
    # change is exactly the negative of the piston impulse
    mesh, rb, fluid = make_piston(rho_left=1.5, rho_right=1.5, u0=0.0)
    params = SolverParams(epsilon=1e-2)
    f, b = fluid, rb
    for _ in range(20):
        p_before = np.sum(f.mom[:, 0] * f.cell_volumes) + b.M * b.V[0]
        f, b, trac, diag = step_piston_1d(f, b, mesh, params, LAW)
        p_after = np.sum(f.mom[:, 0] * f.cell_volumes) + b.M * b.V[0]
        assert abs(p_after - p_before) < 1e-13
        assert diag.action_reaction_mismatch == 0.0


def test_piston_moving_mesh_uniform_comove():
    # gas and piston translating together: the moving mesh must not disturb
    # the piston before the compression waves from the container walls
    # arrive (only a tiny diffusion precursor is tolerated)
    V = 0.25
    mesh, rb, fluid = make_piston(V=V, u0=V, M=3.0)
    params = SolverParams(epsilon=0.0)
    f, b = fluid, rb
    for _ in range(50):
        f, b, trac, _ = step_piston_1d(f, b, mesh, params, LAW)
        assert abs(trac.force[0]) < 1e-8
    near = np.abs(f.cell_centers - b.X[0]) < 1.0
    assert np.max(np.abs(f.rho[near] - 1.0)) < 1e-8
    assert np.max(np.abs(f.velocity()[near, 0] - V)) < 1e-8
    assert b.V[0] == pytest.approx(V, abs=1e-8)


def test_piston_energy_inequality():
    for eps in (1e-1, 1e-2):
        mesh, rb, fluid = make_piston(rho_left=1.2, rho_right=0.9, n=400, M=1.5)
        params = SolverParams(epsilon=eps)
        gamma = LAW.gamma

        def total_energy(f, b):
            ke = 0.5 * np.sum(f.mom[:, 0] ** 2 / np.maximum(f.rho, 1e-12)
                              * f.cell_volumes)
            pe = np.sum(f.rho ** gamma / (gamma - 1) * f.cell_volumes)
            return ke + pe + 0.5 * b.M * b.V[0] ** 2

        E0 = total_energy(fluid, rb)
        f, b = fluid, rb
        diss = 0.0
        t = 0.0
        while t < 0.25:
            f, b, _, diag = step_piston_1d(f, b, mesh, params, LAW)
            diss += diag.diss_visc + diag.diss_wall + diag.diss_body
            t += diag.dt
            assert total_energy(f, b) + diss <= E0 * (1.0 + 1e-3)


def test_piston_positivity_under_cfl():
    mesh, rb, fluid = make_piston(rho_left=2.0, rho_right=0.5, M=0.4, n=200)
    params = SolverParams(epsilon=0.0, cfl=0.4)
    f, b = fluid, rb
    for _ in range(500):
        f, b, _, _ = step_piston_1d(f, b, mesh, params, LAW)
    assert np.all(f.rho >= 0.0)


def test_piston_gap_violation_raises():
    mesh, rb, fluid = make_piston(X=0.9, sigma=1.0)  # left gap 0.4 < sigma/2
    with pytest.raises(GeometryError):
        step_piston_1d(fluid, rb, mesh, SolverParams(epsilon=0.0), LAW)


def test_piston_vacuum_raises():
    mesh = PistonMesh(0.0, 10.0, 0.5, 50, 50, 1.0)
    rb = piston_body(5.0, 0.0)
    centers_rho = lambda x: np.where(np.abs(x - 2.0) < 1.0, 1e-13, 1.0)
    fluid = piston_state(mesh, rb, centers_rho, lambda x: np.zeros_like(x))
    with pytest.raises(SolverError):
        step_piston_1d(fluid, rb, mesh, SolverParams(epsilon=0.0), LAW)


def test_piston_faces_track_body_exactly():
    mesh, rb, fluid = make_piston(rho_left=1.1, V=0.3)
    params = SolverParams(epsilon=0.0)
    f, b = fluid, rb
    for _ in range(25):
        f, b, _, _ = step_piston_1d(f, b, mesh, params, LAW)
    xl, xr = mesh.nodes(b.X[0])
    assert xl[-1] == b.X[0] - mesh.half_length
    assert xr[0] == b.X[0] + mesh.half_length
    assert np.all(np.diff(xl) > 0) and np.all(np.diff(xr) > 0)


def test_piston_dt_respects_dt_max():
    mesh, rb, fluid = make_piston()
    params = SolverParams(epsilon=0.0, dt_max=1e-4)
    _, _, _, diag = step_piston_1d(fluid, rb, mesh, params, LAW)
    assert diag.dt <= 1e-4 + 1e-18
