"""Penalized disc-in-a-box scenario on a fixed Cartesian grid."""

import numpy as np
import pytest

from fsilab.core import GasLaw, RigidState, SolverParams
from fsilab.errors import GeometryError, SolverError
from fsilab.fluid import DiscMesh, disc_state, step_disc_2d
from fsilab.geometry import disc

LAW = GasLaw(1.4)
RADIUS = 0.5


def make_disc(nx=48, V=(0.0, 0.0), omega=0.0, X=(2.0, 2.0), M=1.0,
              rho_fn=None, u_fn=None, sigma=0.5, box=4.0):
    mesh = DiscMesh(0.0, box, 0.0, box, nx, nx, sigma)
    shape = disc(RADIUS)
    rb = RigidState(dim=2, X=np.array(X), V=np.array(V), omega=omega,
                    O=np.eye(2), M=M, J=0.5 * M * RADIUS ** 2)
    if rho_fn is None:
        rho_fn = lambda p: np.ones(len(p))
    if u_fn is None:
        u_fn = lambda p: np.zeros_like(p)
    fluid = disc_state(mesh, rho_fn, u_fn)
    return mesh, shape, rb, fluid


def total_energy(f, b, law=LAW):
    ke = 0.5 * np.sum(np.sum(f.mom ** 2, axis=1)
                      / np.maximum(f.rho, 1e-12) * f.cell_volumes)
    pe = np.sum(f.rho ** law.gamma / (law.gamma - 1) * f.cell_volumes)
    body = 0.5 * b.M * np.dot(b.V, b.V) + 0.5 * b.J * b.omega ** 2
    return ke + pe + body


def test_uniform_rest_is_preserved():
    mesh, shape, rb, fluid = make_disc()
    params = SolverParams(epsilon=0.0)
    f, b = fluid, rb
    for _ in range(5):
        f, b, trac, diag = step_disc_2d(f, b, shape, mesh, params, LAW)
        assert np.max(np.abs(trac.force)) < 1e-12
        assert abs(trac.torque) < 1e-12
    assert np.max(np.abs(f.rho - 1.0)) < 1e-12
    assert np.max(np.abs(f.mom)) < 1e-12
    assert np.max(np.abs(b.V)) < 1e-12


def test_spinning_disc_inviscid_no_torque():
    mesh, shape, rb, fluid = make_disc(omega=1.0)
    params = SolverParams(epsilon=0.0)
    f, b = fluid, rb
    for _ in range(3):
        f, b, trac, _ = step_disc_2d(f, b, shape, mesh, params, LAW)
        assert abs(trac.torque) <= 1e-10
    assert b.omega == pytest.approx(1.0, abs=1e-9)
    # the gas never learns about the rotation through slip walls
    assert np.max(np.abs(f.mom)) < 1e-12


def test_spinning_disc_friction_torque():
    eps = 0.05
    # with the gas still at rest the slip is exactly -omega a t_hat, so the
    # friction torque tends to -2 pi eps omega a^3 as dt -> 0 (the reported
    # traction is a two-stage average, hence the O(dt) correction)
    tau_exact = -2.0 * np.pi * eps * 1.0 * RADIUS ** 3
    mesh, shape, rb, fluid = make_disc(omega=1.0)
    _, _, trac_small, _ = step_disc_2d(fluid, rb, shape, mesh,
                                       SolverParams(epsilon=eps, dt_max=1e-6),
                                       LAW)
    assert trac_small.torque == pytest.approx(tau_exact, rel=1e-5)

    params = SolverParams(epsilon=eps)
    f, b, trac, diag = step_disc_2d(fluid, rb, shape, mesh, params, LAW)
    assert trac.torque < 0.0
    assert trac.torque == pytest.approx(tau_exact, rel=5e-3)
    assert diag.body_slip_sq > 0.0
    # spin-down over a few steps
    for _ in range(20):
        f, b, trac, _ = step_disc_2d(f, b, shape, mesh, params, LAW)
    assert b.omega < 1.0


def test_friction_torque_sign_consistent_across_resolutions():
    eps = 0.05
    torques = []
    for nx in (24, 96):
        mesh, shape, rb, fluid = make_disc(nx=nx, omega=1.0)
        params = SolverParams(epsilon=eps, dt_max=2e-4)
        f, b = fluid, rb
        acc = 0.0
        for _ in range(5):
            f, b, trac, diag = step_disc_2d(f, b, shape, mesh, params, LAW)
            acc += diag.dt * trac.torque
        torques.append(acc)
    assert torques[0] < 0.0 and torques[1] < 0.0


def test_mass_is_conserved():
    def u_fn(p):
        u = np.zeros_like(p)
        u[:, 0] = 0.4 * np.exp(-((p[:, 0] - 1.0) ** 2 + (p[:, 1] - 2.0) ** 2)
                               / 0.1)
        return u

    mesh, shape, rb, fluid = make_disc(u_fn=u_fn)
    params = SolverParams(epsilon=0.01)
    mass0 = np.sum(fluid.rho * fluid.cell_volumes)
    f, b = fluid, rb
    for _ in range(40):
        f, b, _, _ = step_disc_2d(f, b, shape, mesh, params, LAW)
    mass1 = np.sum(f.rho * f.cell_volumes)
    assert abs(mass1 - mass0) <= 1e-12 * mass0


def test_energy_decays_during_spin_down():
    mesh, shape, rb, fluid = make_disc(omega=1.0)
    params = SolverParams(epsilon=0.05)
    E0 = total_energy(fluid, rb)
    f, b = fluid, rb
    E_prev = E0
    diss = 0.0
    for _ in range(30):
        f, b, _, diag = step_disc_2d(f, b, shape, mesh, params, LAW)
        diss += diag.diss_visc + diag.diss_wall + diag.diss_body
        E = total_energy(f, b)
        assert E <= E_prev + 1e-12
        assert E + diss <= E0 * (1.0 + 1e-3)
        E_prev = E


def test_moving_disc_feels_drag():
    mesh, shape, rb, fluid = make_disc(V=(0.3, 0.0), M=2.0)
    params = SolverParams(epsilon=0.01)
    f, b = fluid, rb
    for _ in range(15):
        f, b, trac, diag = step_disc_2d(f, b, shape, mesh, params, LAW)
        assert np.isfinite(diag.action_reaction_mismatch)
        assert diag.interface_impulse.shape == (2,)
    # pressure builds up ahead of the disc and opposes the motion
    assert trac.force[0] < 0.0
    assert abs(trac.force[1]) < 0.1 * abs(trac.force[0])
    assert b.V[0] < 0.3


def test_wall_gap_violation_raises():
    mesh, shape, rb, fluid = make_disc(X=(0.6, 2.0))  # gap 0.1 < sigma/2
    with pytest.raises(GeometryError):
        step_disc_2d(fluid, rb, shape, mesh, SolverParams(epsilon=0.0), LAW)


def test_vacuum_raises():
    def rho_fn(p):
        return np.where(p[:, 0] < 1.0, 1e-13, 1.0)

    mesh, shape, rb, fluid = make_disc(rho_fn=rho_fn)
    with pytest.raises(SolverError):
        step_disc_2d(fluid, rb, shape, mesh, SolverParams(epsilon=0.0), LAW)


def test_dt_respects_dt_max():
    mesh, shape, rb, fluid = make_disc()
    params = SolverParams(epsilon=0.0, dt_max=1e-4)
    _, _, _, diag = step_disc_2d(fluid, rb, shape, mesh, params, LAW)
    assert diag.dt <= 1e-4 + 1e-18
