"""Surface traction quadrature, coupled stepping, and the energy audit."""

import numpy as np
import pytest

from fsilab.core import GasLaw, RigidState, SolverParams
from fsilab.coupling import (
    EnergyReport,
    coupled_step,
    energy_audit,
    fluid_energies,
    grid_interpolant,
    surface_traction,
)
from fsilab.errors import CouplingError
from fsilab.fluid import DiscMesh, PistonMesh, disc_state, piston_state, viscous_stress
from fsilab.geometry import boundary_quadrature_world, disc

LAW = GasLaw(1.4)


def disc_body(radius=1.0, X=(0.0, 0.0), V=(0.0, 0.0), omega=0.0):
    return RigidState(dim=2, X=np.array(X, dtype=float),
                      V=np.array(V, dtype=float), omega=omega,
                      O=np.eye(2), M=1.0, J=0.5 * radius ** 2)


# -- surface traction ------------------------------------------------------------

def test_constant_pressure_closed_surface():
    rb = disc_body(radius=0.8, X=(0.3, -0.2))
    quad = boundary_quadrature_world(disc(0.8), rb, 128)
    trac = surface_traction(lambda p: np.full(len(p), 2.5), None, rb, 0.0,
                            quad)
    assert np.max(np.abs(trac.force)) < 1e-10
    assert abs(trac.torque) < 1e-10


def test_linear_pressure_matches_divergence_theorem():
    # p = p0 + k x1 over a disc of radius a: ∮ p n dS = ∫ grad p = (k pi a^2, 0),
    # and the force on the body is the negative of that
    a, k = 0.75, 1.3
    rb = disc_body(radius=a, X=(0.4, 0.1))
    quad = boundary_quadrature_world(disc(a), rb, 96)
    trac = surface_traction(lambda p: 2.0 + k * p[:, 0], None, rb, 0.0, quad)
    assert trac.force[0] == pytest.approx(-k * np.pi * a ** 2, rel=1e-12)
    assert abs(trac.force[1]) < 1e-12
    assert abs(trac.torque) < 1e-12


def test_rigid_velocity_field_is_stress_free():
    # u = V + omega x r has zero deformation, so the viscous term vanishes
    rb = disc_body(radius=0.5, X=(2.0, 2.0), V=(0.3, -0.1), omega=0.7)
    mesh = DiscMesh(0.0, 4.0, 0.0, 4.0, 64, 64, 0.5)
    pts = mesh.centers()
    r = pts - rb.X
    u = np.stack([rb.V[0] - rb.omega * r[:, 1],
                  rb.V[1] + rb.omega * r[:, 0]], axis=-1)
    T = viscous_stress(u.reshape(mesh.nx, mesh.ny, 2), (mesh.dx, mesh.dy))
    quad = boundary_quadrature_world(disc(0.5), rb, 64)
    trac = surface_traction(lambda p: np.zeros(len(p)),
                            grid_interpolant(mesh, T), rb, 1.0, quad)
    assert np.max(np.abs(trac.force)) <= 1e-8
    assert abs(trac.torque) <= 1e-8


def test_interpolation_outside_grid_raises():
    mesh = DiscMesh(0.0, 1.0, 0.0, 1.0, 8, 8, 0.1)
    interp = grid_interpolant(mesh, np.ones((8, 8)))
    rb = disc_body(radius=0.8, X=(0.5, 0.5))  # circle leaves the unit box
    quad = boundary_quadrature_world(disc(0.8), rb, 32)
    with pytest.raises(CouplingError):
        surface_traction(interp, None, rb, 0.0, quad)


def test_nan_field_raises():
    rb = disc_body(radius=0.5)
    quad = boundary_quadrature_world(disc(0.5), rb, 16)
    with pytest.raises(CouplingError):
        surface_traction(lambda p: np.full(len(p), np.nan), None, rb, 0.0,
                         quad)


def test_grid_interpolant_reproduces_bilinear_data():
    mesh = DiscMesh(0.0, 2.0, 0.0, 1.0, 20, 10, 0.1)
    pts = mesh.centers()
    vals = (2.0 + 3.0 * pts[:, 0] - pts[:, 1]).reshape(20, 10)
    interp = grid_interpolant(mesh, vals)
    probe = np.array([[0.7, 0.4], [1.3, 0.55], [0.11, 0.91]])
    assert np.allclose(interp(probe), 2.0 + 3.0 * probe[:, 0] - probe[:, 1],
                       atol=1e-13)


# -- coupled stepping -------------------------------------------------------------

def make_piston(rho_left=1.0, rho_right=1.0, n=100, M=2.0, u_fn=None):
    mesh = PistonMesh(0.0, 10.0, 0.5, n // 2, n - n // 2, 1.0)
    rb = RigidState(dim=1, X=np.array([5.0]), V=np.array([0.0]), omega=0.0,
                    O=np.eye(1), M=M, J=1.0)
    rho_fn = lambda x: np.where(x < 5.0, rho_left, rho_right)
    if u_fn is None:
        u_fn = lambda x: np.zeros_like(x)
    return mesh, rb, piston_state(mesh, rb, rho_fn, u_fn)


def test_coupled_equilibrium_energy_constant():
    mesh, rb, fluid = make_piston()
    params = SolverParams(epsilon=0.0)
    report = EnergyReport()
    f, b = fluid, rb
    for _ in range(50):
        f, b, _, _ = coupled_step(f, b, mesh, params, LAW, report)
    E = np.asarray(report.E_total)
    assert len(report) == 51  # baseline + 50 steps
    assert np.max(np.abs(E - E[0])) <= 1e-12 * E[0]
    summary = energy_audit(report)
    assert summary.passed
    assert summary.max_violation <= 1e-12 * E[0]


def test_smooth_inviscid_energy_drift_is_first_order():
    def u_fn(x):
        return np.zeros_like(x)

    drifts = []
    sizes = (100, 200, 400)
    for n in sizes:
        mesh = PistonMesh(0.0, 10.0, 0.5, n // 2, n // 2, 1.0)
        rb = RigidState(dim=1, X=np.array([5.0]), V=np.array([0.0]),
                        omega=0.0, O=np.eye(1), M=2.0, J=1.0)
        rho_fn = lambda x: 1.0 + 0.05 * np.exp(-((x - 2.5) / 0.4) ** 2)
        fluid = piston_state(mesh, rb, rho_fn, u_fn)
        params = SolverParams(epsilon=0.0)
        report = EnergyReport()
        f, b = fluid, rb
        while f.time < 0.3:
            f, b, _, _ = coupled_step(f, b, mesh, params, LAW, report)
        E = np.asarray(report.E_total)
        drifts.append(np.max(np.abs(E - E[0])))
    slope = np.polyfit(np.log([10.0 / n for n in sizes]), np.log(drifts), 1)[0]
    assert slope >= 0.9


def test_viscous_energy_nonincreasing():
    mesh, rb, fluid = make_piston(rho_left=1.2, rho_right=0.9, n=200, M=1.5)
    params = SolverParams(epsilon=0.05)
    report = EnergyReport()
    f, b = fluid, rb
    while f.time < 0.2:
        f, b, _, _ = coupled_step(f, b, mesh, params, LAW, report)
    E = np.asarray(report.E_total)
    assert np.all(np.diff(E) <= 1e-12 * E[0])
    assert E[-1] < E[0]
    summary = energy_audit(report)
    assert summary.passed


def test_coupled_disc_dispatch_and_mass():
    mesh = DiscMesh(0.0, 4.0, 0.0, 4.0, 32, 32, 0.5)
    shape = disc(0.5)
    rb = disc_body(radius=0.5, X=(2.0, 2.0), V=(0.2, 0.0))

    def u_fn(p):
        u = np.zeros_like(p)
        u[:, 0] = 0.3 * np.exp(-((p[:, 0] - 1.0) ** 2
                                 + (p[:, 1] - 2.0) ** 2) / 0.2)
        return u

    fluid = disc_state(mesh, lambda p: np.ones(len(p)), u_fn)
    params = SolverParams(epsilon=0.01)
    report = EnergyReport()
    f, b = fluid, rb
    for _ in range(20):
        f, b, _, _ = coupled_step(f, b, (mesh, shape), params, LAW, report)
    arrays = report.as_arrays()
    total_mass = arrays["mass_fluid"] + arrays["mass_body"]
    assert np.max(np.abs(total_mass - total_mass[0])) <= 1e-12 * total_mass[0]
    assert np.all(np.isfinite(arrays["E_total"]))
    assert arrays["X"].shape == (21, 2)
    assert arrays["omega"].shape == (21, 1)


def test_coupled_step_rejects_unknown_domain():
    mesh, rb, fluid = make_piston()
    with pytest.raises(TypeError):
        coupled_step(fluid, rb, "nonsense", SolverParams(epsilon=0.0), LAW)


# -- audit logic -------------------------------------------------------------------

def synthetic_report(E, dv=None, dw=None, db=None):
    n = len(E)
    rep = EnergyReport()
    rep.time = list(np.linspace(0.0, 1.0, n))
    rep.E_total = list(map(float, E))
    rep.E_fluid_kin = [0.0] * n
    rep.E_fluid_press = list(map(float, E))
    rep.E_body = [0.0] * n
    rep.diss_visc = list(dv) if dv is not None else [0.0] * n
    rep.diss_bdry_wall = list(dw) if dw is not None else [0.0] * n
    rep.diss_bdry_body = list(db) if db is not None else [0.0] * n
    rep.mass_fluid = [1.0] * n
    rep.mass_body = [1.0] * n
    return rep


def test_audit_constant_energy():
    rep = synthetic_report([4.0, 4.0, 4.0, 4.0])
    s = energy_audit(rep)
    assert s.max_violation == 0.0
    assert s.passed


def test_audit_decreasing_energy_zero_dissipation():
    rep = synthetic_report([4.0, 3.5, 3.2, 3.0])
    s = energy_audit(rep)
    assert s.max_violation == 0.0
    assert s.passed


def test_audit_flags_increasing_energy():
    rep = synthetic_report([4.0, 4.2, 4.5, 4.4])
    s = energy_audit(rep)
    assert s.max_violation == pytest.approx(0.5)
    assert not s.passed
    assert s.argmax_time == pytest.approx(2.0 / 3.0)


def test_audit_counts_dissipation_in_budget():
    # E drops but the claimed dissipation overshoots the drop: violation
    rep = synthetic_report([4.0, 3.9, 3.8], dv=[0.0, 0.2, 0.4])
    s = energy_audit(rep)
    assert s.max_violation == pytest.approx(0.2)
    assert not s.passed


def test_audit_empty_report_raises():
    with pytest.raises(ValueError):
        energy_audit(EnergyReport())


def test_fluid_energies_values():
    mesh = PistonMesh(0.0, 2.0, 0.5, 4, 4, 0.1)
    rb = RigidState(dim=1, X=np.array([1.0]), V=np.array([0.0]), omega=0.0,
                    O=np.eye(1), M=1.0, J=1.0)
    fluid = piston_state(mesh, rb, lambda x: np.full_like(x, 2.0),
                         lambda x: np.full_like(x, 3.0))
    ke, pe = fluid_energies(fluid, LAW)
    vol = 1.0  # two gaps of 0.5 each
    assert ke == pytest.approx(0.5 * 2.0 * 9.0 * vol, rel=1e-12)
    assert pe == pytest.approx(2.0 ** 1.4 / 0.4 * vol, rel=1e-12)
