"""Invariant batteries with machine-readable pass/fail reports.

Each battery re-runs a compact version of one module's structural checks
(the cheap, deterministic core of what the test suite covers) and returns
a JSON-friendly report. A check records its value, tolerance, and the
comparison direction, so a red report is directly actionable.
"""

from __future__ import annotations

import numpy as np

from .core import GasLaw, RigidState, SolverParams, rotation_exp
from .coupling import EnergyReport, coupled_step, energy_audit
from .errors import ConfigError
from .fluid import PistonMesh, piston_state
from .geometry import disc, regular_polygon, symmetric_difference_volume, \
    symmetry_distance, tubular_project
from .measures import defect_proxy, dissipation_defect, measure_from_samples, \
    partition_bound_check
from .rigid import inertia_tensor, mass_and_center, \
    verify_distributional_momentum
from .testfns import BlendParams, CutoffRigidField, RadialPatchField, \
    RigidField, SumField, TestFunctionPair, blend_test_function, \
    validate_admissible
from .transforms import Cutoff, FlowMap, compose_maps, identity_deviation, \
    truncated_field

__all__ = ["verify", "BATTERIES"]


def _check(name: str, value, tolerance, op: str = "<=") -> dict:
    value = float(value)
    tolerance = float(tolerance)
    passed = value <= tolerance if op == "<=" else value >= tolerance
    return {"name": name, "value": value, "tolerance": tolerance,
            "op": op, "passed": bool(passed)}


def _rot2(theta: float) -> np.ndarray:
    return rotation_exp(1.0, theta, 2)


# ---------------------------------------------------------------------------
# geometry: symmetric-difference functional and tubular coordinates
# ---------------------------------------------------------------------------

def _battery_geometry() -> list:
    checks = []
    I = np.eye(2)
    sq = regular_polygon(4, 1.0)
    origin = (np.zeros(2), I)

    zero_cases = [(disc(1.0), np.zeros(2), _rot2(1.234)),
                  (sq, np.zeros(2), _rot2(np.pi / 2)),
                  (sq, np.zeros(2), I)]
    worst = max(symmetric_difference_volume(sh, origin, (a, S), resolution=512)
                for sh, a, S in zero_cases)
    checks.append(_check("symdiff_zero_on_symmetry_group", worst, 1e-12))

    nonzero_cases = [(disc(1.0), np.array([0.3, 0.0]), I),
                     (sq, np.zeros(2), _rot2(0.3)),
                     (sq, np.array([0.0, 0.2]), _rot2(np.pi / 2))]
    floor = min(symmetric_difference_volume(sh, origin, (a, S), resolution=512)
                for sh, a, S in nonzero_cases)
    checks.append(_check("symdiff_positive_off_group", floor, 1e-2, op=">="))

    samples = []
    for d in (np.array([1.0, 0.0]), np.array([1.0, 1.0]) / np.sqrt(2.0)):
        for m in (0.0, 0.1, 0.2, 0.4):
            for th in (0.0, 0.1, np.pi / 4, np.pi / 2):
                a = m * d
                dev = np.linalg.norm(a) + symmetry_distance(sq, _rot2(th))
                E = symmetric_difference_volume(sq, origin, (a, _rot2(th)),
                                                resolution=256)
                samples.append((dev, E))
    coercive = min(E for dev, E in samples if dev >= 0.1)
    checks.append(_check("symdiff_coercive_floor", coercive, 1e-3, op=">="))

    sh = disc(2.0)
    rb = RigidState(dim=2, X=np.array([0.5, -0.3]), V=np.zeros(2), omega=0.0,
                    O=_rot2(1.1), M=1.0, J=1.0)
    rng = np.random.default_rng(7)
    worst_rt = 0.0
    for _ in range(50):
        th = rng.uniform(0.0, 2.0 * np.pi)
        z = rng.uniform(-0.99, 0.99) * sh.reach
        x = rb.X + (sh.radius + z) * np.array([np.cos(th), np.sin(th)])
        fr = tubular_project(sh, rb, x)
        worst_rt = max(worst_rt,
                       float(np.max(np.abs(fr.basepoint + fr.z * fr.e_z - x))))
    checks.append(_check("tubular_roundtrip", worst_rt, 1e-10))

    checks.append(_check("disc_symmetry_distance",
                         symmetry_distance(disc(1.0), _rot2(0.77)), 0.0))
    return checks


# ---------------------------------------------------------------------------
# appendixA: distributional rigid-momentum pairing
# ---------------------------------------------------------------------------

def _battery_appendix_a() -> list:
    quad = disc(1.0).volume_quadrature(96)
    rng = np.random.default_rng(23)
    densities = [lambda p: np.ones(len(p)),
                 lambda p: 1.0 + 0.3 * np.cos(2.1 * p[:, 0]) * np.cos(1.3 * p[:, 1])]
    worst = 0.0
    for rho in densities:
        M, X = mass_and_center(rho, quad)
        J = inertia_tensor(rho, X, quad)
        for _ in range(10):
            rb = RigidState(dim=2, X=np.zeros(2), V=rng.normal(size=2),
                            omega=rng.normal(), O=_rot2(rng.normal()),
                            M=M, J=J)
            rates = (rng.normal(size=2), rng.normal())
            test = (rng.normal(size=2), rng.normal())
            scale = M * (np.max(np.abs(rates[0])) + abs(rates[1])
                         + rb.omega ** 2 + 1.0)
            res = verify_distributional_momentum(rb, rho, rates, test, quad)
            worst = max(worst, res / scale)
    return [_check("pairing_residual_20_draws", worst, 1e-6)]


# ---------------------------------------------------------------------------
# blend: layer construction around a perturbed pose
# ---------------------------------------------------------------------------

_BOX = ((0.0, 4.0), (0.0, 4.0))
_CENTER = np.array([2.0, 2.0])
_RADIUS = 0.3


def _blend_pair() -> TestFunctionPair:
    rigid = RigidField(alpha=np.array([0.3, -0.2]), spin=0.7,
                       center=_CENTER.copy())
    patch = RadialPatchField(center=_CENTER, radius=_RADIUS, z_power=2,
                             amp_tangent=0.4)
    phiF = SumField((CutoffRigidField(rigid, Cutoff(_BOX, 1.0)), patch))
    return TestFunctionPair(phiF, rigid, True, True)


def _disc_body(X=_CENTER, angle=0.0) -> RigidState:
    return RigidState(dim=2, X=np.asarray(X, dtype=float), V=np.zeros(2),
                      omega=0.0, O=_rot2(angle), M=1.0, J=0.05)


def _layer_points(delta: float, n_th: int = 96, n_z: int = 32) -> np.ndarray:
    th = np.linspace(0.0, 2.0 * np.pi, n_th, endpoint=False)
    z = np.linspace(1e-6, delta * (1.0 - 1e-6), n_z)
    R, TH = np.meshgrid(_RADIUS + z, th)
    return _CENTER + np.column_stack([(R * np.cos(TH)).ravel(),
                                      (R * np.sin(TH)).ravel()])


def _battery_blend() -> list:
    checks = []
    pair = _blend_pair()
    shape = disc(_RADIUS)
    deltas = [0.1, 0.05, 0.025, 0.0125]
    sups, grad_sups, term_sups = [], [], []
    for delta in deltas:
        blended = blend_test_function(pair, _disc_body(), BlendParams(delta),
                                      shape)
        pts = _layer_points(delta)
        dev = blended.value(pts) - blended.piecewise_value(pts)
        sups.append(np.max(np.linalg.norm(dev, axis=1)))
        gdev = blended.gradient(pts) - blended.piecewise_gradient(pts)
        grad_sups.append(np.max(np.abs(gdev)))
        term_sups.append(np.max(np.abs(blended.profile_gradient_term(pts))))

    def slope(vals):
        return float(np.polyfit(np.log(deltas), np.log(vals), 1)[0])

    checks.append(_check("layer_sup_slope", slope(sups), 0.9, op=">="))
    checks.append(_check("layer_gradient_slope", slope(grad_sups), 0.9,
                         op=">="))
    checks.append(_check("profile_term_slope", slope(term_sups), 0.9,
                         op=">="))

    rng = np.random.default_rng(19)
    worst_jump = 0.0
    delta = 0.05
    for _ in range(4):
        shift = delta ** 5 * rng.uniform(-1.0, 1.0, 2)
        rb_eps = _disc_body(X=_CENTER + shift,
                            angle=rng.uniform(0.0, 2.0 * np.pi))
        blended = blend_test_function(pair, rb_eps, BlendParams(delta), shape)
        eps_pair = TestFunctionPair(blended, pair.phiB, True, False)
        report = validate_admissible(eps_pair, shape, rb_eps, _BOX, which="V",
                                     tol_jump=1e-8)
        worst_jump = max(worst_jump, report.max_normal_jump)
    checks.append(_check("blended_admissibility_jump", worst_jump, 1e-8))
    return checks


# ---------------------------------------------------------------------------
# maps: flow-map composition invariants
# ---------------------------------------------------------------------------

def _trajectory(X0, V, omega):
    X0 = np.asarray(X0, dtype=float)
    V = np.asarray(V, dtype=float)

    def at(t):
        return RigidState(dim=2, X=X0 + t * V, V=V, omega=omega,
                          O=rotation_exp(omega, t, 2), M=1.0, J=1.0)

    return at


def _battery_maps() -> list:
    checks = []
    xi = Cutoff(_BOX, 1.0)

    def field_of(traj):
        return lambda t, pts: truncated_field(traj(t), xi)(pts)

    tr1 = _trajectory([2.0, 2.0], [0.25, 0.1], 0.4)
    tr2 = _trajectory([2.0, 2.0], [-0.1, 0.2], -0.3)
    t = 0.4
    Z1 = FlowMap(field_of(tr1), _BOX, t=t)
    Z2 = FlowMap(field_of(tr2), _BOX, t=t)
    zt1, zt2 = compose_maps(Z1, Z2)
    xs = np.linspace(1.2, 2.8, 5)
    GX, GY = np.meshgrid(xs, xs)
    pts = np.column_stack([GX.ravel(), GY.ravel()])

    det = np.linalg.det(zt2.jacobian(pts))
    checks.append(_check("volume_preservation", np.max(np.abs(det - 1.0)),
                         1e-6))
    checks.append(_check("roundtrip", zt2.roundtrip_error(pts), 1e-8))
    onto = zt1.evaluate(zt2.evaluate(pts))
    checks.append(_check("mutual_inversion",
                         np.max(np.linalg.norm(onto - pts, axis=1)), 1e-8))

    rb1, rb2 = tr1(t), tr2(t)
    th = np.linspace(0.0, 2.0 * np.pi, 24, endpoint=False)
    ring = rb1.X + 0.55 * np.column_stack([np.cos(th), np.sin(th)])
    expect = rb2.X + (ring - rb1.X) @ (rb2.O @ rb1.O.T).T
    checks.append(_check("rigid_form_near_body",
                         np.max(np.linalg.norm(zt2.evaluate(ring) - expect,
                                               axis=1)), 1e-8))

    Z1b = FlowMap(field_of(tr1), _BOX, t=t)
    same1, same2 = compose_maps(Z1, Z1b)
    dev = max(identity_deviation(same1, pts), identity_deviation(same2, pts))
    checks.append(_check("identical_trajectories_identity", dev, 1e-8))
    return checks


# ---------------------------------------------------------------------------
# measures: defect proxies and partition constants
# ---------------------------------------------------------------------------

def _battery_measures() -> list:
    checks = []
    law2 = GasLaw(2.0)
    rep2 = partition_bound_check(1.0, 1.0, law2, n_lattice=100_000)
    checks.append(_check("partition_gamma2_C1", abs(rep2.C1 - 1.0), 1e-9))

    law14 = GasLaw(1.4)
    rep = partition_bound_check(0.5, 2.0, law14, n_lattice=100_000)
    checks.append(_check("partition_gamma14_C1_golden",
                         abs(rep.C1 - 2.536485144386418), 0.0))
    checks.append(_check("partition_gamma14_C23_golden",
                         abs(rep.C23 - 15.287249013726917), 0.0))

    # two-value velocity oscillation: the defect equals rho a^2 / 2 per unit
    # volume, and the flux-gap trace stays within the energy-gap bound
    eps = [0.1, 0.05, 0.025, 0.0125]
    n, vol, rho0, a = 50, 0.04, 1.2, 0.3
    vols = np.full(n, vol)
    signs = [1.0, -1.0, 1.0, -1.0]
    rho_list = [np.full(n, rho0) for _ in eps]
    u_list = [np.full(n, a * s * (1.0 + e)) for s, e in zip(signs, eps)]
    m = measure_from_samples(rho_list, u_list, vols)
    px = defect_proxy(m, eps, law14)
    hand = 0.5 * rho0 * a ** 2 * n * vol
    checks.append(_check("oscillation_defect_vs_closed_form",
                         abs(px.total / hand - 1.0), 0.1))
    bound = (2.0 + 1.0 * (law14.gamma - 1.0)) * px.d_cells
    worst = float(np.max(np.abs(px.nuM[:, 0, 0]) - bound))
    checks.append(_check("trace_bound", max(worst, 0.0), 0.0))

    const = [np.full(n, rho0) for _ in eps]
    still = [np.full(n, 0.25) for _ in eps]
    m0 = measure_from_samples(const, still, vols)
    E = np.array([[np.sum(vols * (0.5 * rho0 * 0.25 ** 2
                                  + rho0 ** law14.gamma / 0.4))] * len(eps)])
    D0 = dissipation_defect(eps, E, E[:, 0])
    checks.append(_check("defect_zero_for_constant_sequence",
                         abs(D0[0]) + defect_proxy(m0, eps, law14).total, 0.0))
    return checks


# ---------------------------------------------------------------------------
# fluid: conservation and the energy inequality on short runs
# ---------------------------------------------------------------------------

def _piston_run(n, t_end, epsilon, rho_fn):
    mesh = PistonMesh(0.0, 2.0, 0.05, n, n, 0.2)
    rb = RigidState(dim=1, X=np.array([1.0]), V=np.zeros(1), omega=0.0,
                    O=np.eye(1), M=1.0, J=0.0, rho_body=np.array([5.0]))
    fluid = piston_state(mesh, rb, rho_fn, lambda x: np.zeros_like(x))
    params = SolverParams(epsilon=epsilon)
    law = GasLaw(1.4)
    report = EnergyReport()
    while fluid.time < t_end - 1e-12:
        fluid, rb, _, _ = coupled_step(fluid, rb, mesh, params, law, report)
    return report, rb


def _battery_fluid() -> list:
    checks = []
    flat, _ = _piston_run(32, 0.05, 1e-2, lambda x: np.ones_like(x))
    audit = energy_audit(flat)
    checks.append(_check("equilibrium_energy_violation", audit.max_violation,
                         0.0))

    report, rb = _piston_run(64, 0.2, 1e-2,
                             lambda x: np.where(x < 1.0, 1.08, 1.0))
    arr = report.as_arrays()
    drift = np.max(np.abs(arr["mass_fluid"] - arr["mass_fluid"][0]))
    checks.append(_check("fluid_mass_drift", drift / arr["mass_fluid"][0],
                         1e-10))
    E0 = arr["E_total"][0]
    budget = arr["E_total"] + arr["diss_visc"] + arr["diss_bdry_wall"] \
        + arr["diss_bdry_body"]
    checks.append(_check("energy_inequality",
                         float(np.max(budget - E0)) / E0, 1e-3))
    checks.append(_check("body_density_range",
                         abs(float(np.min(rb.rho_body)) - 5.0)
                         + abs(float(np.max(rb.rho_body)) - 5.0), 0.0))
    return checks


BATTERIES = {
    "geometry": _battery_geometry,
    "appendixA": _battery_appendix_a,
    "blend": _battery_blend,
    "maps": _battery_maps,
    "measures": _battery_measures,
    "fluid": _battery_fluid,
}


def verify(battery: str) -> dict:
    """Run one battery (or "all") and return its report."""
    if battery == "all":
        parts = [verify(name) for name in BATTERIES]
        return {"battery": "all",
                "passed": all(p["passed"] for p in parts),
                "batteries": parts}
    if battery not in BATTERIES:
        raise ConfigError(f"unknown battery {battery!r} "
                          f"(have {sorted(BATTERIES)} and 'all')")
    checks = BATTERIES[battery]()
    return {"battery": battery,
            "passed": all(c["passed"] for c in checks),
            "checks": checks}
