"""Experiment orchestration: configs, runs, sweeps, comparisons, persistence.

A run advances the coupled solver between the ticks of a fixed output
clock (t_end split into `output.ticks` intervals, every step clipped so it
lands exactly on the next tick). Series rows and field snapshots are
written at configured tick strides, which keeps the output times of every
run in a viscosity sweep aligned and makes per-cell sample sets across the
sweep well defined.

Persistence is plain text: CSV series with 17-significant-digit floats and
one header row, plus a canonical-JSON summary. Run directories are named
by a hash of the configuration (and, for single runs, the viscosity), so
identical inputs land in identical paths with identical bytes.
"""

from __future__ import annotations

import hashlib
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .core import GasLaw, RigidState, SolverParams
from .coupling import EnergyReport, coupled_step, energy_audit
from .errors import ConfigError, FsilabError, MeasureError
from .fluid import DiscMesh, PistonMesh, StepDiagnostics, disc_state, piston_state
from .geometry import BodyShape, disc, interval, symmetric_difference_volume, \
    symmetry_distance
from .measures import defect_proxy, dissipation_defect, gronwall_fit, \
    measure_from_samples, relative_energy, vanishing_viscosity_terms
from .rigid import Traction
from .transforms import ComposedMap, FlowMap, TransformedStrong, \
    identity_deviation, source_terms

__all__ = [
    "ExperimentConfig",
    "load_config",
    "config_from_dict",
    "config_hash",
    "output_root",
    "run_simulation",
    "run_viscosity_sweep",
    "run_weak_strong",
]

MAX_STEPS = 1_000_000

ENERGY_HEADER = ("t,E_total,E_fluid_kin,E_fluid_press,E_body,"
                 "diss_visc,diss_bdry_wall,diss_bdry_body")
MASS_HEADER = "t,mass_fluid,mass_body,rho_body_min,rho_body_max"


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

# every recognized key; None marks a leaf, a dict a nested block whose
# leaves are validated here, "atom" a block validated by its profile atom
_SCHEMA = {
    "scenario": None,
    "seed": None,
    "epsilon_list": None,
    "domain": {"bounds": None, "sigma": None},
    "body": {"kind": None, "half_length": None, "radius": None, "X0": None,
             "V0": None, "omega0": None, "rho_body": None},
    "gas": {"gamma": None},
    "solver": {"cfl": None, "dt_max": None, "penalization_kappa": None,
               "n_cells": None, "nx": None, "ny": None, "t_end": None},
    "initial": {"density": "atom", "velocity": "atom"},
    "output": {"directory": None, "ticks": None, "series_stride": None,
               "snapshot_stride": None},
}

# profile atoms: name -> (required params, optional params)
_ATOMS = {
    "constant": ({"value"}, set()),
    "two_level": ({"left", "right", "split"}, set()),
    "gaussian": ({"base", "amp", "center", "width"}, set()),
    "sine": ({"base", "amp", "wavenumber"}, {"phase"}),
}


def _check_keys(block: dict, schema: dict, path: str) -> None:
    for key, val in block.items():
        if key not in schema:
            raise ConfigError(f"unknown config key {path}{key}")
        sub = schema[key]
        if isinstance(sub, dict):
            if not isinstance(val, dict):
                raise ConfigError(f"config key {path}{key} must be a table")
            _check_keys(val, sub, f"{path}{key}.")


def _check_atom(spec: dict, path: str) -> None:
    name = spec.get("atom")
    if name not in _ATOMS:
        raise ConfigError(f"{path}: unknown profile atom {name!r} "
                          f"(have {sorted(_ATOMS)})")
    required, optional = _ATOMS[name]
    given = set(spec) - {"atom"}
    if given - required - optional:
        raise ConfigError(f"{path}: unknown parameters "
                          f"{sorted(given - required - optional)} for atom {name!r}")
    if required - given:
        raise ConfigError(f"{path}: atom {name!r} missing parameters "
                          f"{sorted(required - given)}")


def build_profile(spec: dict, dim: int, vector: bool = False):
    """Callable field from a named-atom description.

    Scalar atoms map points to (n,); with vector=True the constant atom
    accepts a length-dim list and the result is (n, dim). Points come in
    as (n,) in 1D and (n, 2) in 2D.
    """
    name = spec["atom"]

    def coord(pts):
        pts = np.asarray(pts, dtype=float)
        return pts if pts.ndim == 1 else pts[:, 0]

    if name == "constant":
        value = spec["value"]
        if vector and dim > 1:
            vec = np.asarray(value, dtype=float).reshape(dim)
            return lambda pts: np.tile(vec, (len(np.atleast_2d(pts)), 1))
        return lambda pts: np.full(len(np.atleast_1d(coord(pts))), float(value))
    if name == "two_level":
        lo, hi, split = (float(spec[k]) for k in ("left", "right", "split"))
        return lambda pts: np.where(coord(pts) < split, lo, hi)
    if name == "gaussian":
        base, amp, width = (float(spec[k]) for k in ("base", "amp", "width"))
        center = np.atleast_1d(np.asarray(spec["center"], dtype=float))

        def gauss(pts):
            pts = np.asarray(pts, dtype=float)
            pts2 = pts[:, None] if pts.ndim == 1 else pts
            r2 = np.sum((pts2 - center) ** 2, axis=1)
            return base + amp * np.exp(-r2 / width ** 2)

        return gauss
    # sine
    base, amp, k = (float(spec[q]) for q in ("base", "amp", "wavenumber"))
    phase = float(spec.get("phase", 0.0))
    return lambda pts: base + amp * np.sin(k * coord(pts) + phase)


@dataclass
class ExperimentConfig:
    """Parsed experiment description plus the raw table it came from."""

    scenario: str
    seed: int
    epsilon_list: list
    bounds: tuple
    sigma: float
    body: dict
    gamma: float
    solver: dict
    initial: dict
    output: dict
    raw: dict = field(repr=False, default_factory=dict)

    @property
    def t_end(self) -> float:
        return float(self.solver["t_end"])

    @property
    def ticks(self) -> int:
        return int(self.output["ticks"])

    def tick_time(self, k: int) -> float:
        return k * self.t_end / self.ticks


def config_from_dict(raw: dict) -> ExperimentConfig:
    """Validate a raw config table and resolve the derived quantities."""
    _check_keys(raw, _SCHEMA, "")
    for part in ("scenario", "domain", "body", "gas", "solver", "initial",
                 "output", "epsilon_list"):
        if part not in raw:
            raise ConfigError(f"config is missing the {part!r} entry")

    scenario = raw["scenario"]
    if scenario not in ("piston1d", "disc2d"):
        raise ConfigError(f"unknown scenario {scenario!r}")
    dim = 1 if scenario == "piston1d" else 2

    bounds = tuple(tuple(float(v) for v in side) for side in raw["domain"]["bounds"])
    if len(bounds) != dim or any(hi <= lo for lo, hi in bounds):
        raise ConfigError(f"domain.bounds must be {dim} ordered [lo, hi] pairs")
    sigma = float(raw["domain"]["sigma"])
    if sigma <= 0.0:
        raise ConfigError("domain.sigma must be positive")

    body = dict(raw["body"])
    kind = body.get("kind")
    if scenario == "piston1d" and kind != "interval":
        raise ConfigError("piston1d needs body.kind = 'interval'")
    if scenario == "disc2d" and kind != "disc":
        raise ConfigError("disc2d needs body.kind = 'disc'")
    X0 = np.asarray(body.get("X0"), dtype=float).reshape(-1)
    if X0.shape != (dim,):
        raise ConfigError(f"body.X0 must have {dim} entries")
    V0 = np.asarray(body.get("V0", [0.0] * dim), dtype=float).reshape(-1)
    if V0.shape != (dim,):
        raise ConfigError(f"body.V0 must have {dim} entries")
    if float(body.get("rho_body", 0.0)) <= 0.0:
        raise ConfigError("body.rho_body must be positive")

    shape = _make_shape(scenario, body)
    gap = _wall_distance(bounds, X0, shape.circumradius)
    if not gap > 2.0 * sigma:
        raise ConfigError(f"body must start farther than 2 sigma from the "
                          f"walls (distance {gap:.4g}, sigma {sigma:.4g})")

    eps = [float(e) for e in raw["epsilon_list"]]
    if not eps:
        raise ConfigError("epsilon_list must not be empty")
    positive = eps[:-1] if eps[-1] == 0.0 else eps
    if any(e <= 0.0 for e in positive):
        raise ConfigError("viscosities must be positive (0 only as the "
                          "final inviscid entry)")
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise ConfigError("epsilon_list must be strictly decreasing")

    gamma = float(raw["gas"]["gamma"])
    if gamma <= 1.0:
        raise ConfigError("gas.gamma must exceed 1")

    solver = dict(raw["solver"])
    if float(solver.get("t_end", 0.0)) <= 0.0:
        raise ConfigError("solver.t_end must be positive")
    if scenario == "piston1d":
        if int(solver.get("n_cells", 0)) < 4:
            raise ConfigError("solver.n_cells must be at least 4")
    else:
        if int(solver.get("nx", 0)) < 8 or int(solver.get("ny", 0)) < 8:
            raise ConfigError("solver.nx and solver.ny must be at least 8")

    initial = raw["initial"]
    _check_atom(initial["density"], "initial.density")
    _check_atom(initial["velocity"], "initial.velocity")

    output = {"directory": "runs", "ticks": 100, "series_stride": 1,
              "snapshot_stride": 10}
    output.update(raw["output"])
    for key in ("ticks", "series_stride", "snapshot_stride"):
        if int(output[key]) < 1:
            raise ConfigError(f"output.{key} must be a positive integer")

    return ExperimentConfig(scenario=scenario, seed=int(raw.get("seed", 0)),
                            epsilon_list=eps, bounds=bounds, sigma=sigma,
                            body=body, gamma=gamma, solver=solver,
                            initial=initial, output=output, raw=raw)


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid TOML: {exc}") from exc
    return config_from_dict(raw)


def _make_shape(scenario: str, body: dict) -> BodyShape:
    if scenario == "piston1d":
        return interval(float(body["half_length"]))
    return disc(float(body["radius"]))


def _wall_distance(bounds, X0, circumradius: float) -> float:
    gaps = [min(X0[k] - lo, hi - X0[k]) - circumradius
            for k, (lo, hi) in enumerate(bounds)]
    return float(min(gaps))


def config_hash(raw: dict, **extra) -> str:
    """First 12 hex digits of the canonical-JSON digest of config + extras."""
    blob = json.dumps({"config": raw, **extra}, sort_keys=True,
                      separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def output_root(root=None) -> Path:
    if root is not None:
        return Path(root)
    return Path(os.environ.get("FSILAB_OUTPUT_ROOT", "."))


# ---------------------------------------------------------------------------
# single runs
# ---------------------------------------------------------------------------

def _build_problem(cfg: ExperimentConfig, epsilon: float):
    law = GasLaw(cfg.gamma)
    sol = cfg.solver
    params = SolverParams(
        epsilon=float(epsilon),
        cfl=float(sol.get("cfl", 0.4)),
        dt_max=float(sol.get("dt_max", np.inf)),
        penalization_kappa=float(sol.get("penalization_kappa", 0.0)))
    shape = _make_shape(cfg.scenario, cfg.body)
    rho_b = float(cfg.body["rho_body"])
    X0 = np.asarray(cfg.body["X0"], dtype=float)
    V0 = np.asarray(cfg.body.get("V0", [0.0] * len(X0)), dtype=float)
    M = rho_b * shape.measure

    rho_fn = build_profile(cfg.initial["density"], len(X0))
    u_fn = build_profile(cfg.initial["velocity"], len(X0), vector=True)

    if cfg.scenario == "piston1d":
        (lo, hi), = cfg.bounds
        mesh = PistonMesh(lo, hi, shape.half_length,
                          int(sol["n_cells"]), int(sol["n_cells"]), cfg.sigma)
        rb = RigidState(dim=1, X=X0, V=V0, omega=0.0, O=np.eye(1), M=M,
                        J=0.0, rho_body=np.array([rho_b]))
        fluid = piston_state(mesh, rb, rho_fn, u_fn)
        return mesh, shape, rb, fluid, law, params

    (x0, x1), (y0, y1) = cfg.bounds
    mesh = DiscMesh(x0, x1, y0, y1, int(sol["nx"]), int(sol["ny"]), cfg.sigma)
    a = shape.radius
    rb = RigidState(dim=2, X=X0, V=V0, omega=float(cfg.body.get("omega0", 0.0)),
                    O=np.eye(2), M=M, J=0.5 * M * a ** 2,
                    rho_body=np.array([rho_b]))
    fluid = disc_state(mesh, rho_fn, u_fn)
    return (mesh, shape), shape, rb, fluid, law, params


def _write_csv(path: Path, header: str, columns) -> None:
    data = np.column_stack([np.asarray(c, dtype=float) for c in columns])
    np.savetxt(path, data, fmt="%.17g", delimiter=",", header=header,
               comments="")


def _read_csv(path: Path) -> dict:
    with open(path) as fh:
        names = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return {name: data[:, k] for k, name in enumerate(names)}


def _write_snapshot(run_dir: Path, k: int, fluid) -> None:
    u = fluid.mom / np.maximum(fluid.rho, 1e-300)[:, None]
    if fluid.dim == 1:
        _write_csv(run_dir / f"snap_{k:05d}.csv", "x,vol,rho,u",
                   [fluid.cell_centers, fluid.cell_volumes, fluid.rho,
                    u[:, 0]])
    else:
        _write_csv(run_dir / f"snap_{k:05d}.csv", "x,y,vol,rho,ux,uy",
                   [fluid.cell_centers[:, 0], fluid.cell_centers[:, 1],
                    fluid.cell_volumes, fluid.rho, u[:, 0], u[:, 1]])


def _body_columns(report: EnergyReport, forces, torques):
    arr = report.as_arrays()
    dim = arr["X"].shape[1]
    cols = [arr["time"]]
    names = ["t"]
    for label, block in (("X", arr["X"]), ("V", arr["V"])):
        for k in range(dim):
            cols.append(block[:, k])
            names.append(f"{label}{k}")
    cols.append(arr["omega"][:, 0])
    names.append("omega")
    fr = np.asarray(forces, dtype=float)
    for k in range(dim):
        cols.append(fr[:, k])
        names.append(f"force{k}")
    cols.append(np.asarray(torques, dtype=float))
    names.append("torque")
    return ",".join(names), cols


def run_simulation(config: ExperimentConfig, epsilon: float,
                   out_dir=None, root=None) -> Path:
    """Advance one run to t_end and persist its series, snapshots, summary.

    The output directory defaults to `<root>/<output.directory>/run-<hash>`
    where the hash covers the config and the viscosity. Solver and geometry
    failures leave an error.json record behind and propagate.
    """
    if out_dir is None:
        base = output_root(root) / config.output["directory"]
        out_dir = base / f"run-{config_hash(config.raw, epsilon=epsilon)}"
    run_dir = Path(out_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    try:
        return _run_into(config, float(epsilon), run_dir)
    except FsilabError as exc:
        record = {"error": type(exc).__name__, "message": str(exc),
                  "epsilon": float(epsilon)}
        (run_dir / "error.json").write_text(json.dumps(record, sort_keys=True,
                                                       indent=2) + "\n")
        raise


def _run_into(config: ExperimentConfig, epsilon: float, run_dir: Path) -> Path:
    domain, shape, rb, fluid, law, params = _build_problem(config, epsilon)
    out = config.output
    ticks, t_end = config.ticks, config.t_end

    report = EnergyReport()
    report.append_state(fluid, rb, law)
    forces = [np.zeros(rb.dim)]
    torques = [0.0]
    series_ticks = [0]
    snapshots = [{"tick": 0, "t": 0.0, "X": rb.X.tolist()}]
    _write_snapshot(run_dir, 0, fluid)

    tallies = {"stress_sq": 0.0, "wall_slip_sq": 0.0, "body_slip_sq": 0.0}
    acc = np.zeros(3)  # dissipation accumulated since the last series row
    trac = Traction.zero(rb.dim)
    rho_min = float(np.min(fluid.rho))
    n_steps = 0

    for k in range(1, ticks + 1):
        t_next = config.tick_time(k)
        while fluid.time < t_next - 1e-12 * t_end:
            step_params = SolverParams(
                epsilon=params.epsilon, cfl=params.cfl,
                dt_max=min(params.dt_max, t_next - fluid.time),
                penalization_kappa=params.penalization_kappa)
            fluid, rb, trac, diag = coupled_step(fluid, rb, domain,
                                                 step_params, law)
            acc += (diag.diss_visc, diag.diss_wall, diag.diss_body)
            tallies["stress_sq"] += diag.stress_sq
            tallies["wall_slip_sq"] += diag.wall_slip_sq
            tallies["body_slip_sq"] += diag.body_slip_sq
            n_steps += 1
            if n_steps > MAX_STEPS:
                raise MeasureError("step budget exceeded before t_end")
        rho_min = min(rho_min, float(np.min(fluid.rho)))
        if k % int(out["series_stride"]) == 0 or k == ticks:
            report.append_state(fluid, rb, law,
                                StepDiagnostics(dt=0.0, diss_visc=acc[0],
                                                diss_wall=acc[1],
                                                diss_body=acc[2]))
            acc[:] = 0.0
            forces.append(np.atleast_1d(trac.force).copy())
            torques.append(float(np.atleast_1d(trac.torque)[0])
                           if rb.dim > 1 else 0.0)
            series_ticks.append(k)
        if k % int(out["snapshot_stride"]) == 0 or k == ticks:
            _write_snapshot(run_dir, k, fluid)
            snapshots.append({"tick": k, "t": float(fluid.time),
                              "X": rb.X.tolist()})

    arr = report.as_arrays()
    _write_csv(run_dir / "energy.csv", ENERGY_HEADER,
               [arr["time"], arr["E_total"], arr["E_fluid_kin"],
                arr["E_fluid_press"], arr["E_body"], arr["diss_visc"],
                arr["diss_bdry_wall"], arr["diss_bdry_body"]])
    header, cols = _body_columns(report, forces, torques)
    _write_csv(run_dir / "body.csv", header, cols)
    rb_min = float(np.min(rb.rho_body))
    rb_max = float(np.max(rb.rho_body))
    n_rows = len(arr["time"])
    _write_csv(run_dir / "mass.csv", MASS_HEADER,
               [arr["time"], arr["mass_fluid"], arr["mass_body"],
                np.full(n_rows, rb_min), np.full(n_rows, rb_max)])

    audit = energy_audit(report)
    summary = {
        "scenario": config.scenario,
        "epsilon": epsilon,
        "seed": config.seed,
        "n_steps": n_steps,
        "t_final": float(fluid.time),
        "rho_min": rho_min,
        "final": {
            "E_total": arr["E_total"][-1],
            "E_fluid_kin": arr["E_fluid_kin"][-1],
            "E_fluid_press": arr["E_fluid_press"][-1],
            "E_body": arr["E_body"][-1],
            "mass_fluid": arr["mass_fluid"][-1],
            "X": rb.X.tolist(),
            "V": rb.V.tolist(),
        },
        "audit": {
            "energy_violation": audit.max_violation,
            "tolerance": audit.tolerance,
            "passed": audit.passed,
        },
        "tallies": tallies,
        "series_ticks": series_ticks,
        "snapshots": snapshots,
        "rho_body_min": rb_min,
        "rho_body_max": rb_max,
        "config": config.raw,
    }
    (run_dir / "summary.json").write_text(
        json.dumps(summary, sort_keys=True, indent=2) + "\n")
    return run_dir


# ---------------------------------------------------------------------------
# viscosity sweeps
# ---------------------------------------------------------------------------

def _sweep_worker(raw: dict, epsilon: float, out_dir: str):
    cfg = config_from_dict(raw)
    try:
        run_simulation(cfg, epsilon, out_dir=out_dir)
        return epsilon, ""
    except FsilabError as exc:
        return epsilon, f"{type(exc).__name__}: {exc}"


def _probe_grid(cfg: ExperimentConfig, snapshots_by_run, tick_index,
                n_probe=256):
    """Fixed fluid probe lattice shared by all runs at one output time.

    Uniform cell centers over the channel, dropping every point that lies
    inside or within two probe spacings of any run's body at that time.
    """
    (lo, hi), = cfg.bounds
    dx = (hi - lo) / n_probe
    pts = lo + (np.arange(n_probe) + 0.5) * dx
    keep = np.ones(n_probe, dtype=bool)
    h = float(cfg.body["half_length"])
    for snaps in snapshots_by_run:
        X = snaps[tick_index]["X"][0]
        keep &= np.abs(pts - X) > h + 2.0 * dx
    return pts[keep], np.full(np.count_nonzero(keep), dx)


def _sample_run(snap: dict, pts):
    """Piecewise-constant cell lookup of a 1D snapshot at probe points."""
    x, vol = snap["x"], snap["vol"]
    edges = np.concatenate([[x[0] - 0.5 * vol[0]], x + 0.5 * vol])
    idx = np.clip(np.searchsorted(edges, pts) - 1, 0, len(x) - 1)
    return snap["rho"][idx], snap["u"][idx]


def run_viscosity_sweep(config: ExperimentConfig, root=None,
                        parallel: bool = True) -> Path:
    """Run every viscosity level and assemble the cross-level diagnostics.

    Levels run as independent tasks (parallel by default; the sequential
    path produces identical bytes). A failed level marks the sweep partial
    and the measure-level diagnostics are skipped; per-level outputs of the
    successful runs remain usable.
    """
    eps = config.epsilon_list
    if len(eps) < 2:
        raise ConfigError("a viscosity sweep needs at least two levels")
    if config.scenario != "piston1d":
        raise ConfigError("sweep diagnostics are wired for the piston scenario")
    base = output_root(root) / config.output["directory"]
    sweep_dir = base / f"sweep-{config_hash(config.raw, purpose='sweep')}"
    sweep_dir.mkdir(parents=True, exist_ok=True)

    jobs = [(config.raw, e, str(sweep_dir / f"eps{k:02d}"))
            for k, e in enumerate(eps)]
    if parallel and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(len(jobs),
                                                 os.cpu_count() or 1)) as ex:
            results = list(ex.map(_sweep_worker, *zip(*jobs)))
    else:
        results = [_sweep_worker(*job) for job in jobs]

    failed = {e: msg for e, msg in results if msg}
    summary = {"epsilon_list": eps, "partial": bool(failed),
               "failed": {f"{e:g}": m for e, m in failed.items()}}

    if not failed:
        summary.update(_assemble_sweep(config, sweep_dir, eps))
    (sweep_dir / "summary.json").write_text(
        json.dumps(summary, sort_keys=True, indent=2) + "\n")
    return sweep_dir


def _assemble_sweep(cfg: ExperimentConfig, sweep_dir: Path, eps) -> dict:
    law = GasLaw(cfg.gamma)
    runs = []
    for k in range(len(eps)):
        rdir = sweep_dir / f"eps{k:02d}"
        runs.append({"summary": json.loads((rdir / "summary.json").read_text()),
                     "energy": _read_csv(rdir / "energy.csv"),
                     "dir": rdir})
    snap_meta = [r["summary"]["snapshots"] for r in runs]
    snap_ticks = [s["tick"] for s in snap_meta[0]]

    # defect series on the shared probe grid
    times, D, trace = [], [], []
    for j, tick in enumerate(snap_ticks):
        pts, vols = _probe_grid(cfg, snap_meta, j)
        rho_list, u_list, E_levels = [], [], []
        for r in runs:
            snap = _read_csv(r["dir"] / f"snap_{tick:05d}.csv")
            rho, u = _sample_run(snap, pts)
            rho_list.append(rho)
            u_list.append(u)
            E_levels.append(np.sum(vols * (0.5 * rho * u ** 2
                                           + rho ** law.gamma
                                           / (law.gamma - 1.0))))
        m = measure_from_samples(rho_list, u_list, vols)
        rho_bar = np.mean(m.lam1, axis=1)
        mom_bar = np.mean(m.lamp[:, :, 0], axis=1)
        e_bar = np.sum(vols * (0.5 * mom_bar ** 2
                               + rho_bar ** law.gamma / (law.gamma - 1.0)))
        d_t = dissipation_defect(eps, np.array([E_levels]),
                                 np.array([e_bar]))[0]
        px = defect_proxy(m, eps, law)
        times.append(snap_meta[0][j]["t"])
        D.append(d_t)
        trace.append(float(np.sum(vols * np.abs(px.nuM[:, 0, 0]))))
    _write_csv(sweep_dir / "defect.csv", "t,D,nuM_trace",
               [times, D, trace])

    # sqrt-eps boundary series from the per-run dissipation tallies
    tls = [r["summary"]["tallies"] for r in runs]
    q = vanishing_viscosity_terms(
        eps, [t["stress_sq"] for t in tls], [t["wall_slip_sq"] for t in tls],
        [t["body_slip_sq"] for t in tls], 1.0, 1.0, 1.0)
    _write_csv(sweep_dir / "sweep_series.csv", "epsilon,q_stress,q_wall,q_body",
               [eps, q[0], q[1], q[2]])

    # boundary convergence against the extrapolated final pose
    shape = _make_shape(cfg.scenario, cfg.body)
    X_fin = np.array([r["summary"]["final"]["X"] for r in runs])
    e0, e1 = eps[-2], eps[-1]
    X_star = X_fin[-1] + (X_fin[-1] - X_fin[-2]) * e1 / (e0 - e1)
    I = np.eye(shape.dim)
    sym = [symmetric_difference_volume(shape, (X_star, I), (Xe, I))
           for Xe in X_fin]
    sdist = [symmetry_distance(shape, I) for _ in X_fin]
    _write_csv(sweep_dir / "boundary.csv",
               "epsilon,sym_diff_final,symmetry_dist", [eps, sym, sdist])

    return {
        "defect_min": float(np.min(D)),
        "defect_max": float(np.max(D)),
        "q_monotone": {
            "stress": bool(np.all(np.diff(q[0]) < 0.0)),
            "wall": bool(np.all(np.diff(q[1]) <= 0.0)),
            "body": bool(np.all(np.diff(q[2]) <= 0.0)),
        },
        "X_extrapolated": X_star.tolist(),
    }


# ---------------------------------------------------------------------------
# weak-strong comparison
# ---------------------------------------------------------------------------

def _tent_field(body_csv: dict, bounds, half_length: float, sigma: float):
    """Velocity field whose flow carries the initial geometry along a
    recorded piston trajectory: V(t) on the body block, zero at the walls,
    linear ramps between."""
    (lo, hi), = bounds
    ts = body_csv["t"]
    Xs = body_csv["X0"]
    Vs = body_csv["V0"]
    c = half_length + 0.25 * sigma

    def field(t, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        X = np.interp(t, ts, Xs)
        V = np.interp(t, ts, Vs)
        x = pts[:, 0]
        out = np.zeros_like(x)
        left = (x > lo) & (x < X - c)
        right = (x > X + c) & (x < hi)
        mid = (x >= X - c) & (x <= X + c)
        out[left] = V * (x[left] - lo) / (X - c - lo)
        out[right] = V * (hi - x[right]) / (hi - X - c)
        out[mid] = V
        return out[:, None]

    return field


def _region_interp(snap: dict, X: float, pts):
    """Linear interpolation of a piston snapshot, one gas column at a time."""
    x = snap["x"]
    rho = np.empty_like(pts)
    u = np.empty_like(pts)
    for pmask, smask in ((pts < X, x < X), (pts >= X, x >= X)):
        if not np.any(pmask):
            continue
        rho[pmask] = np.interp(pts[pmask], x[smask], snap["rho"][smask])
        u[pmask] = np.interp(pts[pmask], x[smask], snap["u"][smask])
    return rho, u


def run_weak_strong(config_weak: ExperimentConfig,
                    config_strong: ExperimentConfig, root=None) -> Path:
    """Run the pair, align geometries by flow maps, fit the growth envelope.

    The weak run uses its smallest viscosity; the strong reference must be
    inviscid (epsilon_list exactly [0.0]), at least four times finer, and
    share the output clock. Distance-to-strong series land in relent.csv;
    the envelope fit, map identity deviation, and pull-back source-term
    sups land in summary.json.
    """
    w, s = config_weak, config_strong
    if w.scenario != s.scenario:
        raise ConfigError("weak and strong configs must share the scenario")
    if w.scenario != "piston1d":
        raise ConfigError("weak-strong comparison is wired for the piston "
                          "scenario")
    if s.epsilon_list != [0.0]:
        raise ConfigError("the strong reference must have epsilon_list = [0.0]")
    if int(s.solver["n_cells"]) < 4 * int(w.solver["n_cells"]):
        raise ConfigError("strong resolution must be at least 4x the weak run")
    if s.t_end != w.t_end or s.ticks != w.ticks \
            or s.output["snapshot_stride"] != w.output["snapshot_stride"]:
        raise ConfigError("the two runs must share t_end and the output clock")

    base = output_root(root) / w.output["directory"]
    ws_dir = base / f"ws-{config_hash(w.raw, strong=s.raw, purpose='ws')}"
    ws_dir.mkdir(parents=True, exist_ok=True)
    eps_w = w.epsilon_list[-1]
    run_simulation(w, eps_w, out_dir=ws_dir / "weak")
    run_simulation(s, 0.0, out_dir=ws_dir / "strong")

    sum_w = json.loads((ws_dir / "weak" / "summary.json").read_text())
    sum_s = json.loads((ws_dir / "strong" / "summary.json").read_text())
    if sum_s["rho_min"] <= 0.0:
        raise MeasureError("strong reference reached vacuum; the comparison "
                           "needs a positive density floor")

    body_w = _read_csv(ws_dir / "weak" / "body.csv")
    body_s = _read_csv(ws_dir / "strong" / "body.csv")
    h = float(w.body["half_length"])
    law = GasLaw(w.gamma)
    field_w = _tent_field(body_w, w.bounds, h, w.sigma)
    field_s = _tent_field(body_s, s.bounds, h, s.sigma)

    M = float(w.body["rho_body"]) * 2.0 * h
    times, measures_list, R_fields, U_fields, body_terms = [], [], [], [], []
    id_dev = 0.0
    snaps_w = sum_w["snapshots"]
    snaps_s = {m["tick"]: m for m in sum_s["snapshots"]}
    for meta in snaps_w:
        tick, t = meta["tick"], meta["t"]
        snap_w = _read_csv(ws_dir / "weak" / f"snap_{tick:05d}.csv")
        snap_s = _read_csv(ws_dir / "strong" / f"snap_{tick:05d}.csv")
        Zw = FlowMap(field_w, w.bounds, t=t)
        Zs = FlowMap(field_s, s.bounds, t=t)
        map2 = ComposedMap(Zs, Zw, t)
        xc = snap_w["x"][:, None]
        y = map2.evaluate(xc)[:, 0]
        J = map2.jacobian(xc)[:, 0, 0]
        R, u_s = _region_interp(snap_s, snaps_s[tick]["X"][0], y)
        U = u_s / J
        id_dev = max(id_dev, float(np.max(np.abs(y - xc[:, 0]))))

        measures_list.append(measure_from_samples([snap_w["rho"]],
                                                  [snap_w["u"]],
                                                  snap_w["vol"]))
        times.append(t)
        R_fields.append(R)
        U_fields.append(U)
        V_w = np.interp(t, body_w["t"], body_w["V0"])
        V_s = np.interp(t, body_s["t"], body_s["V0"])
        body_terms.append((np.array([M]), np.array([1.0]),
                           np.array([V_w]), np.array([V_s])))

    if any(np.min(R) <= 0.0 for R in R_fields):
        raise MeasureError("transformed strong density lost positivity")
    rel = relative_energy(times, measures_list, R_fields, U_fields, law,
                          body_terms=body_terms)
    _write_csv(ws_dir / "relent.csv", "t,E_kin,E_press,E_rigid,E_total",
               [rel.times, rel.kinetic, rel.pressure, rel.rigid, rel.total])
    fit = gronwall_fit(rel.times, rel.total)

    # source terms of the pull-back at the final time, on interior probes
    t_fin = times[-1]
    Zw = FlowMap(field_w, w.bounds, t=t_fin)
    Zs = FlowMap(field_s, s.bounds, t=t_fin)
    map1, map2 = ComposedMap(Zw, Zs, t_fin), ComposedMap(Zs, Zw, t_fin)
    snap_s = _read_csv(ws_dir / "strong" / f"snap_{snaps_w[-1]['tick']:05d}.csv")
    X_s_fin = snaps_s[snaps_w[-1]["tick"]]["X"][0]

    def R_fn(pts):
        return _region_interp(snap_s, X_s_fin, map2.evaluate(pts)[:, 0])[0]

    def U_fn(pts):
        y = map2.evaluate(pts)
        J = map2.jacobian(pts)[:, 0, 0]
        return (_region_interp(snap_s, X_s_fin, y[:, 0])[1] / J)[:, None]

    def P_fn(pts):
        return R_fn(pts) ** law.gamma

    V_s_fin = np.interp(t_fin, body_s["t"], body_s["V0"])
    ts_obj = TransformedStrong(
        R=R_fn, U=U_fn, P=P_fn, V_t=np.array([V_s_fin]), omega_t=0.0,
        u_B=lambda pts: np.full((len(np.atleast_2d(pts)), 1), V_s_fin),
        rho_B=None, map1=map1, map2=map2,
        X1=np.asarray(snaps_w[-1]["X"], dtype=float))
    H, G = source_terms(ts_obj)
    (lo, hi), = w.bounds
    X_w_fin = snaps_w[-1]["X"][0]
    probes = np.concatenate([
        np.linspace(lo + w.sigma, X_w_fin - h - w.sigma, 5),
        np.linspace(X_w_fin + h + w.sigma, hi - w.sigma, 5)])[:, None]
    sup_H = float(np.max(np.abs(H(probes))))
    sup_G = float(np.max(np.abs(G(probes))))

    summary = {
        "epsilon_weak": eps_w,
        "relative_energy_max": float(np.max(rel.total)),
        "relative_energy_initial": float(rel.total[0]),
        "gronwall": {"C": fit.C, "residual": fit.residual,
                     "violated": fit.violated},
        "map_identity_deviation": id_dev,
        "source_sup": {"H": sup_H, "G": sup_G},
        "weak_config": w.raw,
        "strong_config": s.raw,
    }
    (ws_dir / "summary.json").write_text(
        json.dumps(summary, sort_keys=True, indent=2) + "\n")
    return ws_dir
