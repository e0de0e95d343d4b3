"""Fixtures: synthetic run directories plus real ones from the fsilab CLI.

The real directories come from running the simulation package as a
subprocess, which is the same interface end users feed to fsi-plot and
fsi-report. Synthetic directories give the schema tests full control
over every byte.
"""

import json
import os
import subprocess
import sys
import textwrap
from pathlib import Path

import numpy as np
import pytest


def write_csv(path: Path, header: str, columns) -> None:
    data = np.column_stack([np.asarray(c, dtype=float) for c in columns])
    np.savetxt(path, data, fmt="%.17g", delimiter=",", header=header,
               comments="")


def make_run_dir(d: Path, epsilon: float = 0.05) -> Path:
    """A minimal, schema-correct single-run directory."""
    d.mkdir(parents=True, exist_ok=True)
    t = np.linspace(0.0, 0.1, 6)
    E = 1.0 - 0.02 * t
    kin = 0.4 * E
    press = 0.6 * E
    zero = np.zeros_like(t)
    diss = 1e-4 * t
    write_csv(d / "energy.csv",
              "t,E_total,E_fluid_kin,E_fluid_press,E_body,"
              "diss_visc,diss_bdry_wall,diss_bdry_body",
              [t, E, kin, press, zero, diss, 0.5 * diss, 0.1 * diss])
    write_csv(d / "body.csv", "t,X0,V0,omega,force0,torque",
              [t, 1.0 + 0.01 * t, np.full_like(t, 0.01), zero,
               np.full_like(t, -0.2), zero])
    write_csv(d / "mass.csv", "t,mass_fluid,mass_body,rho_body_min,"
                              "rho_body_max",
              [t, np.full_like(t, 1.9), np.full_like(t, 1.0),
               np.full_like(t, 10.0), np.full_like(t, 10.0)])
    x = np.linspace(0.0, 1.0, 8)
    write_csv(d / "snap_00000.csv", "x,vol,rho,u",
              [x, np.full_like(x, 0.125), np.ones_like(x), 0.1 * x])
    summary = {
        "scenario": "piston1d",
        "epsilon": epsilon,
        "seed": 0,
        "n_steps": 5,
        "t_final": 0.1,
        "audit": {"energy_violation": 0.0, "tolerance": 1e-3,
                  "passed": True},
        "final": {"E_total": float(E[-1])},
        "config": {"scenario": "piston1d", "gas": {"gamma": 1.4}},
    }
    (d / "summary.json").write_text(json.dumps(summary, sort_keys=True,
                                               indent=2))
    return d


_WEAK_TOML = textwrap.dedent("""\
    scenario = "piston1d"
    seed = 0
    epsilon_list = [5e-2]

    [domain]
    bounds = [[0.0, 2.0]]
    sigma = 0.05

    [body]
    kind = "interval"
    half_length = 0.05
    X0 = [1.0]
    V0 = [0.0]
    rho_body = 10.0

    [gas]
    gamma = 1.4

    [solver]
    cfl = 0.4
    n_cells = 24
    t_end = 0.06

    [initial.density]
    atom = "gaussian"
    base = 1.0
    amp = 0.05
    center = 0.45
    width = 0.12

    [initial.velocity]
    atom = "gaussian"
    base = 0.0
    amp = 1e-3
    center = 0.45
    width = 0.12

    [output]
    directory = "runs"
    ticks = 6
    series_stride = 1
    snapshot_stride = 3
    """)

_STRONG_TOML = _WEAK_TOML.replace(
    "epsilon_list = [5e-2]", "epsilon_list = [0.0]").replace(
    "n_cells = 24", "n_cells = 96").replace(
    textwrap.dedent("""\
    [initial.velocity]
    atom = "gaussian"
    base = 0.0
    amp = 1e-3
    center = 0.45
    width = 0.12
    """),
    textwrap.dedent("""\
    [initial.velocity]
    atom = "constant"
    value = 0.0
    """))

_SWEEP_TOML = _WEAK_TOML.replace(
    "epsilon_list = [5e-2]", "epsilon_list = [1e-1, 1e-2, 1e-3]").replace(
    "t_end = 0.06", "t_end = 0.05").replace(
    "ticks = 6", "ticks = 5")


def _run_cli(args, root: Path) -> dict:
    env = dict(os.environ, FSILAB_OUTPUT_ROOT=str(root))
    res = subprocess.run([sys.executable, "-m", "fsilab.cli", *args],
                         capture_output=True, text=True, env=env,
                         cwd=root)
    if res.returncode != 0:
        pytest.fail(f"fsilab {' '.join(args)} failed "
                    f"(rc={res.returncode}): {res.stderr}")
    return json.loads(res.stdout)


@pytest.fixture(scope="session")
def ws_dir(tmp_path_factory) -> Path:
    """A completed weak-strong comparison directory from the fsilab CLI."""
    root = tmp_path_factory.mktemp("ws")
    weak = root / "weak.toml"
    strong = root / "strong.toml"
    weak.write_text(_WEAK_TOML)
    strong.write_text(_STRONG_TOML)
    record = _run_cli(["weak-strong", str(weak), str(strong)], root)
    return Path(record["dir"])


@pytest.fixture(scope="session")
def sweep_dir(tmp_path_factory) -> Path:
    """A completed three-level viscosity sweep from the fsilab CLI."""
    root = tmp_path_factory.mktemp("sweep")
    cfg = root / "sweep.toml"
    cfg.write_text(_SWEEP_TOML)
    record = _run_cli(["sweep", str(cfg), "--sequential"], root)
    return Path(record["sweep_dir"])
