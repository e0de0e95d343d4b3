"""Schema validation and directory classification."""

import numpy as np
import pytest

from conftest import make_run_dir, write_csv
from fsilab_postproc.io import (
    ReportError,
    SchemaError,
    load_bundle,
    read_series,
)


def test_single_run_bundle_parses(tmp_path):
    make_run_dir(tmp_path / "run")
    bundle = load_bundle(tmp_path / "run")
    assert bundle.kind == "run"
    series = bundle.runs["."]
    assert set(series) == {"energy", "body", "mass", "snapshots"}
    assert series["energy"].column("t")[0] == 0.0
    assert bundle.summaries["."]["scenario"] == "piston1d"
    assert not bundle.errors


def test_energy_header_mismatch_rejected(tmp_path):
    d = make_run_dir(tmp_path / "run")
    p = d / "energy.csv"
    lines = p.read_text().splitlines()
    lines[0] = lines[0].replace("E_total", "energy_total")
    p.write_text("\n".join(lines) + "\n")
    with pytest.raises(SchemaError, match="documented schema"):
        read_series(p)
    with pytest.raises(SchemaError):
        load_bundle(d)


def test_ragged_numeric_rows_rejected(tmp_path):
    d = make_run_dir(tmp_path / "run")
    p = d / "mass.csv"
    with open(p, "a") as fh:
        fh.write("0.2,1.9,1.0\n")
    with pytest.raises(SchemaError, match="unparseable|columns"):
        read_series(p)


def test_undocumented_file_rejected(tmp_path):
    p = tmp_path / "weird.csv"
    p.write_text("a,b\n1,2\n")
    with pytest.raises(SchemaError, match="no documented schema"):
        read_series(p)


def test_rigid_header_pattern_both_dimensions(tmp_path):
    t = np.linspace(0.0, 1.0, 3)
    p = tmp_path / "body.csv"
    write_csv(p, "t,X0,X1,V0,V1,omega,force0,force1,torque",
              [t, t, t, t, t, t, t, t, t])
    assert read_series(p).names[1] == "X0"
    write_csv(p, "t,V0,X0,omega,force0,torque", [t, t, t, t, t, t])
    with pytest.raises(SchemaError, match="rigid-series"):
        read_series(p)


def test_lenient_load_collects_errors_and_keeps_going(tmp_path):
    d = make_run_dir(tmp_path / "run")
    (d / "energy.csv").write_text("garbage\nmore garbage\n")
    bundle = load_bundle(d, strict=False)
    assert bundle.errors and "energy.csv" in bundle.errors[0][0]
    assert "mass" in bundle.runs["."]


def test_weak_strong_classification(ws_dir):
    bundle = load_bundle(ws_dir)
    assert bundle.kind == "weak-strong"
    assert set(bundle.runs) == {"weak", "strong"}
    assert "relent" in bundle.extras
    assert bundle.summary is not None
    assert "gronwall" in bundle.summary
    assert not bundle.errors


def test_sweep_classification(sweep_dir):
    bundle = load_bundle(sweep_dir)
    assert bundle.kind == "sweep"
    assert len(bundle.runs) == 3
    assert {"sweep_series", "defect", "boundary"} <= set(bundle.extras)
    eps = [bundle.summaries[r]["epsilon"] for r in sorted(bundle.runs)]
    assert eps == sorted(eps, reverse=True)


def test_unrecognizable_directory_raises(tmp_path):
    (tmp_path / "notes.txt").write_text("nothing to see\n")
    with pytest.raises(ReportError, match="not a recognizable"):
        load_bundle(tmp_path)
