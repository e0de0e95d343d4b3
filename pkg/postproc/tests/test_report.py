"""Report rendering: section coverage, robustness, read-only inputs."""

import hashlib
import json
import shutil

import pytest

from fsilab_postproc.io import ReportError
from fsilab_postproc.report import render_report


def _tree_digest(root):
    h = hashlib.sha256()
    for p in sorted(root.rglob("*")):
        if p.is_file():
            h.update(str(p.relative_to(root)).encode())
            h.update(p.read_bytes())
    return h.hexdigest()


def test_full_weak_strong_report(ws_dir, tmp_path):
    out = render_report(ws_dir, tmp_path / "report.html")
    doc = out.read_text()
    for heading in ("Summary", "Figures", "Configuration"):
        assert f"<h2>{heading}</h2>" in doc
    # energy overlay, one rigid figure per run, relative energy
    assert doc.count("<img") >= 4
    assert "<h3>weak</h3>" in doc and "<h3>strong</h3>" in doc
    assert "gronwall" in doc
    assert "Errors" not in doc


def test_rendering_leaves_input_bytes_untouched(ws_dir, tmp_path):
    before = _tree_digest(ws_dir)
    render_report(ws_dir, tmp_path / "report.html")
    assert _tree_digest(ws_dir) == before


def test_corrupted_csv_listed_under_errors_not_fatal(ws_dir, tmp_path):
    broken = tmp_path / "broken"
    shutil.copytree(ws_dir, broken)
    (broken / "relent.csv").write_text("t,E_kin\nnot,numbers\n")
    out = render_report(broken, tmp_path / "report.html")
    doc = out.read_text()
    assert "<h2>Errors</h2>" in doc
    assert "relent.csv" in doc
    assert "<h2>Figures</h2>" in doc


def test_verify_only_directory_tables_without_figures(tmp_path):
    d = tmp_path / "checks"
    d.mkdir()
    report = {
        "battery": "geometry",
        "passed": True,
        "checks": [
            {"name": "tubular_roundtrip", "value": 1.2e-12,
             "tolerance": 1e-10, "op": "<=", "passed": True},
        ],
    }
    (d / "verify.json").write_text(json.dumps(report))
    out = render_report(d, tmp_path / "report.html")
    doc = out.read_text()
    assert "<h2>Verification</h2>" in doc
    assert "tubular_roundtrip" in doc
    assert "<img" not in doc


def test_directory_without_artifacts_raises(tmp_path):
    (tmp_path / "notes.txt").write_text("empty\n")
    with pytest.raises(ReportError):
        render_report(tmp_path, tmp_path / "report.html")


def test_report_deterministic_across_invocations(ws_dir, tmp_path):
    a = render_report(ws_dir, tmp_path / "a.html").read_bytes()
    b = render_report(ws_dir, tmp_path / "b.html").read_bytes()
    assert a == b
