"""Parsing and validation of run-directory artifacts.

Every reader checks the file header against the documented schema before
touching the numbers; anything off raises SchemaError. A bundle can be
loaded leniently instead, collecting per-file failures so a report can
list them rather than die on the first bad byte.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

__all__ = [
    "ReportError",
    "SchemaError",
    "Series",
    "SeriesBundle",
    "load_bundle",
    "read_series",
]


class SchemaError(ValueError):
    """A series file does not match its documented schema."""


class ReportError(RuntimeError):
    """A directory lacks the artifacts a report needs."""


class Series(NamedTuple):
    names: list
    data: np.ndarray

    def column(self, name: str) -> np.ndarray:
        return self.data[:, self.names.index(name)]


_FIXED_SCHEMAS = {
    "energy.csv": ["t", "E_total", "E_fluid_kin", "E_fluid_press", "E_body",
                   "diss_visc", "diss_bdry_wall", "diss_bdry_body"],
    "mass.csv": ["t", "mass_fluid", "mass_body", "rho_body_min",
                 "rho_body_max"],
    "defect.csv": ["t", "D", "nuM_trace"],
    "sweep_series.csv": ["epsilon", "q_stress", "q_wall", "q_body"],
    "boundary.csv": ["epsilon", "sym_diff_final", "symmetry_dist"],
    "relent.csv": ["t", "E_kin", "E_press", "E_rigid", "E_total"],
}

_SNAP_SCHEMAS = (["x", "vol", "rho", "u"],
                 ["x", "y", "vol", "rho", "ux", "uy"])

# rigid series grow one block per spatial component
_BODY_PATTERN = re.compile(
    r"t(,X\d+)+(,V\d+)+,omega(,force\d+)+,torque$")


def _expected_body(names: list) -> bool:
    if not _BODY_PATTERN.fullmatch(",".join(names)):
        return False
    dim = sum(1 for n in names if n.startswith("X"))
    blocks = (["t"] + [f"X{k}" for k in range(dim)]
              + [f"V{k}" for k in range(dim)] + ["omega"]
              + [f"force{k}" for k in range(dim)] + ["torque"])
    return names == blocks


def read_series(path) -> Series:
    """Read one CSV artifact, validating its header first."""
    path = Path(path)
    with open(path) as fh:
        names = fh.readline().strip().split(",")

    name = path.name
    if name in _FIXED_SCHEMAS:
        if names != _FIXED_SCHEMAS[name]:
            raise SchemaError(
                f"{path}: header {names} does not match the documented "
                f"schema {_FIXED_SCHEMAS[name]}")
    elif name == "body.csv":
        if not _expected_body(names):
            raise SchemaError(f"{path}: malformed rigid-series header "
                              f"{names}")
    elif name.startswith("snap_"):
        if names not in _SNAP_SCHEMAS:
            raise SchemaError(f"{path}: unknown snapshot header {names}")
    else:
        raise SchemaError(f"{path}: no documented schema for this file")

    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except ValueError as exc:
        raise SchemaError(f"{path}: unparseable numeric data ({exc})")
    if data.size and data.shape[1] != len(names):
        raise SchemaError(f"{path}: {data.shape[1]} columns under a "
                          f"{len(names)}-column header")
    return Series(names, data)


@dataclass
class SeriesBundle:
    """Parsed artifacts of one run directory tree, keyed by run id."""

    kind: str
    root: Path
    runs: dict = field(default_factory=dict)
    summaries: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)
    summary: dict | None = None
    verify_reports: dict = field(default_factory=dict)
    errors: list = field(default_factory=list)

    def __bool__(self) -> bool:
        return bool(self.runs or self.extras or self.verify_reports)


_RUN_FILES = ("energy.csv", "body.csv", "mass.csv")
_TOP_FILES = {"sweep": ("sweep_series.csv", "defect.csv", "boundary.csv"),
              "weak-strong": ("relent.csv",), "run": (), "verify": ()}


def _is_verify_report(blob) -> bool:
    return isinstance(blob, dict) and ("checks" in blob or "batteries" in blob)


def _classify(root: Path) -> str:
    if (root / "weak").is_dir() and (root / "strong").is_dir():
        return "weak-strong"
    if sorted(root.glob("eps[0-9][0-9]")):
        return "sweep"
    if (root / "energy.csv").is_file():
        return "run"
    if any(_is_verify_report(_try_json(p)) for p in root.glob("*.json")):
        return "verify"
    raise ReportError(f"{root}: not a recognizable run, sweep, comparison, "
                      "or verification directory")


def _try_json(path: Path):
    try:
        return json.loads(path.read_text())
    except (OSError, json.JSONDecodeError):
        return None


def _collect(bundle: SeriesBundle, strict: bool, path: Path, exc: Exception):
    if strict:
        raise exc
    bundle.errors.append((str(path.relative_to(bundle.root)), str(exc)))


def _load_run(bundle: SeriesBundle, rid: str, d: Path, strict: bool) -> None:
    series = {}
    for name in _RUN_FILES:
        p = d / name
        if not p.is_file():
            continue
        try:
            series[name[:-4]] = read_series(p)
        except SchemaError as exc:
            _collect(bundle, strict, p, exc)
    for p in sorted(d.glob("snap_*.csv")):
        try:
            series.setdefault("snapshots", []).append((p.name, read_series(p)))
        except SchemaError as exc:
            _collect(bundle, strict, p, exc)
    if series:
        bundle.runs[rid] = series
    summary = _try_json(d / "summary.json")
    if summary is not None:
        bundle.summaries[rid] = summary
    error = _try_json(d / "error.json")
    if error is not None:
        bundle.errors.append((str((d / "error.json").relative_to(bundle.root)),
                              f"{error.get('error', 'failure')}: "
                              f"{error.get('message', '')}"))


def load_bundle(root, strict: bool = True) -> SeriesBundle:
    """Parse a directory produced by the simulation harness.

    With strict=True the first schema violation raises; otherwise every
    failure is recorded in bundle.errors and parsing continues.
    """
    root = Path(root)
    if not root.is_dir():
        raise ReportError(f"{root}: not a directory")
    kind = _classify(root)
    bundle = SeriesBundle(kind=kind, root=root)

    if kind == "run":
        _load_run(bundle, ".", root, strict)
    elif kind == "sweep":
        for d in sorted(root.glob("eps[0-9][0-9]")):
            _load_run(bundle, d.name, root / d.name, strict)
    elif kind == "weak-strong":
        for rid in ("weak", "strong"):
            _load_run(bundle, rid, root / rid, strict)

    for name in _TOP_FILES[kind]:
        p = root / name
        if not p.is_file():
            continue
        try:
            bundle.extras[name[:-4]] = read_series(p)
        except SchemaError as exc:
            _collect(bundle, strict, p, exc)

    bundle.summary = _try_json(root / "summary.json")
    for p in sorted(root.glob("*.json")):
        if p.name in ("summary.json", "error.json"):
            continue
        blob = _try_json(p)
        if _is_verify_report(blob):
            bundle.verify_reports[p.name] = blob
    return bundle
