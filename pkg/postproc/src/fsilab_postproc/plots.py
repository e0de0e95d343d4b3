"""Deterministic figures from parsed run bundles.

All figures use one fixed size and resolution and carry no timestamps,
so regenerating from identical inputs reproduces identical bytes. A kind
that does not apply to the given bundle yields no files.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib
import numpy as np

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .io import SeriesBundle

__all__ = ["KINDS", "plot_series"]

KINDS = ("energy", "rigid", "defect", "relent", "sweep")

_FIGSIZE = (6.4, 4.0)
_DPI = 130


def _fig():
    return plt.subplots(figsize=_FIGSIZE, dpi=_DPI)


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def _run_tag(rid: str) -> str:
    return "run" if rid == "." else rid


def _ordered_runs(bundle: SeriesBundle) -> list:
    """Run ids with their viscosity, largest epsilon first."""
    def key(rid):
        eps = bundle.summaries.get(rid, {}).get("epsilon")
        return (0, -eps) if eps is not None else (1, rid)

    out = []
    for rid in sorted(bundle.runs, key=key):
        out.append((rid, bundle.summaries.get(rid, {}).get("epsilon")))
    return out


def _label(bundle: SeriesBundle, rid: str, eps) -> str:
    if bundle.kind == "weak-strong":
        return rid if eps is None else f"{rid} (eps={eps:g})"
    return _run_tag(rid) if eps is None else f"eps={eps:g}"


def _plot_energy(bundle: SeriesBundle, out_dir: Path) -> list:
    runs = [(rid, eps) for rid, eps in _ordered_runs(bundle)
            if "energy" in bundle.runs[rid]]
    if not runs:
        return []
    fig, ax = _fig()
    e0 = None
    for rid, eps in runs:
        s = bundle.runs[rid]["energy"]
        t, E = s.column("t"), s.column("E_total")
        ax.plot(t, E, label=_label(bundle, rid, eps))
        if len(runs) == 1:
            budget = E + (s.column("diss_visc") + s.column("diss_bdry_wall")
                          + s.column("diss_bdry_body"))
            ax.plot(t, budget, linestyle=":", label="E + dissipation")
        if e0 is None and len(E):
            e0 = E[0]
    if e0 is not None:
        ax.axhline(e0, color="k", linestyle="--", linewidth=0.8,
                   label="E(0)")
    ax.set_xlabel("t")
    ax.set_ylabel("energy")
    ax.legend()
    return [_save(fig, out_dir / "energy.png")]


def _plot_rigid(bundle: SeriesBundle, out_dir: Path) -> list:
    paths = []
    for rid, _ in _ordered_runs(bundle):
        if "body" not in bundle.runs[rid]:
            continue
        s = bundle.runs[rid]["body"]
        t = s.column("t")
        fig, ax = _fig()
        for name in s.names[1:]:
            if name.startswith(("X", "V")) or name == "omega":
                ax.plot(t, s.column(name), label=name)
        ax.set_xlabel("t")
        ax.set_ylabel("body state")
        ax.legend()
        paths.append(_save(fig, out_dir / f"rigid_{_run_tag(rid)}.png"))
    return paths


def _plot_defect(bundle: SeriesBundle, out_dir: Path) -> list:
    if "defect" not in bundle.extras:
        return []
    s = bundle.extras["defect"]
    fig, ax = _fig()
    ax.plot(s.column("t"), s.column("D"), label="D")
    ax.plot(s.column("t"), s.column("nuM_trace"), linestyle="--",
            label="nuM trace")
    ax.set_xlabel("t")
    ax.set_ylabel("dissipation defect")
    ax.legend()
    return [_save(fig, out_dir / "defect.png")]


def _plot_relent(bundle: SeriesBundle, out_dir: Path) -> list:
    if "relent" not in bundle.extras:
        return []
    s = bundle.extras["relent"]
    t, E = s.column("t"), s.column("E_total")
    fig, ax = _fig()
    ax.plot(t, E, label="E_rel")
    summary = bundle.summary or {}
    fit = summary.get("gronwall", {})
    e0 = summary.get("relative_energy_initial")
    if fit.get("C") is not None and e0:
        envelope = e0 * np.exp(fit["C"] * t * (1.0 + 0.5 * t))
        ax.plot(t, envelope, linestyle="--",
                label=f"envelope (C={fit['C']:.3g})")
    ax.set_xlabel("t")
    ax.set_ylabel("relative energy")
    ax.legend()
    return [_save(fig, out_dir / "relent.png")]


def _plot_sweep(bundle: SeriesBundle, out_dir: Path) -> list:
    if "sweep_series" not in bundle.extras:
        return []
    s = bundle.extras["sweep_series"]
    eps = s.column("epsilon")
    fig, ax = _fig()
    for name in ("q_stress", "q_wall", "q_body"):
        q = s.column(name)
        keep = (eps > 0.0) & (q > 0.0)
        ax.loglog(eps[keep], q[keep], marker="o", label=name)
    ax.set_xlabel("epsilon")
    ax.set_ylabel("scaled dissipation")
    ax.legend()
    return [_save(fig, out_dir / "sweep.png")]


_PLOTTERS = {
    "energy": _plot_energy,
    "rigid": _plot_rigid,
    "defect": _plot_defect,
    "relent": _plot_relent,
    "sweep": _plot_sweep,
}


def plot_series(bundle: SeriesBundle, kind: str, out_dir) -> list:
    """Render one figure kind into out_dir, returning the written paths."""
    if kind not in KINDS:
        raise ValueError(f"unknown plot kind {kind!r}; choose from {KINDS}")
    if not bundle:
        raise ValueError("bundle holds no series")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    return _PLOTTERS[kind](bundle, out_dir)
