"""Single-file HTML reports for run directories.

The report embeds every applicable figure as inline PNG data, tabulates
summaries and verification results, echoes the configs, and lists files
it could not parse instead of failing on them. Output goes wherever the
caller points it; the input directory is never written to.
"""

from __future__ import annotations

import base64
import html
import json
import tempfile
from pathlib import Path

from .io import ReportError, SeriesBundle, load_bundle
from .plots import KINDS, plot_series

__all__ = ["render_report"]

_STYLE = """
body { font-family: sans-serif; margin: 2em auto; max-width: 60em; }
table { border-collapse: collapse; margin: 0.5em 0; }
td, th { border: 1px solid #999; padding: 0.2em 0.6em; text-align: left; }
th { background: #eee; }
img { max-width: 100%; }
pre { background: #f6f6f6; padding: 0.6em; overflow-x: auto; }
.fail { color: #a00; font-weight: bold; }
.ok { color: #070; }
"""


def _esc(x) -> str:
    return html.escape(str(x))


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.8g}"
    return str(x)


def _table(headers, rows) -> str:
    head = "".join(f"<th>{_esc(h)}</th>" for h in headers)
    body = "".join(
        "<tr>" + "".join(f"<td>{cell}</td>" for cell in row) + "</tr>"
        for row in rows)
    return f"<table><tr>{head}</tr>{body}</table>"


def _scalar_rows(d: dict) -> list:
    rows = []
    for key in sorted(d):
        val = d[key]
        if isinstance(val, (int, float, str, bool)) or val is None:
            rows.append((_esc(key), _esc(_fmt(val))))
    return rows


def _pass_cell(ok: bool) -> str:
    return '<span class="ok">pass</span>' if ok \
        else '<span class="fail">FAIL</span>'


def _summary_section(bundle: SeriesBundle) -> str:
    parts = []
    if bundle.summary:
        parts.append("<h3>top level</h3>")
        parts.append(_table(("key", "value"), _scalar_rows(bundle.summary)))
        for key in ("gronwall", "q_monotone", "audit", "source_sup"):
            sub = bundle.summary.get(key)
            if isinstance(sub, dict):
                parts.append(f"<h4>{_esc(key)}</h4>")
                parts.append(_table(("key", "value"), _scalar_rows(sub)))
    for rid in sorted(bundle.summaries):
        s = bundle.summaries[rid]
        parts.append(f"<h3>{_esc(rid)}</h3>")
        rows = _scalar_rows(s)
        audit = s.get("audit")
        if isinstance(audit, dict):
            rows.append(("energy audit",
                         _pass_cell(bool(audit.get("passed")))))
        parts.append(_table(("key", "value"), rows))
    return "".join(parts) if parts else "<p>no summaries found.</p>"


def _figure_section(bundle: SeriesBundle) -> tuple:
    blocks, count = [], 0
    if bundle.runs or bundle.extras:
        with tempfile.TemporaryDirectory() as tmp:
            for kind in KINDS:
                for path in plot_series(bundle, kind, tmp):
                    data = base64.b64encode(path.read_bytes()).decode()
                    blocks.append(
                        f"<h3>{_esc(path.stem)}</h3>"
                        f'<img alt="{_esc(path.stem)}" '
                        f'src="data:image/png;base64,{data}">')
                    count += 1
    if not blocks:
        return "<p>no figures for this directory.</p>", 0
    return "".join(blocks), count


def _verify_section(bundle: SeriesBundle) -> str:
    def battery_table(rep: dict) -> str:
        rows = [(_esc(c["name"]), _esc(_fmt(c["value"])),
                 f"{_esc(c.get('op', '<='))} {_esc(_fmt(c['tolerance']))}",
                 _pass_cell(bool(c["passed"])))
                for c in rep.get("checks", [])]
        title = rep.get("battery", "battery")
        return (f"<h4>{_esc(title)}: {_pass_cell(bool(rep.get('passed')))}"
                "</h4>" + _table(("check", "value", "tolerance", "status"),
                                 rows))

    parts = []
    for name in sorted(bundle.verify_reports):
        rep = bundle.verify_reports[name]
        parts.append(f"<h3>{_esc(name)}</h3>")
        if "batteries" in rep:
            for sub in rep["batteries"]:
                parts.append(battery_table(sub))
        else:
            parts.append(battery_table(rep))
    return "".join(parts)


def _config_section(bundle: SeriesBundle) -> str:
    configs = {}
    if bundle.summary and isinstance(bundle.summary.get("config"), dict):
        configs["top level"] = bundle.summary["config"]
    for rid in sorted(bundle.summaries):
        cfg = bundle.summaries[rid].get("config")
        if isinstance(cfg, dict):
            configs[rid] = cfg
    for key in ("weak_config", "strong_config"):
        if bundle.summary and isinstance(bundle.summary.get(key), dict):
            configs[key] = bundle.summary[key]
    if not configs:
        return "<p>no config echo found.</p>"
    parts = []
    for label in sorted(configs):
        blob = json.dumps(configs[label], sort_keys=True, indent=2)
        parts.append(f"<h3>{_esc(label)}</h3><pre>{_esc(blob)}</pre>")
    return "".join(parts)


def render_report(run_dir, out_path=None) -> Path:
    """Render one directory into a standalone HTML document."""
    run_dir = Path(run_dir)
    bundle = load_bundle(run_dir, strict=False)
    if not bundle:
        raise ReportError(f"{run_dir}: nothing to report on")

    figures, n_figures = _figure_section(bundle)
    sections = [
        ("Summary", _summary_section(bundle)),
        ("Figures", figures),
    ]
    if bundle.verify_reports:
        sections.append(("Verification", _verify_section(bundle)))
    sections.append(("Configuration", _config_section(bundle)))
    if bundle.errors:
        rows = [(_esc(f), _esc(msg)) for f, msg in sorted(bundle.errors)]
        sections.append(("Errors", _table(("file", "problem"), rows)))

    title = f"fsilab report: {run_dir.name} ({bundle.kind})"
    body = "".join(f"<h2>{_esc(name)}</h2>{content}"
                   for name, content in sections)
    doc = (f"<!DOCTYPE html><html><head><meta charset=\"utf-8\">"
           f"<title>{_esc(title)}</title><style>{_STYLE}</style></head>"
           f"<body><h1>{_esc(title)}</h1>{body}</body></html>\n")

    out = Path(out_path) if out_path is not None \
        else Path.cwd() / "report.html"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(doc)
    return out
