"""Deterministic serialization of experiment reports.

Floats are written with repr (shortest round-trip), key orders are fixed,
and no timestamps enter the output, so rerunning a configuration yields
byte-identical files.
"""

from __future__ import annotations

import dataclasses
import json
import math
import platform
from typing import Optional

import numpy as np
import scipy

from bsquant.experiments import ExperimentReport, ResultRow

__all__ = ["CSV_HEADER", "rows_to_csv", "report_to_dict", "report_to_json",
           "write_report", "verdict_lines"]

CSV_HEADER = ",".join(ResultRow.COLUMNS)


def _fmt(value) -> str:
    if isinstance(value, bool):
        return str(value)
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def rows_to_csv(rows) -> str:
    lines = [CSV_HEADER]
    for r in rows:
        lines.append(",".join(_fmt(v) for v in r.astuple()))
    return "\n".join(lines) + "\n"


def _sanitize(obj):
    """Make verdict/fit payloads strict-JSON safe and deterministic."""
    if isinstance(obj, dict):
        return {str(k): _sanitize(v) for k, v in sorted(obj.items())}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, (complex, np.complexfloating)):
        return [obj.real, obj.imag]
    return obj


def _versions() -> dict:
    from bsquant import __version__
    return {
        "bsquant": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
    }


def report_to_dict(report: ExperimentReport) -> dict:
    cfg = dataclasses.asdict(report.config)
    cfg["w_points"] = [[w.real, w.imag] for w in report.config.w_points]
    return {
        "config": _sanitize(cfg),
        "rows": [
            {col: _sanitize(val)
             for col, val in zip(ResultRow.COLUMNS, r.astuple())}
            for r in report.rows],
        "fits": {name: _sanitize(dataclasses.asdict(fit))
                 for name, fit in sorted(report.fits.items())},
        "verdicts": {name: _sanitize(v)
                     for name, v in sorted(report.verdicts.items())},
        "versions": _versions(),
    }


def report_to_json(report: ExperimentReport) -> str:
    return json.dumps(report_to_dict(report), sort_keys=True, indent=2) + "\n"


def verdict_lines(report: ExperimentReport) -> list:
    """Human-readable one-line-per-verdict summary."""
    out = []
    for name, v in report.verdicts.items():
        detail = ", ".join(
            f"{k}={v[k]:.4g}" if isinstance(v[k], float) else f"{k}={v[k]}"
            for k in v if k != "pass" and not isinstance(v[k], (list, dict)))
        out.append(f"[{'PASS' if v['pass'] else 'FAIL'}] "
                   f"{report.name}/{name}" + (f" ({detail})" if detail else ""))
    for name, fit in report.fits.items():
        out.append(f"[fit ] {report.name}/{name}: slope={fit.slope:.4f} "
                   f"+- {fit.confidence:.4f} (n={fit.n_used})")
    return out


def write_report(report: ExperimentReport, path: Optional[str],
                 fmt: str = "csv") -> str:
    """Serialize the report; write to `path` when given, return the text."""
    if fmt == "csv":
        text = rows_to_csv(report.rows)
    elif fmt == "json":
        text = report_to_json(report)
    else:
        raise ValueError(f"unknown output format {fmt!r}")
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    return text
