"""Report figures: error ladders and transverse profiles, rendered to SVG.

Output is deterministic (fixed hash salt, no embedded dates) so figure
files can be diffed across reruns like the delimited output.
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "bsquant"

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

from bsquant.experiments import ExperimentReport  # noqa: E402

__all__ = ["render_report"]


def _error_ladder(ax, report: ExperimentReport):
    ks = sorted({r.k for r in report.rows})
    errs, bounds = [], []
    for k in ks:
        rows = [r for r in report.rows if r.k == k and r.in_window]
        if not rows:
            continue
        errs.append((k, max(r.abs_err for r in rows)))
        bounds.append((k, max(r.bound for r in rows)))
    if errs:
        ax.loglog([k for k, _ in errs], [e for _, e in errs], "o-",
                  label="max abs error (in window)")
    if bounds and any(b > 0 for _, b in bounds):
        ax.loglog([k for k, _ in bounds], [b for _, b in bounds], "s--",
                  label="envelope")
    for name, fit in report.fits.items():
        ax.plot([], [], " ", label=f"{name}: slope {fit.slope:.2f}")
    ax.set_xlabel("level k")
    ax.set_ylabel("absolute error")
    ax.set_title(f"{report.name}: error against level")
    ax.legend(fontsize=7)
    ax.grid(True, which="both", alpha=0.3)


def _profile_panel(ax, report: ExperimentReport):
    ks = sorted({r.k for r in report.rows})
    if not ks:
        ax.set_axis_off()
        return
    k_top = ks[-1]
    rows = [r for r in report.rows if r.k == k_top]
    norm = math.sqrt(math.pi / (2.0 * k_top))
    # transverse cut: offsets with zero along-loop part
    cut = sorted((r.w_re, abs(complex(r.u_re, r.u_im)) * norm)
                 for r in rows if abs(r.w_im) < 1e-12)
    if len(cut) >= 3:
        ps = np.array([p for p, _ in cut])
        vs = np.array([v for _, v in cut])
        scale = max(vs) if max(vs) > 0 else 1.0
        ax.plot(ps, vs / scale, "o", label=f"|u| (normalized), k={k_top}")
        grid = np.linspace(min(ps), max(ps), 200)
        ax.plot(grid, np.exp(-grid ** 2), "-", label="exp(-p^2)")
        ax.set_xlabel("transverse offset p")
        ax.set_ylabel("normalized magnitude")
        ax.set_title("transverse profile")
        ax.legend(fontsize=7)
        ax.grid(True, alpha=0.3)
    else:
        lines = [f"{name}: {'PASS' if v['pass'] else 'FAIL'}"
                 for name, v in report.verdicts.items()]
        ax.text(0.05, 0.95, "\n".join(lines) or "no verdicts",
                va="top", family="monospace", fontsize=8,
                transform=ax.transAxes)
        ax.set_axis_off()


def render_report(report: ExperimentReport, path: str) -> str:
    """Two-panel SVG: error ladder and transverse profile/verdicts."""
    fig, axes = plt.subplots(1, 2, figsize=(9.0, 3.6))
    _error_ladder(axes[0], report)
    _profile_panel(axes[1], report)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path
