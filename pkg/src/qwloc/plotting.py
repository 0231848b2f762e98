"""
SVG figures drawn from the CSV tables written next to them.

Every function reads only its CSV inputs, so figures can be regenerated
offline from shipped tables. Output bytes are reproducible: the SVG id salt
is fixed and no timestamp is embedded.
"""

from __future__ import annotations

from collections import defaultdict
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .tables import read_csv  # noqa: E402

__all__ = [
    "plot_distribution",
    "plot_diagnostics",
    "plot_sweep",
    "plot_confusion",
    "plot_sample_size",
    "plot_scaling",
]

STYLE = {
    "svg.hashsalt": "qwloc",
    "svg.fonttype": "path",
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "legend.frameon": False,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "lines.linewidth": 1.2,
}


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def _floats(rows, key) -> np.ndarray:
    return np.array([float(r[key]) if r[key] != "" else np.nan for r in rows])


def plot_distribution(csv_path, svg_path, times: Sequence[int] | None = None) -> Path:
    """P(x) at a few times (final time by default, plus quarter and half way)."""
    rows = read_csv(csv_path)
    by_t: dict[int, list] = defaultdict(list)
    for r in rows:
        by_t[int(r["t"])].append((int(r["x"]), float(r["P"])))
    t_max = max(by_t)
    if not times:
        times = sorted({t_max // 4, t_max // 2, t_max} - {0}) or [t_max]
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(len(times), 1, figsize=(5, 1.6 * len(times)), sharex=True, squeeze=False)
        for ax, t in zip(axes[:, 0], times):
            pts = sorted(by_t.get(int(t), []))
            if pts:
                x, p = zip(*pts)
                ax.plot(x, p, color="C0")
            ax.set_ylabel("P(x)")
            ax.set_title(f"t = {t}", fontsize=8, loc="left")
        axes[-1, 0].set_xlabel("x")
        return _save(fig, svg_path)


def plot_diagnostics(csv_path, svg_path) -> Path:
    rows = read_csv(csv_path)
    t = _floats(rows, "t")
    with plt.rc_context(STYLE):
        fig, (a, b) = plt.subplots(1, 2, figsize=(7, 2.6))
        a.loglog(t, _floats(rows, "MoI"), color="C0")
        a.set_xlabel("t")
        a.set_ylabel("MoI")
        b.plot(t, _floats(rows, "IPR"), color="C1")
        b.set_xlabel("t")
        b.set_ylabel("IPR")
        return _save(fig, svg_path)


def plot_sweep(sweep_csv, critical_csv, svg_path) -> Path:
    """Final MoI and IPR against the randomness magnitude, with detector estimates marked."""
    rows = read_csv(sweep_csv)
    crit = [r for r in read_csv(critical_csv) if r["critical_value"] != ""]
    p = _floats(rows, "param")
    with plt.rc_context(STYLE):
        fig, (a, b) = plt.subplots(1, 2, figsize=(7, 2.6))
        a.loglog(p, _floats(rows, "MoI"), "o-", ms=2.5, color="C0")
        a.set_ylabel("final MoI")
        b.semilogx(p, _floats(rows, "IPR"), "o-", ms=2.5, color="C1")
        b.set_ylabel("final IPR")
        for ax in (a, b):
            ax.set_xlabel("randomness")
            for i, r in enumerate(crit):
                ax.axvline(float(r["critical_value"]), ls="--", lw=0.8, color=f"C{i + 2}", label=r["method"])
        if crit:
            b.legend()
        return _save(fig, svg_path)


def plot_confusion(csv_path, svg_path, critical: float | None = None) -> Path:
    rows = read_csv(csv_path)
    p = _floats(rows, "param")
    q = _floats(rows, "p_delocalized")
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4, 2.8))
        ax.plot(p, q, "o-", ms=2.5, color="C0", label="delocalized")
        ax.plot(p, 1.0 - q, "s-", ms=2.5, color="C3", label="localized")
        ax.axhline(0.5, color="0.6", lw=0.6)
        if critical is not None:
            ax.axvline(critical, ls="--", color="k", lw=0.8)
        ax.set_xlabel("randomness")
        ax.set_ylabel("classification probability")
        ax.set_ylim(-0.02, 1.02)
        ax.legend()
        return _save(fig, svg_path)


def plot_sample_size(csv_path, svg_path) -> Path:
    rows = [r for r in read_csv(csv_path) if r["critical_value"] != ""]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4, 2.8))
        ax.plot(_floats(rows, "size"), _floats(rows, "critical_value"), "o", ms=3, color="C0")
        ax.set_xlabel("training-set size")
        ax.set_ylabel("critical estimate")
        return _save(fig, svg_path)


def plot_scaling(criticals_csv, exponents_csv, svg_path, model: str | None = None) -> Path:
    """Log-log critical value against n per method, with the fitted power laws dashed."""
    crit = [r for r in read_csv(criticals_csv) if r["critical_value"] != ""]
    fits = read_csv(exponents_csv)
    if model is not None:
        crit = [r for r in crit if r["model"] == model]
        fits = [r for r in fits if r["model"] == model]
    methods = list(dict.fromkeys(r["method"] for r in crit))
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 3.2))
        for i, m in enumerate(methods):
            pts = [r for r in crit if r["method"] == m]
            n = _floats(pts, "N")
            v = _floats(pts, "critical_value")
            ax.loglog(n, v, "o", ms=3.5, color=f"C{i}", label=m)
            fit = next((f for f in fits if f["method"] == m and f["exponent"] != ""), None)
            if fit is not None and len(n) > 1:
                grid = np.geomspace(n.min(), n.max(), 50)
                ax.loglog(grid, float(fit["prefactor"]) * grid ** (-float(fit["exponent"])), "--", lw=0.9, color=f"C{i}")
        ax.set_xlabel("N")
        ax.set_ylabel("critical value")
        if methods:
            ax.legend()
        return _save(fig, svg_path)
