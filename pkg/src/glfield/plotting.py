"""SVG figures for the CLI. Presentation only: no check reads them back.

Output is byte-stable: the SVG hash salt is fixed and no date is stamped.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_RC = {"svg.hashsalt": "glfield", "font.size": 9, "axes.spines.top": False,
       "axes.spines.right": False, "lines.linewidth": 1.2}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def plot_rate_field(rates, path, title="mean firing rate"):
    """One line m(x, .) per site."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5, 3.2))
        cmap = plt.get_cmap("viridis")
        n = len(rates.sites)
        for i, x in enumerate(rates.sites):
            ax.plot(rates.knots, rates.values[i], color=cmap(i / max(1, n - 1)), label=f"x={x:.3g}")
        ax.set_xlabel("t")
        ax.set_ylabel("m(x, t)")
        ax.set_title(title)
        if n <= 8:
            ax.legend(frameon=False, fontsize=7)
        _save(fig, path)


def plot_scaling(x, y, fit, path, xlabel, ylabel, ci=None, ref_slope=None, title=None):
    """Log-log scatter of a metric with its fitted power law."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(4.5, 3.2))
        if ci is not None:
            lo, hi = np.asarray(ci, float).T
            ax.errorbar(x, y, yerr=[y - lo, hi - y], fmt="o", ms=4, capsize=2, label="estimate")
        else:
            ax.plot(x, y, "o", ms=4, label="estimate")
        xx = np.geomspace(x.min(), x.max(), 50)
        if fit is not None:
            ax.plot(xx, fit.predict(xx), "-", label=f"fit slope {fit.slope:.2f}")
        if ref_slope is not None:
            ax.plot(xx, y[0] * (xx / x[0]) ** ref_slope, "--", color="grey", label=f"slope {ref_slope:g}")
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        ax.legend(frameon=False, fontsize=7)
        _save(fig, path)


def plot_tail(samples, rows, path):
    """Empirical survival function against the bound 1/sqrt(1 + L^2)."""
    s = np.sort(np.ravel(samples))
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(4.5, 3.2))
        L = np.geomspace(0.1, max(20.0, float(s[-1]) if s.size else 20.0), 200)
        emp = 1.0 - np.searchsorted(s, L, side="right") / max(1, s.size)
        ax.plot(L, emp, label="empirical P(lam > L)")
        ax.plot(L, 1.0 / np.sqrt(1.0 + L ** 2), "--", label="1/sqrt(1+L^2)")
        ax.plot([r["L"] for r in rows], [r["empirical"] for r in rows], "o", ms=4)
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel("L")
        ax.set_ylabel("tail probability")
        ax.legend(frameon=False, fontsize=7)
        _save(fig, path)
