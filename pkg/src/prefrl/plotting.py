"""Static regret figures."""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "axes.linewidth": 1.0,
    "xtick.direction": "in",
    "ytick.direction": "in",
    "font.size": 9,
    "legend.fontsize": 8,
    "legend.frameon": False,
    # fixed hash salt keeps SVG output byte-stable across runs
    "svg.hashsalt": "prefrl",
    "svg.fonttype": "none",
}


def figsize(width=7.0):
    golden = (math.sqrt(5) - 1.0) / 2.0
    return width, width * golden * 0.55


def _band(ax, t, mean, se, label, color):
    ax.plot(t, mean, color=color, lw=1.3, label=label)
    ax.fill_between(t, mean - se, mean + se, color=color, alpha=0.25, lw=0)


def plot_curve(curve, path, baseline=None, title: str | None = None) -> None:
    """Mean cumulative score regret with a standard-error band: linear and log-log panels.

    ``baseline`` is an optional second ``RegretCurve`` drawn for comparison.
    """
    with plt.rc_context(STYLE):
        fig, (lin, log) = plt.subplots(1, 2, figsize=figsize())
        t = np.arange(1, curve.T + 1)
        series = [(curve, "LPbRL", "C0")]
        if baseline is not None:
            series.append((baseline, "uniform pairs", "C3"))
        for c, label, color in series:
            mean, se = c.mean("scr"), c.stderr("scr")
            _band(lin, t, mean, se, label, color)
            pos = mean > 0
            log.loglog(t[pos], mean[pos], color=color, lw=1.3, label=label)
        if curve.T > 1:
            ref = t ** 0.5 * (curve.mean("scr")[-1] / math.sqrt(curve.T))
            log.loglog(t, ref, color="0.5", ls="--", lw=0.8, label=r"$\propto\sqrt{t}$")
        lin.set_xlabel("round t")
        lin.set_ylabel("cumulative score regret")
        log.set_xlabel("round t")
        lin.legend(loc="upper left")
        log.legend(loc="upper left")
        if title:
            fig.suptitle(title)
        fig.tight_layout()
        fig.savefig(path, metadata={"Date": None})
        plt.close(fig)
