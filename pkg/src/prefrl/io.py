"""CSV and JSON persistence of regret curves."""

from __future__ import annotations

import csv
import json

import numpy as np

from .experiment import RegretCurve

CURVE_HEADER = ["t", "seed", "regret_scr", "regret_pref", "beta_or_gamma", "set_size"]


def write_curve_csv(curve: RegretCurve, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CURVE_HEADER)
        for k, seed in enumerate(curve.seeds):
            for t in range(curve.T):
                # repr round-trips float64 exactly
                w.writerow([t + 1, seed, repr(float(curve.cum_scr[k, t])),
                            repr(float(curve.cum_pref[k, t])), repr(float(curve.radius[k, t])),
                            int(curve.set_size[k, t])])


def read_curve_csv(path, seeds: list | None = None) -> RegretCurve:
    """Parse ``curve.csv``; ``seeds`` supplies seed order when the file has no rows."""
    rows = {}
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if header != CURVE_HEADER:
            raise ValueError(f"unexpected header {header}")
        for t, seed, scr, pref, rad, size in r:
            rows.setdefault(int(seed), []).append((int(t), float(scr), float(pref), float(rad), int(size)))
    order = list(rows) if seeds is None else list(seeds)
    T = len(rows[order[0]]) if rows else 0
    n = len(order)
    scr, pref, rad = np.zeros((n, T)), np.zeros((n, T)), np.zeros((n, T))
    size = np.zeros((n, T), dtype=np.int64)
    for k, seed in enumerate(order):
        for t, a, b, c, e in rows.get(seed, []):
            scr[k, t - 1], pref[k, t - 1], rad[k, t - 1], size[k, t - 1] = a, b, c, e
    return RegretCurve(order, scr, pref, rad, size)


def write_summary(summary: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
