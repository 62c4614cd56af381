#!/usr/bin/env python3
"""Beaconing rate against number of users, one series per
(scheme, reuse, ISD) combination with 95% CI error bars.

Usage: plots/fig3.py beacon_rate.csv <image_out>
"""
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import matplotlib.pyplot as plt

from common import load_csv, run, save_pair

SCHEMA = ["isd_m", "n_users", "scheme", "reuse", "mean_rate_hz", "ci95"]


def render(csv_in: str, image_out: str):
    rows = load_csv(csv_in, SCHEMA)
    series: dict[tuple, list] = {}
    for r in rows:
        key = (r["scheme"], r["reuse"], float(r["isd_m"]))
        series.setdefault(key, []).append(
            (int(r["n_users"]), float(r["mean_rate_hz"]), float(r["ci95"])))
    fig, ax = plt.subplots(figsize=(7, 5))
    for key in sorted(series):
        scheme, reuse, isd = key
        pts = sorted(series[key])
        xs = [p[0] for p in pts]
        ys = [p[1] for p in pts]
        es = [p[2] for p in pts]
        label = f"{scheme}, reuse {reuse}, ISD {isd:g} m"
        ax.errorbar(xs, ys, yerr=es, marker="o", capsize=3, label=label)
    ax.set_xlabel("number of users")
    ax.set_ylabel("beaconing rate per user (1/s)")
    ax.set_title("Beaconing rate vs user load")
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    return save_pair(fig, image_out)


if __name__ == "__main__":
    run(render)
