#!/usr/bin/env python3
"""Beacon miss-detection probability against number of users, one series per
(scheme, ISD) with 95% CI error bars.

Usage: plots/fig4.py miss_detection.csv <image_out>
"""
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import matplotlib.pyplot as plt

from common import load_csv, run, save_pair

SCHEMA = ["isd_m", "n_users", "scheme", "p_md", "ci95"]


def render(csv_in: str, image_out: str):
    rows = load_csv(csv_in, SCHEMA)
    series: dict[tuple, list] = {}
    for r in rows:
        key = (r["scheme"], float(r["isd_m"]))
        series.setdefault(key, []).append(
            (int(r["n_users"]), float(r["p_md"]), float(r["ci95"])))
    fig, ax = plt.subplots(figsize=(7, 5))
    for key in sorted(series):
        scheme, isd = key
        pts = sorted(series[key])
        ax.errorbar([p[0] for p in pts], [p[1] for p in pts],
                    yerr=[p[2] for p in pts], marker="s", capsize=3,
                    label=f"{scheme}, ISD {isd:g} m")
    ax.set_xlabel("number of users")
    ax.set_ylabel("miss-detection probability")
    ax.set_title("Beacon miss-detection vs user load")
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    return save_pair(fig, image_out)


if __name__ == "__main__":
    run(render)
