#!/usr/bin/env python3
"""Wrong-cell probability and mean path-loss penalty against group radius,
with 95% CI error bars on the probability curve.

Usage: plots/fig6.py wrong_cell.csv <image_out>
"""
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import matplotlib.pyplot as plt

from common import load_csv, run, save_pair

SCHEMA = ["group_radius_m", "p_wrong_cell", "mean_delta_pl_db", "ci95"]


def render(csv_in: str, image_out: str):
    rows = load_csv(csv_in, SCHEMA)
    pts = sorted((float(r["group_radius_m"]), float(r["p_wrong_cell"]),
                  float(r["mean_delta_pl_db"]), float(r["ci95"])) for r in rows)
    radii = [p[0] for p in pts]
    fig, ax = plt.subplots(figsize=(7, 5))
    ax.errorbar(radii, [p[1] for p in pts], yerr=[p[3] for p in pts],
                marker="o", capsize=3, color="tab:blue",
                label="P(lower path loss to a different cell)")
    ax.set_xlabel("group radius (m)")
    ax.set_ylabel("wrong-cell probability", color="tab:blue")
    ax.grid(alpha=0.3)
    ax2 = ax.twinx()
    ax2.plot(radii, [p[2] for p in pts], marker="^", color="tab:red",
             label="mean path-loss penalty")
    ax2.set_ylabel("mean path-loss penalty (dB)", color="tab:red")
    ax.set_title("Wrong-cell probability vs group radius")
    lines1, labels1 = ax.get_legend_handles_labels()
    lines2, labels2 = ax2.get_legend_handles_labels()
    ax.legend(lines1 + lines2, labels1 + labels2, fontsize=8, loc="upper left")
    return save_pair(fig, image_out)


if __name__ == "__main__":
    run(render)
