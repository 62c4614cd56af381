"""Shared CSV loading and deterministic figure output for the plot scripts.

Each script consumes one documented CSV schema and writes a raster + vector
image pair; output is deterministic for identical input (fixed style, no
embedded timestamps).
"""
from __future__ import annotations

import csv
import os
import sys

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "beaconsim-plots"

import matplotlib.pyplot as plt  # noqa: E402


class SchemaError(ValueError):
    """Input CSV does not match the documented schema."""


def load_csv(path: str, required: list[str]) -> list[dict[str, str]]:
    """Read rows and fail loudly, naming the first missing column."""
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in required:
            if col not in header:
                raise SchemaError(f"missing required column: {col}")
        rows = list(reader)
    if not rows:
        raise SchemaError("no data rows")
    return rows


def save_pair(fig, out_path: str) -> tuple[str, str]:
    """Write <out>.png and <out>.svg (suppressing volatile metadata)."""
    base, ext = os.path.splitext(out_path)
    raster = base + ".png" if ext.lower() not in (".png",) else out_path
    vector = base + ".svg"
    fig.savefig(raster, dpi=150)
    fig.savefig(vector, metadata={"Date": None})
    plt.close(fig)
    return raster, vector


def run(main_fn) -> None:
    """Script entry wrapper: argv handling and loud schema failures."""
    if len(sys.argv) != 3:
        print(f"usage: {os.path.basename(sys.argv[0])} <csv_in> <image_out>",
              file=sys.stderr)
        raise SystemExit(2)
    try:
        raster, vector = main_fn(sys.argv[1], sys.argv[2])
    except (SchemaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        raise SystemExit(1)
    print(f"wrote {raster} and {vector}")
