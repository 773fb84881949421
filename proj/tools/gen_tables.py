#!/usr/bin/env python3
"""Regenerates the data tables compiled into libcxreg.

data/colormap_bwy256.inc  blue-white-yellow diverging colormap
data/nemenyi_q.inc        Nemenyi critical values q_alpha = Q(1-alpha; k, inf) / sqrt(2),
                          Q being the studentized range quantile (scipy.stats.studentized_range)

Usage: python3 tools/gen_tables.py  (from the repository root; needs scipy)
"""

import math
from pathlib import Path

from scipy.stats import studentized_range

DATA = Path(__file__).resolve().parent.parent / "data"


def colormap():
    blue, white, yellow = (0, 0, 139), (255, 255, 255), (255, 215, 0)
    lines = [
        "// 256-entry blue-white-yellow diverging colormap, {r, g, b} per entry.",
        "// Entry 0 is dark blue (0,0,139), entries 127 and 128 are white, entry 255 is yellow (255,215,0);",
        "// the two halves interpolate linearly in RGB. Generated by tools/gen_tables.py.",
    ]
    for i in range(256):
        if i <= 127:
            t, a, b = (127 - i) / 127, white, blue
        else:
            t, a, b = (i - 128) / 127, white, yellow
        r, g, bb = (round(a[c] + (b[c] - a[c]) * t) for c in range(3))
        lines.append(f"{{{r}, {g}, {bb}}},")
    (DATA / "colormap_bwy256.inc").write_text("\n".join(lines) + "\n")


def nemenyi():
    lines = [
        "// Nemenyi critical values q_alpha for k = 2..10 models, infinite degrees of freedom:",
        "// studentized range quantile Q(1 - alpha; k, inf) divided by sqrt(2).",
        "// Rows: {alpha, q(k=2), ..., q(k=10)}. Generated by tools/gen_tables.py with scipy.",
    ]
    for alpha in (0.05, 0.005):
        qs = [studentized_range.ppf(1.0 - alpha, k, math.inf) / math.sqrt(2.0) for k in range(2, 11)]
        lines.append("{" + f"{alpha!r}, " + ", ".join(f"{q:.12f}" for q in qs) + "},")
    (DATA / "nemenyi_q.inc").write_text("\n".join(lines) + "\n")


if __name__ == "__main__":
    DATA.mkdir(exist_ok=True)
    colormap()
    nemenyi()
