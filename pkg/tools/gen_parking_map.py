"""Emit the bundled parking-lot centerline (closed aisle serpentine) as YAML.

Run once; the output is pasted into src/avdse/data/robotaxi.yaml.
"""

from __future__ import annotations

import sys

import yaml

X_WEST = -15.0
X_EAST = 82.0
X_RETURN = -20.5
Y_TOP = 25.778
AISLE_SPACING = 5.45
N_AISLES = 16


def centerline() -> list[list[float]]:
    ys = [round(Y_TOP - k * AISLE_SPACING, 3) for k in range(N_AISLES)]
    pts = [[X_WEST, ys[1]], [X_EAST, ys[1]], [X_EAST, ys[0]], [X_RETURN, ys[0]], [X_RETURN, ys[-1]]]
    # aisles climb back up from the bottom, odd levels eastbound, even westbound
    for k in range(N_AISLES - 1, 1, -1):
        if k % 2:
            pts += [[X_WEST, ys[k]], [X_EAST, ys[k]]]
        else:
            pts += [[X_EAST, ys[k]], [X_WEST, ys[k]]]
    # the X_RETURN->X_WEST hop on the bottom aisle is collinear; drop the redundant vertex
    pts.remove([X_WEST, ys[-1]])
    return pts


if __name__ == "__main__":
    yaml.safe_dump({"points": centerline()}, sys.stdout, default_flow_style=None)
