"""Reference rasterization of brush strokes into marker label images.

The browser studio rasterizes strokes with the exact same rule, so both
sides can be compared byte-for-byte on shared stroke fixtures: a stroke
covers every pixel whose Euclidean distance to its polyline is at most
the brush radius; later strokes overwrite earlier ones.
"""

from __future__ import annotations

import math

import numpy as np

from .imgcore import MARKER_BACKGROUND, MARKER_OBJECT


def _seg_dist_sq(px: float, py: float, x0: float, y0: float, x1: float, y1: float) -> float:
    vx, vy = x1 - x0, y1 - y0
    wx, wy = px - x0, py - y0
    vv = vx * vx + vy * vy
    if vv == 0.0:
        return wx * wx + wy * wy
    t = (wx * vx + wy * vy) / vv
    t = 0.0 if t < 0.0 else (1.0 if t > 1.0 else t)
    dx, dy = px - (x0 + t * vx), py - (y0 + t * vy)
    return dx * dx + dy * dy


def rasterize_strokes(height: int, width: int, strokes) -> np.ndarray:
    """Strokes -> (h, w) uint8 marker raster (0/1/2).

    Each stroke is {"cls": "object"|"background", "radius": r,
    "points": [[i, j], ...]} with pixel-center coordinates.
    """
    out = np.zeros((height, width), dtype=np.uint8)
    for stroke in strokes:
        code = MARKER_OBJECT if stroke["cls"] == "object" else MARKER_BACKGROUND
        r = float(stroke["radius"])
        r_sq = r * r
        pts = [(float(p[0]), float(p[1])) for p in stroke["points"]]
        if not pts:
            continue
        segments = list(zip(pts, pts[1:])) or [(pts[0], pts[0])]
        for (i0, j0), (i1, j1) in segments:
            lo_i = max(0, int(math.floor(min(i0, i1) - r)))
            hi_i = min(height - 1, int(math.ceil(max(i0, i1) + r)))
            lo_j = max(0, int(math.floor(min(j0, j1) - r)))
            hi_j = min(width - 1, int(math.ceil(max(j0, j1) + r)))
            for i in range(lo_i, hi_i + 1):
                for j in range(lo_j, hi_j + 1):
                    if _seg_dist_sq(float(i), float(j), i0, j0, i1, j1) <= r_sq:
                        out[i, j] = code
    return out
