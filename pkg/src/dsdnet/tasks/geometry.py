"""Polygon helpers: point-in-polygon, rasterization, simplicity, top profile."""

from __future__ import annotations

import numpy as np


def pixel_centers(H: int, W: int):
    """Viewport coordinates of pixel centers; row 0 is the top (y = 1)."""
    xs = (np.arange(W) + 0.5) / W
    ys = 1.0 - (np.arange(H) + 0.5) / H
    return np.meshgrid(xs, ys)


def points_in_polygon(px, py, vertices) -> np.ndarray:
    """Even-odd rule; a point is inside if a ray to +x crosses an odd number of edges."""
    v = np.asarray(vertices, dtype=float)
    px = np.asarray(px, dtype=float)
    py = np.asarray(py, dtype=float)
    inside = np.zeros(px.shape, dtype=bool)
    if len(v) < 3:
        return inside
    x0, y0 = v[:, 0], v[:, 1]
    x1, y1 = np.roll(x0, -1), np.roll(y0, -1)
    for a, b, c, d in zip(x0, y0, x1, y1):
        if b == d:
            continue
        straddles = (b > py) != (d > py)
        xcross = a + (py - b) * (c - a) / (d - b)
        inside ^= straddles & (px < xcross)
    return inside


def rasterize_polygon(vertices, H: int, W: int) -> np.ndarray:
    """White (1.0) where the pixel center lies inside the polygon, black elsewhere."""
    X, Y = pixel_centers(H, W)
    return points_in_polygon(X, Y, vertices).astype(float)


def _segments_cross(p1, p2, q1, q2):
    def orient(a, b, c):
        return np.sign((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
    o1, o2 = orient(p1, p2, q1), orient(p1, p2, q2)
    o3, o4 = orient(q1, q2, p1), orient(q1, q2, p2)
    if o1 * o2 < 0 and o3 * o4 < 0:
        return True
    # collinear overlaps count as crossings
    def on_seg(a, b, c):
        return (min(a[0], b[0]) <= c[0] <= max(a[0], b[0])
                and min(a[1], b[1]) <= c[1] <= max(a[1], b[1]))
    return ((o1 == 0 and on_seg(p1, p2, q1)) or (o2 == 0 and on_seg(p1, p2, q2))
            or (o3 == 0 and on_seg(q1, q2, p1)) or (o4 == 0 and on_seg(q1, q2, p2)))


def is_simple(vertices) -> bool:
    """True when no two non-adjacent edges intersect."""
    v = np.asarray(vertices, dtype=float)
    n = len(v)
    if n < 3:
        return False
    for i in range(n):
        for j in range(i + 1, n):
            if j == i + 1 or (i == 0 and j == n - 1):
                continue
            if _segments_cross(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n]):
                return False
    return True


def top_profile(vertices, xs) -> np.ndarray:
    """Highest boundary point on each vertical line ``x = xs[i]``; -inf where missed."""
    v = np.asarray(vertices, dtype=float)
    xs = np.asarray(xs, dtype=float)
    x0, y0 = v[:, 0], v[:, 1]
    x1, y1 = np.roll(x0, -1), np.roll(y0, -1)
    out = np.full(xs.shape, -np.inf)
    for a, b, c, d in zip(x0, y0, x1, y1):
        lo, hi = min(a, c), max(a, c)
        hit = (xs >= lo) & (xs <= hi)
        if c == a:
            y = np.full(xs.shape, max(b, d))
        else:
            y = b + (xs - a) * (d - b) / (c - a)
        out = np.where(hit, np.maximum(out, y), out)
    return out


def top_at(vertices, x: float) -> float | None:
    """Highest polygon boundary point on the vertical line through ``x`` (None if missed)."""
    y = float(top_profile(vertices, [x])[0])
    return None if y == -np.inf else y


def top_over(vertices, x_lo: float, x_hi: float, samples: int = 9) -> float | None:
    """Highest polygon point with x in [x_lo, x_hi], or None if the band misses it."""
    v = np.asarray(vertices, dtype=float)
    y = top_profile(v, np.linspace(x_lo, x_hi, samples)).max()
    inband = v[(v[:, 0] >= x_lo) & (v[:, 0] <= x_hi), 1]
    if inband.size:
        y = max(y, inband.max())
    return None if y == -np.inf else float(y)


class BandTop:
    """Precomputed ``top_over(x - half, x + half)`` on a fine grid, for fast lookups."""

    def __init__(self, vertices, half_width: float, step: float = 5e-4):
        v = np.asarray(vertices, dtype=float)
        self.lo = v[:, 0].min() - half_width
        self.hi = v[:, 0].max() + half_width
        self.step = step
        grid = np.arange(self.lo - step, self.hi + 2 * step, step)
        raw = top_profile(v, grid)
        for vx, vy in v:  # vertices sit exactly on the profile; keep their peaks
            k = int(round((vx - grid[0]) / step))
            raw[k] = max(raw[k], vy)
        w = int(round(half_width / step))
        padded = np.pad(raw, w, constant_values=-np.inf)
        windows = np.lib.stride_tricks.sliding_window_view(padded, 2 * w + 1)
        self.grid = grid
        self.values = windows.max(axis=1)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        k = np.clip(np.rint((x - self.grid[0]) / self.step).astype(int), 0, self.grid.size - 1)
        out = self.values[k]
        return np.where((x < self.lo) | (x > self.hi), -np.inf, out)
