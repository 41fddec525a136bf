"""Building blocks for expert demonstrations."""

from __future__ import annotations

import math

import numpy as np

from ..dmp import Trajectory

DT = 0.01
REST_SAMPLES = 10


def smoothstep(v):
    """Quintic minimum-jerk profile on [0, 1] with zero end velocity and acceleration."""
    v = np.clip(v, 0.0, 1.0)
    return v**3 * (10 - 15 * v + 6 * v**2)


def min_jerk(a, b, duration: float, dt: float = DT) -> np.ndarray:
    """Straight minimum-jerk path from ``a`` to ``b`` sampled at ``dt`` (both ends included)."""
    a, b = np.asarray(a, float), np.asarray(b, float)
    n = max(2, int(math.ceil(duration / dt - 1e-9)) + 1)
    s = smoothstep(np.linspace(0.0, 1.0, n))
    return a + s[:, None] * (b - a)


def staged(a, b, windows, duration: float, dt: float = DT) -> np.ndarray:
    """Per-dimension minimum-jerk moves, dimension j active during ``windows[j]``
    (fractions of the segment duration)."""
    a, b = np.asarray(a, float), np.asarray(b, float)
    n = max(2, int(math.ceil(duration / dt - 1e-9)) + 1)
    u = np.linspace(0.0, 1.0, n)
    out = np.empty((n, a.size))
    for j, (lo, hi) in enumerate(windows):
        out[:, j] = a[j] + smoothstep((u - lo) / (hi - lo)) * (b[j] - a[j])
    return out


def with_rests(pieces, rest: int = REST_SAMPLES, dt: float = DT) -> Trajectory:
    """Chain pieces, holding still for ``rest`` samples at every junction.

    Consecutive pieces must share their junction point; it is not repeated.
    """
    rows = [pieces[0]]
    for p in pieces[1:]:
        rows.append(np.repeat(p[:1], rest, axis=0))
        rows.append(p[1:])
    return Trajectory(dt, np.concatenate(rows))
