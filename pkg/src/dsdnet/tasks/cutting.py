"""Object cutting benchmark: random polygons, a cut planner and a cut scorer.

Viewport coordinates are [0, 1] x [0, 1] with y pointing up. The object
rests on a table line with its left edge under the knife's fixed start
position; cuts are spaced a fixed distance apart to the right.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..dmp import Trajectory
from ..errors import ParameterError
from .geometry import BandTop, is_simple, rasterize_polygon, top_over
from .motion import DT, min_jerk, smoothstep, with_rests

IMAGE_SIZE = 50
TABLE_Y = 0.12
LEFT_X = 0.1
START_Y = 0.92
SPACING = 0.12
CLEARANCE = 0.10
BLADE_HALF_WIDTH = SPACING / 4
PRESS_DEPTH = 0.02
MAX_HEIGHT = 0.5
SPEED = 1.0
MIN_SEGMENT_TIME = 0.3
MAX_CUTS = 7
M_SEGMENTS = 2 * MAX_CUTS - 1


@dataclass(frozen=True)
class PolygonScene:
    vertices: np.ndarray = field(repr=False)
    image: np.ndarray = field(repr=False)
    knife_start: tuple = (LEFT_X, START_Y)
    spacing: float = SPACING
    threshold: float = 0.0
    seed: int | None = None

    @property
    def left(self) -> float:
        return float(self.vertices[:, 0].min())

    @property
    def right(self) -> float:
        return float(self.vertices[:, 0].max())

    @property
    def bottom(self) -> float:
        return float(self.vertices[:, 1].min())

    @property
    def height(self) -> float:
        return float(self.vertices[:, 1].max() - self.vertices[:, 1].min())

    @property
    def width(self) -> float:
        return self.right - self.left

    def local_top(self, x):
        """Highest object point under a knife blade centred at ``x`` (-inf if the blade misses)."""
        band = self.__dict__.get("_band")
        if band is None:
            band = BandTop(self.vertices, BLADE_HALF_WIDTH)
            object.__setattr__(self, "_band", band)
        return band(x)

    def to_dict(self):
        return {
            "task": "cut",
            "vertices": self.vertices.tolist(),
            "knife_start": list(self.knife_start),
            "spacing": self.spacing,
            "threshold": self.threshold,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d, size: int = IMAGE_SIZE):
        v = np.asarray(d["vertices"], dtype=float)
        return cls(v, rasterize(v, size, size), tuple(d["knife_start"]), d["spacing"],
                   d["threshold"], d.get("seed"))


def rasterize(vertices, H: int = IMAGE_SIZE, W: int = IMAGE_SIZE) -> np.ndarray:
    return rasterize_polygon(vertices, H, W)


def make_scene(vertices, seed=None, size: int = IMAGE_SIZE) -> PolygonScene:
    v = np.asarray(vertices, dtype=float)
    height = v[:, 1].max() - v[:, 1].min()
    threshold = v[:, 1].min() + 0.05 * height
    return PolygonScene(v, rasterize(v, size, size), (LEFT_X, START_Y), SPACING, threshold, seed)


def gen_polygon(seed: int, jitter: float = 0.3, size: int = IMAGE_SIZE,
                max_tries: int = 100) -> PolygonScene:
    """Random simple polygon: K points on an ellipse, each pushed radially by up to ``jitter``."""
    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        k = int(rng.integers(6, 13))
        angles = (np.arange(k) + rng.uniform(-0.3, 0.3, k) * (jitter > 0)) * 2 * np.pi / k
        aspect = rng.uniform(0.3, 0.6)
        radii = 1.0 + rng.uniform(-jitter, jitter, k)
        pts = np.c_[radii * np.cos(angles), aspect * radii * np.sin(angles)]
        span = pts.max(0) - pts.min(0)
        width = rng.uniform(0.4, 0.8)
        pts = pts * (width / span[0])
        h = pts[:, 1].max() - pts[:, 1].min()
        if h > MAX_HEIGHT:
            pts[:, 1] *= MAX_HEIGHT / h
        pts = pts - pts.min(0) + [LEFT_X, TABLE_Y]
        if is_simple(pts):
            return make_scene(pts, seed, size)
    raise RuntimeError(f"no simple polygon after {max_tries} tries (seed {seed})")


def stations(scene: PolygonScene) -> np.ndarray:
    """Knife x positions: fixed spacing from the start position across the object."""
    count = int(math.floor(scene.width / scene.spacing + 1e-9)) + 1
    return scene.knife_start[0] + scene.spacing * np.arange(count)


def _duration(length):
    return max(MIN_SEGMENT_TIME, length / SPEED)


def _connector(x0, x1, bottom, hump_top, apex, dt=DT):
    """Rise out of the cut, then curve right onto the next station.

    The sideways move starts only once the knife is halfway through the
    clearance band above ``hump_top``, so it never re-enters the object.
    """
    rise = apex - bottom
    dist = rise + abs(x1 - x0)
    n = max(2, int(math.ceil(_duration(dist) / dt - 1e-9)) + 1)
    u = np.linspace(0.0, 1.0, n)
    u_rise = 0.6
    need = min(1.0, (hump_top - bottom + 0.5 * (apex - hump_top)) / rise)
    # smoothstep is monotone: bisect for the rise fraction at which x may start moving
    lo, hi = 0.0, 1.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if smoothstep(mid) < need else (lo, mid)
    u_side = hi * u_rise
    y = bottom + rise * smoothstep(u / u_rise)
    x = x0 + (x1 - x0) * smoothstep((u - u_side) / (1.0 - u_side))
    return np.c_[x, y]


def plan_cutting(scene: PolygonScene, dt: float = DT) -> Trajectory:
    """Expert cut: down strokes alternating with up-right connectors, 2c - 1 pieces."""
    xs = stations(scene)
    bottom = scene.bottom - PRESS_DEPTH
    pieces = []
    pos = np.array(scene.knife_start, dtype=float)
    for k, x in enumerate(xs):
        if k > 0:
            hump = top_over(scene.vertices, xs[k - 1] - BLADE_HALF_WIDTH, x + BLADE_HALF_WIDTH)
            hump = bottom if hump is None else hump
            apex = hump + CLEARANCE
            pieces.append(_connector(xs[k - 1], x, bottom, hump, apex, dt))
            pos = pieces[-1][-1]
        end = np.array([x, bottom])
        pieces.append(min_jerk(pos, end, _duration(np.linalg.norm(end - pos)), dt))
        pos = end
    return with_rests(pieces, dt=dt)


def eval_cut_success(motion: Trajectory | None, scene: PolygonScene):
    """(successful cuts, attempted cuts).

    An attempt is a downward crossing of the object's top profile under the
    blade; it succeeds if the tip then gets below the threshold line before
    the knife is lifted back above the object.
    """
    if motion is None or len(motion) == 0:
        return 0, 0
    pts = motion.points
    if pts.shape[1] != 2:
        raise ParameterError(f"cutting motion must be 2-DoF, got d={pts.shape[1]}")
    tops = scene.local_top(pts[:, 0])
    attempts = successes = 0
    above = True
    reached = False
    for (x, y), top in zip(pts, tops):
        now_above = y > top
        if above and not now_above:
            attempts += 1
            reached = False
        if not now_above and not reached and y < scene.threshold:
            reached = True
            successes += 1
        above = now_above
    return successes, attempts


def expected_segments(scene: PolygonScene) -> int:
    return 2 * len(stations(scene)) - 1
