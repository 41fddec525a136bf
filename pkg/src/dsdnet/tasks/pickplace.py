"""Pick-and-place benchmark with a kinematic gripper.

Motions are 4-DoF: x, y, z and gripper aperture (1 open, 0 closed). The
table is z = 0; objects are cubes of side OBJECT_SIZE.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..dmp import Trajectory
from ..errors import ParameterError
from .geometry import pixel_centers
from .motion import DT, min_jerk, staged, with_rests

COLORS = ("red", "yellow", "blue")
GRAY_LEVELS = {"red": 0.4, "yellow": 0.7, "blue": 1.0}
TARGET_GRAY = 0.2
IMAGE_SIZE = 50
OBJECT_SIZE = 0.1
TARGET_RADIUS = 0.06
GRASP_RADIUS = OBJECT_SIZE / 2
PLACE_RADIUS = OBJECT_SIZE / 2
GRASP_HEIGHT = OBJECT_SIZE
Z_HIGH = 0.25
Z_GRASP = OBJECT_SIZE / 2
Z_PLACE = OBJECT_SIZE * 0.6
HOME = (0.35, 0.5, 0.3, 1.0)
FIXED_OBJECTS = {"red": (0.2, 0.75), "yellow": (0.5, 0.8), "blue": (0.8, 0.75)}
FIXED_TARGET = (0.5, 0.25)
MIN_SEPARATION = 0.2
SPEED = 0.8
MIN_SEGMENT_TIME = 0.5
GRIP_SEGMENT_TIME = 0.8
SEGMENTS_PER_OBJECT = 4
M_SEGMENTS = SEGMENTS_PER_OBJECT * len(COLORS)


@dataclass(frozen=True)
class PickPlaceScene:
    objects: dict  # color -> (x, y) for present objects
    target: tuple
    mode: str = "fixed"
    home: tuple = HOME
    seed: int | None = None
    image: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.image is None:
            object.__setattr__(self, "image", render(self))

    @property
    def present(self) -> list[str]:
        return [c for c in COLORS if c in self.objects]

    def to_dict(self):
        return {
            "task": f"pickplace-{self.mode}",
            "objects": {c: list(p) for c, p in self.objects.items()},
            "target": list(self.target),
            "mode": self.mode,
            "home": list(self.home),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d):
        return cls({c: tuple(p) for c, p in d["objects"].items()}, tuple(d["target"]),
                   d["mode"], tuple(d["home"]), d.get("seed"))


def render(scene: PickPlaceScene, size: int = IMAGE_SIZE) -> np.ndarray:
    """Top view: target disc and gray-coded object squares on black."""
    X, Y = pixel_centers(size, size)
    img = np.zeros((size, size))
    tx, ty = scene.target
    img[(X - tx) ** 2 + (Y - ty) ** 2 <= TARGET_RADIUS**2] = TARGET_GRAY
    half = OBJECT_SIZE / 2
    for color, (ox, oy) in scene.objects.items():
        img[(np.abs(X - ox) <= half) & (np.abs(Y - oy) <= half)] = GRAY_LEVELS[color]
    return img


def _subset(rng):
    while True:
        flags = rng.random(3) < 0.5
        if flags.any():
            return [c for c, f in zip(COLORS, flags) if f]


def gen_pickplace(seed: int, mode: str = "fixed") -> PickPlaceScene:
    """1-3 objects; fixed positions in ``fixed`` mode, random non-overlapping in ``random`` mode."""
    rng = np.random.default_rng(seed)
    colors = _subset(rng)
    if mode == "fixed":
        return PickPlaceScene({c: FIXED_OBJECTS[c] for c in colors}, FIXED_TARGET, mode, HOME, seed)
    if mode != "random":
        raise ParameterError(f"unknown pick-and-place mode {mode!r}")
    for _ in range(1000):
        pts = rng.uniform(0.12, 0.88, size=(len(colors) + 1, 2))
        d = np.linalg.norm(pts[:, None] - pts[None], axis=2)
        if np.all(d[np.triu_indices(len(pts), 1)] >= MIN_SEPARATION):
            objects = {c: tuple(map(float, p)) for c, p in zip(colors, pts[1:])}
            return PickPlaceScene(objects, tuple(map(float, pts[0])), mode, HOME, seed)
    raise RuntimeError(f"could not place objects without overlap (seed {seed})")


def _move_time(a, b):
    return max(MIN_SEGMENT_TIME, float(np.linalg.norm(np.asarray(b[:3]) - np.asarray(a[:3]))) / SPEED)


def plan_pickplace(scene: PickPlaceScene, dt: float = DT) -> Trajectory:
    """Four pieces per object (approach, descend+close, transport, descend+open),
    objects taken red, yellow, blue."""
    # z settles before the gripper finishes, with overlap so the motion never stalls mid-piece
    grip_windows = [(0.0, 1.0), (0.0, 1.0), (0.0, 0.7), (0.5, 1.0)]
    pos = np.array(scene.home, dtype=float)
    tx, ty = scene.target
    pieces = []
    for color in scene.present:
        ox, oy = scene.objects[color]
        above = np.array([ox, oy, Z_HIGH, 1.0])
        grasp = np.array([ox, oy, Z_GRASP, 0.0])
        over_target = np.array([tx, ty, Z_HIGH, 0.0])
        release = np.array([tx, ty, Z_PLACE, 1.0])
        pieces.append(min_jerk(pos, above, _move_time(pos, above), dt))
        pieces.append(staged(above, grasp, grip_windows, GRIP_SEGMENT_TIME, dt))
        pieces.append(min_jerk(grasp, over_target, _move_time(grasp, over_target), dt))
        pieces.append(staged(over_target, release, grip_windows, GRIP_SEGMENT_TIME, dt))
        pos = release
    return with_rests(pieces, dt=dt)


def eval_pickplace(motion: Trajectory | None, scene: PickPlaceScene):
    """Kinematic grasp emulation.

    Returns ``(flags, overall)``: ``flags[color]`` is True when that object
    was released within PLACE_RADIUS of the target; ``overall`` also needs
    every present object placed and released in red, yellow, blue order.
    """
    flags = {c: False for c in scene.present}
    if motion is None or len(motion) == 0:
        return flags, False
    pts = motion.points
    if pts.shape[1] != 4:
        raise ParameterError(f"pick-and-place motion must be 4-DoF, got d={pts.shape[1]}")
    positions = {c: np.array(scene.objects[c], dtype=float) for c in scene.present}
    held = None
    order = []
    target = np.asarray(scene.target, dtype=float)
    prev_open = pts[0, 3] >= 0.5
    for x, y, z, a in pts:
        is_open = a >= 0.5
        if held is None and prev_open and not is_open:
            for c in scene.present:
                if c in order:
                    continue
                if math.hypot(x - positions[c][0], y - positions[c][1]) < GRASP_RADIUS and z < GRASP_HEIGHT:
                    held = c
                    break
        elif held is not None and not prev_open and is_open:
            positions[held] = np.array([x, y])
            flags[held] = bool(np.linalg.norm(positions[held] - target) <= PLACE_RADIUS)
            order.append(held)
            held = None
        if held is not None:
            positions[held] = np.array([x, y])
        prev_open = is_open
    overall = all(flags.values()) and order == scene.present
    return flags, overall


def expected_segments(scene: PickPlaceScene) -> int:
    return SEGMENTS_PER_OBJECT * len(scene.present)
