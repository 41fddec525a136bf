"""Split demonstrations at short pauses and build fixed-size segment records."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dmp import DmpParams, Trajectory
from .errors import CapacityError, PaddingError, ParameterError
from .fitting import FitConfig, differentiate, fit_segment

SPEED_FRACTION = 0.02
MIN_HOLD = 3


@dataclass(frozen=True)
class EncodedDemo:
    """Fitted segments of one demonstration, before padding."""

    params: tuple
    image: np.ndarray = field(repr=False)
    provenance: dict = field(default_factory=dict)

    @property
    def count(self) -> int:
        return len(self.params)


@dataclass(frozen=True)
class SegmentedRecord:
    """One dataset example: image, exactly M parameter sets, true segment count n."""

    image: np.ndarray = field(repr=False)
    params: tuple
    n: int
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(self.params))
        if not 1 <= self.n <= len(self.params):
            raise ParameterError(f"n={self.n} outside [1, {len(self.params)}]")

    @property
    def M(self) -> int:
        return len(self.params)

    @property
    def fitted(self) -> tuple:
        return self.params[: self.n]


def detect_pauses(traj: Trajectory, speed_eps: float | None = None,
                  min_hold: int = MIN_HOLD) -> list[int]:
    """Centers of interior low-speed runs.

    A run is a maximal stretch of at least ``min_hold`` samples with speed
    below ``speed_eps`` (default: 2% of peak speed). Runs touching the first
    or last sample are ignored. Even-length runs split at the earlier middle.
    """
    if len(traj) < 3:
        return []
    vel, _ = differentiate(traj)
    speed = np.linalg.norm(vel, axis=1)
    if speed_eps is None:
        speed_eps = SPEED_FRACTION * speed.max()
    slow = speed < speed_eps
    T = len(traj)
    out = []
    k = 0
    while k < T:
        if not slow[k]:
            k += 1
            continue
        start = k
        while k < T and slow[k]:
            k += 1
        stop = k  # exclusive
        if stop - start >= min_hold and start > 0 and stop < T:
            out.append(start + (stop - start - 1) // 2)
    return out


def split(traj: Trajectory, indices: Sequence[int]) -> list[Trajectory]:
    """Cut at each index; the split sample ends one segment and starts the next."""
    idx = [int(i) for i in indices]
    T = len(traj)
    if any(i <= 0 or i >= T - 1 for i in idx) or any(b <= a for a, b in zip(idx, idx[1:])):
        raise ParameterError(f"split indices {idx} invalid for {T} samples")
    bounds = [0, *idx, T - 1]
    return [Trajectory(traj.dt, traj.points[a:b + 1]) for a, b in zip(bounds, bounds[1:])]


def join(segments: Sequence[Trajectory]) -> Trajectory:
    """Inverse of ``split``: concatenate, dropping each duplicated junction sample."""
    parts = [segments[0].points] + [s.points[1:] for s in segments[1:]]
    return Trajectory(segments[0].dt, np.concatenate(parts))


def encode_demo(traj: Trajectory, image, M: int, config: FitConfig,
                speed_eps: float | None = None, min_hold: int = MIN_HOLD,
                provenance: dict | None = None) -> EncodedDemo:
    """Detect pauses, split, and fit one primitive per piece."""
    pieces = split(traj, detect_pauses(traj, speed_eps, min_hold))
    if len(pieces) > M:
        raise CapacityError(len(pieces), M, (provenance or {}).get("id"))
    params = tuple(fit_segment(p, config) for p in pieces)
    return EncodedDemo(params, np.asarray(image), dict(provenance or {}))


def mean_params(sets: Sequence[DmpParams]) -> DmpParams:
    """Fieldwise arithmetic mean of y0, g, tau and w."""
    return DmpParams(
        np.mean([p.y0 for p in sets], axis=0),
        np.mean([p.g for p in sets], axis=0),
        float(np.mean([p.tau for p in sets])),
        np.mean([p.w for p in sets], axis=0),
    )


def slot_means(items, M: int) -> list[DmpParams]:
    """Per-slot mean over all items that have a fitted segment in that slot."""
    fitted = [_fitted(it) for it in items]
    means = []
    for i in range(M):
        donors = [f[i] for f in fitted if len(f) > i]
        if not donors:
            raise PaddingError(f"no record has segment slot {i}; cannot pad to M={M}")
        means.append(mean_params(donors))
    return means


def _fitted(item):
    if isinstance(item, SegmentedRecord):
        return item.fitted
    return tuple(item.params)


def pad_records(items, M: int, donors=None) -> list[SegmentedRecord]:
    """Pad every item to M slots with per-slot averages.

    ``items`` are EncodedDemo or SegmentedRecord objects (for the latter the
    first n slots count as fitted). Averages are taken over ``donors``
    (default: ``items`` themselves), e.g. the training split only.
    """
    items = list(items)
    for it in items:
        c = len(_fitted(it))
        if not 1 <= c <= M:
            pid = getattr(it, "provenance", {}).get("id")
            raise CapacityError(c, M, pid)
    means = slot_means(items if donors is None else donors, M)
    out = []
    for it in items:
        fitted = _fitted(it)
        params = tuple(fitted) + tuple(means[len(fitted):])
        out.append(SegmentedRecord(it.image, params, len(fitted), dict(it.provenance)))
    return out
