"""Trajectory comparison: arc-length resampling, RMSE, DTW, success aggregation."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .dmp import Trajectory
from .errors import ParameterError


def _points(a):
    if isinstance(a, Trajectory):
        return a.points
    a = np.asarray(a, dtype=float)
    return a[:, None] if a.ndim == 1 else a


def resample(traj, L: int) -> np.ndarray:
    """``L`` points at equal arc-length fractions along the polyline.

    Endpoints are kept exactly. A path of zero length yields its single
    position repeated.
    """
    pts = _points(traj)
    if L < 2:
        raise ParameterError(f"resample length must be >= 2, got {L}")
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    total = s[-1]
    if total == 0.0:
        return np.repeat(pts[:1], L, axis=0)
    targets = np.linspace(0.0, total, L)
    out = np.empty((L, pts.shape[1]))
    for j in range(pts.shape[1]):
        out[:, j] = np.interp(targets, s, pts[:, j])
    out[0] = pts[0]
    out[-1] = pts[-1]
    return out


def rmse(a, b) -> float:
    """Root mean squared point distance after resampling both to the longer length."""
    pa, pb = _points(a), _points(b)
    if pa.shape[1] != pb.shape[1]:
        raise ParameterError(f"dimension mismatch: {pa.shape[1]} vs {pb.shape[1]}")
    if len(pa) == 0 or len(pb) == 0:
        raise ParameterError("rmse needs non-empty trajectories")
    L = max(len(pa), len(pb), 2)
    ra, rb = resample(pa, L), resample(pb, L)
    return float(np.sqrt(np.mean(np.sum((ra - rb) ** 2, axis=1))))


def dtw(a, b) -> float:
    """Total cost of the best monotone alignment (steps (1,0), (0,1), (1,1)),
    Euclidean point cost, both endpoints anchored, no window."""
    pa, pb = _points(a), _points(b)
    if pa.shape[1] != pb.shape[1]:
        raise ParameterError(f"dimension mismatch: {pa.shape[1]} vs {pb.shape[1]}")
    n, m = len(pa), len(pb)
    if n == 0 or m == 0:
        raise ParameterError("dtw needs non-empty trajectories")
    cost = cdist(pa, pb)
    # sweep anti-diagonals k = i + j; cells on one diagonal are independent
    inf = np.inf
    prev2 = np.full(n, inf)  # diagonal k-2, indexed by i
    prev1 = np.full(n, inf)  # diagonal k-1
    prev1[0] = cost[0, 0]
    for k in range(1, n + m - 1):
        lo, hi = max(0, k - m + 1), min(n - 1, k)
        i = np.arange(lo, hi + 1)
        j = k - i
        best = np.full(i.size, inf)
        # from (i-1, j): diagonal k-1 at index i-1
        ok = i >= 1
        best[ok] = prev1[i[ok] - 1]
        # from (i, j-1): diagonal k-1 at index i
        ok = j >= 1
        best[ok] = np.minimum(best[ok], prev1[i[ok]])
        # from (i-1, j-1): diagonal k-2 at index i-1
        ok = (i >= 1) & (j >= 1)
        best[ok] = np.minimum(best[ok], prev2[i[ok] - 1])
        cur = np.full(n, inf)
        cur[i] = best + cost[i, j]
        prev2, prev1 = prev1, cur
    return float(prev1[n - 1])


@dataclass
class EvalRow:
    id: str
    rmse: float
    dtw: float
    successes: int
    attempts: int
    overall: bool | None = None


@dataclass
class EvalReport:
    rows: list = field(default_factory=list)
    mean_rmse: float = 0.0
    mean_dtw: float = 0.0
    success_rate: float = 0.0
    overall_rate: float | None = None

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["id", "rmse", "dtw", "successes", "attempts", "overall"])
        for r in self.rows:
            w.writerow([r.id, repr(r.rmse), repr(r.dtw), r.successes, r.attempts,
                        "" if r.overall is None else int(r.overall)])
        w.writerow(["aggregate", repr(self.mean_rmse), repr(self.mean_dtw),
                    sum(r.successes for r in self.rows), sum(r.attempts for r in self.rows),
                    "" if self.overall_rate is None else repr(self.overall_rate)])
        return buf.getvalue()

    def table(self, title: str = "") -> str:
        lines = [title] if title else []
        lines.append(f"{'id':>10} {'RMSE':>10} {'DTW':>12} {'succ':>5} {'att':>5}")
        for r in self.rows:
            lines.append(f"{r.id:>10} {r.rmse:10.4f} {r.dtw:12.4f} {r.successes:5d} {r.attempts:5d}")
        lines.append(f"{'mean':>10} {self.mean_rmse:10.4f} {self.mean_dtw:12.4f}")
        lines.append(f"success rate: {self.success_rate:.3f}%")
        if self.overall_rate is not None:
            lines.append(f"overall task success: {self.overall_rate:.3f}%")
        return "\n".join(lines)


def aggregate(rows) -> EvalReport:
    """Means of RMSE and DTW and the pooled success percentage."""
    rows = list(rows)
    if not rows:
        raise ParameterError("aggregate needs at least one row")
    succ = sum(r.successes for r in rows)
    att = sum(r.attempts for r in rows)
    overall = [r.overall for r in rows if r.overall is not None]
    return EvalReport(
        rows=rows,
        mean_rmse=float(np.mean([r.rmse for r in rows])),
        mean_dtw=float(np.mean([r.dtw for r in rows])),
        success_rate=100.0 * succ / att if att else 0.0,
        overall_rate=100.0 * sum(overall) / len(overall) if overall else None,
    )
