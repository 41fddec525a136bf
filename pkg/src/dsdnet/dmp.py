"""Discrete dynamic movement primitives.

A primitive is the critically damped spring-damper

    tau * dz/dt = alpha_z * (beta_z * (g - y) - z) + F(x)
    tau * dy/dt = z

driven by a forcing term built from Gaussian basis functions over a phase
variable ``x`` that decays from 1 towards 0:

    F(x) = sum_i psi_i(x) w_i / sum_i psi_i(x) * x * (g - y0)
    psi_i(x) = exp(-(x - c_i)^2 / (2 sigma_i^2))
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DegenerateBasisError, NumericalBlowupError, ParameterError

X_FINAL = 0.01
ALPHA_X = -math.log(X_FINAL)
ALPHA_Z = 25.0
BETA_Z = ALPHA_Z / 4.0
STEPS_PER_TAU = 250
MAX_STEPS_PER_TAU = 10000
SETTLE_FACTOR = 1.0
CONVERGENCE_TOL = 2e-2
UNIT_FLOOR = 1e-6
PSI_SUM_FLOOR = 1e-12


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class BasisSet:
    """Gaussian basis functions laid out over the phase variable."""

    centers: np.ndarray
    widths: np.ndarray
    alpha_x: float = ALPHA_X

    def __post_init__(self):
        centers = _frozen(np.atleast_1d(self.centers))
        widths = _frozen(np.atleast_1d(self.widths))
        if centers.ndim != 1 or centers.size < 1:
            raise ParameterError("basis needs at least one center")
        if widths.shape != centers.shape:
            raise ParameterError("centers and widths must have equal length")
        if np.any(widths <= 0) or not np.all(np.isfinite(widths)):
            raise ParameterError("basis widths must be positive")
        if not self.alpha_x > 0:
            raise ParameterError("alpha_x must be positive")
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "widths", widths)
        object.__setattr__(self, "alpha_x", float(self.alpha_x))

    @classmethod
    def default(cls, n: int, alpha_x: float = ALPHA_X) -> "BasisSet":
        """Centers equally spaced in time over one tau, widths so that
        neighbours meet at exp(-1/2)."""
        n = int(n)
        if n < 1:
            raise ParameterError(f"basis count must be >= 1, got {n}")
        if n == 1:
            return cls(np.array([1.0]), np.array([1.0]), alpha_x)
        centers = np.exp(-alpha_x * np.linspace(0.0, 1.0, n))
        gaps = np.abs(np.diff(centers))
        widths = np.append(gaps / 2.0, gaps[-1] / 2.0)
        return cls(centers, widths, alpha_x)

    @property
    def n(self) -> int:
        return self.centers.size

    def to_dict(self):
        return {
            "centers": self.centers.tolist(),
            "widths": self.widths.tolist(),
            "alpha_x": self.alpha_x,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["centers"]), np.asarray(d["widths"]), d["alpha_x"])


@dataclass(frozen=True)
class DmpParams:
    """Parameter set of one primitive: start, goal, time constant, weights (N x d)."""

    y0: np.ndarray
    g: np.ndarray
    tau: float
    w: np.ndarray
    alpha_z: float | np.ndarray = ALPHA_Z
    beta_z: float | np.ndarray = BETA_Z

    def __post_init__(self):
        y0 = _frozen(np.atleast_1d(self.y0))
        g = _frozen(np.atleast_1d(self.g))
        w = np.array(self.w, dtype=float)
        if w.ndim == 1:
            w = w[:, None]
        w = _frozen(w)
        if y0.ndim != 1 or g.shape != y0.shape:
            raise ParameterError(f"y0 {y0.shape} and g {g.shape} must be equal-length vectors")
        if w.ndim != 2 or w.shape[1] != y0.size:
            raise ParameterError(f"weights shape {w.shape} incompatible with d={y0.size}")
        tau = float(self.tau)
        if not tau > 0 or not math.isfinite(tau):
            raise ParameterError(f"tau must be positive, got {tau}")
        object.__setattr__(self, "y0", y0)
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "tau", tau)

    @property
    def d(self) -> int:
        return self.y0.size

    @property
    def n_basis(self) -> int:
        return self.w.shape[0]

    def replace(self, **changes) -> "DmpParams":
        fields = dict(y0=self.y0, g=self.g, tau=self.tau, w=self.w,
                      alpha_z=self.alpha_z, beta_z=self.beta_z)
        fields.update(changes)
        return DmpParams(**fields)

    def to_dict(self):
        return {
            "y0": self.y0.tolist(),
            "g": self.g.tolist(),
            "tau": self.tau,
            "w": self.w.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["y0"]), np.asarray(d["g"]), d["tau"], np.asarray(d["w"]))

    def __eq__(self, other):
        if not isinstance(other, DmpParams):
            return NotImplemented
        return (self.tau == other.tau
                and np.array_equal(self.y0, other.y0)
                and np.array_equal(self.g, other.g)
                and np.array_equal(self.w, other.w)
                and np.array_equal(self.alpha_z, other.alpha_z)
                and np.array_equal(self.beta_z, other.beta_z))

    __hash__ = None


@dataclass(frozen=True)
class Trajectory:
    """Positions sampled every ``dt`` seconds, shape (T, d)."""

    dt: float
    points: np.ndarray = field(repr=False)

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2:
            raise ParameterError(f"points must be (T, d), got shape {pts.shape}")
        if not float(self.dt) > 0:
            raise ParameterError(f"dt must be positive, got {self.dt}")
        if not np.all(np.isfinite(pts)):
            raise ParameterError("trajectory contains non-finite values")
        object.__setattr__(self, "points", _frozen(pts))
        object.__setattr__(self, "dt", float(self.dt))

    def __len__(self):
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    @property
    def duration(self) -> float:
        return (len(self) - 1) * self.dt

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self)) * self.dt

    def __eq__(self, other):
        if not isinstance(other, Trajectory):
            return NotImplemented
        return self.dt == other.dt and np.array_equal(self.points, other.points)

    __hash__ = None


def phase_at(t, tau: float, basis: BasisSet | None = None):
    """Phase of the canonical system ``tau dx/dt = -alpha_x x`` with x(0) = 1."""
    if not tau > 0:
        raise ParameterError(f"tau must be positive, got {tau}")
    alpha_x = ALPHA_X if basis is None else basis.alpha_x
    return np.exp(-alpha_x * np.asarray(t, dtype=float) / tau)


def basis_activations(x, basis: BasisSet) -> np.ndarray:
    """psi_i(x) for every basis; shape (N,) for scalar x, (K, N) for K phases."""
    x = np.asarray(x, dtype=float)
    diff = x[..., None] - basis.centers
    return np.exp(-diff**2 / (2.0 * basis.widths**2))


def _normalized_activations(x, basis):
    psi = basis_activations(x, basis)
    total = psi.sum(axis=-1, keepdims=True)
    if np.any(total < PSI_SUM_FLOOR):
        bad = np.atleast_1d(x)[np.atleast_1d(total[..., 0] < PSI_SUM_FLOOR)][0]
        raise DegenerateBasisError(
            f"basis activations vanish at phase {bad:.3g}; centers/widths do not cover it")
    return psi / total


def forcing(x, params: DmpParams, basis: BasisSet) -> np.ndarray:
    """Forcing term F(x); shape (d,) for scalar x, (K, d) for K phases."""
    _check_basis(params, basis)
    x = np.asarray(x, dtype=float)
    mix = _normalized_activations(x, basis) @ params.w
    return mix * x[..., None] * (params.g - params.y0)


def _check_basis(params, basis):
    if params.n_basis != basis.n:
        raise ParameterError(
            f"weights have {params.n_basis} rows but basis has {basis.n} functions")


def n_rows(duration: float, dt: float) -> int:
    """Number of samples covering ``duration`` at spacing ``dt`` (both ends included)."""
    ratio = duration / dt
    steps = math.ceil(ratio - 1e-9 * max(1.0, ratio))
    return max(steps, 1) + 1


def rollout(params: DmpParams, basis: BasisSet, dt: float | None = None,
            duration: float | None = None) -> Trajectory:
    """Integrate one primitive from y0 at rest with explicit Euler steps.

    ``dt`` is the output sampling period (default tau/250). When it is
    coarser than tau/10000 the integration is sub-stepped so that the
    internal Euler step never exceeds tau/10000.
    """
    _check_basis(params, basis)
    tau = params.tau
    if dt is None:
        dt = tau / STEPS_PER_TAU
    if duration is None:
        duration = SETTLE_FACTOR * tau
    if not dt > 0:
        raise ParameterError(f"dt must be positive, got {dt}")
    if duration < dt * (1 - 1e-9):
        raise ParameterError(f"duration {duration} shorter than dt {dt}")

    rows = n_rows(duration, dt)
    sub = max(1, math.ceil(dt * MAX_STEPS_PER_TAU / tau - 1e-9))
    h = dt / sub
    total_steps = (rows - 1) * sub

    t = np.arange(total_steps) * h
    x = phase_at(t, tau, basis)
    with np.errstate(over="ignore", invalid="ignore"):  # non-finite results are reported below
        f = _normalized_activations(x, basis) @ params.w * x[:, None] * (params.g - params.y0)
    spring = np.broadcast_to(np.asarray(params.alpha_z) * np.asarray(params.beta_z), (params.d,))
    damp = np.broadcast_to(np.asarray(params.alpha_z, dtype=float), (params.d,))

    out = np.empty((rows, params.d))
    # scalar loops per dimension: same IEEE operations as the vector form, ~10x faster
    for j in range(params.d):
        y, z, g = float(params.y0[j]), 0.0, float(params.g[j])
        kz, kd = float(spring[j]), float(damp[j])
        fj = f[:, j].tolist()
        col = [y]
        k = 0
        for _ in range(rows - 1):
            for _ in range(sub):
                dz = (kz * (g - y) - kd * z + fj[k]) / tau
                y = y + h * (z / tau)
                z = z + h * dz
                k += 1
            col.append(y)
        out[:, j] = col
    if not np.all(np.isfinite(out)):
        bad = int(np.argmax(~np.all(np.isfinite(out), axis=1)))
        raise NumericalBlowupError(bad * sub)
    return Trajectory(dt, out)


def rollout_batch(param_sets: Sequence[DmpParams], basis: BasisSet,
                  dt: float | None = None) -> list[Trajectory]:
    """Roll out every segment over its own tau; same results as a loop over ``rollout``."""
    param_sets = list(param_sets)
    if param_sets:
        d = param_sets[0].d
        if any(p.d != d for p in param_sets):
            raise ParameterError("all parameter sets in a batch must share d")
    return [rollout(p, basis, dt) for p in param_sets]


def concat_segments(segments: Sequence[Trajectory], n: int) -> Trajectory:
    """Stack the first ``n`` segments end to end."""
    segments = list(segments)
    if not 1 <= n <= len(segments):
        raise ParameterError(f"n={n} outside [1, {len(segments)}]")
    used = segments[:n]
    dt, d = used[0].dt, used[0].d
    for s in used[1:]:
        if s.d != d or not math.isclose(s.dt, dt, rel_tol=1e-12):
            raise ParameterError("segments must share d and dt")
    if n == 1:
        return used[0]
    return Trajectory(dt, np.concatenate([s.points for s in used], axis=0))
