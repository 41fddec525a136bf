"""Recover a primitive's parameters from one demonstrated segment.

The target forcing term is obtained by solving the transformation system
for F, then each basis weight is estimated independently by locally
weighted regression against the phase-scaled modulation ``x (g - y0)``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .dmp import ALPHA_Z, BETA_Z, BasisSet, DmpParams, Trajectory, phase_at
from .errors import ParameterError, TooShortError


class DegenerateDimensionWarning(UserWarning):
    """A fitted dimension has g == y0, so its forcing term is identically zero."""


@dataclass(frozen=True)
class FitConfig:
    basis: BasisSet
    window: int = 1
    epsilon: float = 1e-8

    def __post_init__(self):
        if self.window < 1 or self.window % 2 == 0:
            raise ParameterError(f"smoothing window must be odd and >= 1, got {self.window}")
        if self.epsilon < 0:
            raise ParameterError("epsilon must be non-negative")

    @classmethod
    def with_basis(cls, n: int, **kw) -> "FitConfig":
        return cls(BasisSet.default(n), **kw)


def _smooth(a, window):
    if window == 1:
        return a
    # moving average with edge replication keeps the shape
    pad = window // 2
    padded = np.pad(a, ((pad, pad), (0, 0)), mode="edge")
    kernel = np.ones(window) / window
    return np.stack([np.convolve(padded[:, j], kernel, mode="valid")
                     for j in range(a.shape[1])], axis=1)


def differentiate(traj: Trajectory, window: int = 1):
    """Velocity and acceleration by finite differences.

    Interior samples use central differences (the second difference for
    acceleration, exact on quadratics); the first and last sample reuse
    one-sided stencils.
    """
    y = traj.points
    if len(traj) < 3:
        raise TooShortError(f"need at least 3 samples to differentiate, got {len(traj)}")
    y = _smooth(y, window)
    dt = traj.dt
    vel = np.empty_like(y)
    vel[1:-1] = (y[2:] - y[:-2]) / (2 * dt)
    vel[0] = (y[1] - y[0]) / dt
    vel[-1] = (y[-1] - y[-2]) / dt
    acc = np.empty_like(y)
    acc[1:-1] = (y[2:] - 2 * y[1:-1] + y[:-2]) / dt**2
    acc[0] = acc[1]
    acc[-1] = acc[-2]
    return _smooth(vel, window), _smooth(acc, window)


def target_forcing(traj: Trajectory, tau: float, alpha_z=ALPHA_Z, beta_z=BETA_Z,
                   basis: BasisSet | None = None, window: int = 1):
    """Phases and forcing values the demonstration implies at its interior samples.

    Returns ``(x, f)`` with shapes (T-2,) and (T-2, d).
    """
    if not tau > 0:
        raise ParameterError(f"tau must be positive, got {tau}")
    vel, acc = differentiate(traj, window)
    y = traj.points
    g = y[-1]
    f = tau**2 * acc - np.asarray(alpha_z) * (np.asarray(beta_z) * (g - y) - tau * vel)
    x = phase_at(traj.times, tau, basis)
    return x[1:-1], f[1:-1]


def fit_weights_lwr(x, f, y0, g, basis: BasisSet, epsilon: float = 1e-8) -> np.ndarray:
    """Per-basis weighted least squares for the weights (N x d).

    w_ij = sum_k psi_i(x_k) s_kj f_kj / (sum_k psi_i(x_k) s_kj^2 + epsilon),
    s_kj = x_k (g_j - y0_j).  Dimensions with g_j == y0_j get zero weights.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    f = np.asarray(f, dtype=float).reshape(x.size, -1)
    if x.size == 0:
        raise ParameterError("need at least one sample")
    delta = np.asarray(g, dtype=float) - np.asarray(y0, dtype=float)
    if delta.size != f.shape[1]:
        raise ParameterError("y0/g dimension does not match forcing samples")
    psi = np.exp(-(x[:, None] - basis.centers) ** 2 / (2.0 * basis.widths**2))  # (K, N)
    w = np.zeros((basis.n, delta.size))
    degenerate = []
    for j, dj in enumerate(delta):
        if dj == 0.0:
            degenerate.append(j)
            continue
        s = x * dj
        num = psi.T @ (s * f[:, j])
        den = psi.T @ (s * s) + epsilon
        w[:, j] = num / den
    if degenerate:
        warnings.warn(f"g == y0 in dimension(s) {degenerate}; weights set to zero",
                      DegenerateDimensionWarning, stacklevel=2)
    return w


def fit_segment(traj: Trajectory, config: FitConfig) -> DmpParams:
    """Fit start, goal, tau and weights to one segment."""
    y0 = traj.points[0]
    g = traj.points[-1]
    tau = traj.duration
    if np.array_equal(y0, g) and np.all(traj.points == y0):
        return DmpParams(y0, g, tau, np.zeros((config.basis.n, traj.d)))
    x, f = target_forcing(traj, tau, ALPHA_Z, BETA_Z, config.basis, config.window)
    w = fit_weights_lwr(x, f, y0, g, config.basis, config.epsilon)
    return DmpParams(y0, g, tau, w)
