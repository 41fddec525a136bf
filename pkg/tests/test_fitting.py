import math
import warnings

import numpy as np
import pytest

from conftest import random_params
from dsdnet.dmp import ALPHA_Z, BETA_Z, BasisSet, DmpParams, Trajectory, forcing, rollout
from dsdnet.errors import ParameterError, TooShortError
from dsdnet.fitting import (DegenerateDimensionWarning, FitConfig, differentiate, fit_segment,
                            fit_weights_lwr, target_forcing)
from dsdnet.metrics import rmse
from dsdnet.tasks.motion import min_jerk


def span(points):
    return float(np.linalg.norm(points.max(0) - points.min(0)))


def test_differentiate_constant():
    v, a = differentiate(Trajectory(0.1, np.ones((6, 2))))
    assert np.all(v == 0) and np.all(a == 0)


def test_differentiate_ramp():
    t = np.arange(20) * 0.05
    v, a = differentiate(Trajectory(0.05, 3.0 * t))
    np.testing.assert_allclose(v, 3.0, rtol=1e-9)
    np.testing.assert_allclose(a, 0.0, atol=1e-9)


def test_differentiate_quadratic():
    t = np.arange(30) * 0.1
    _, a = differentiate(Trajectory(0.1, t**2))
    np.testing.assert_allclose(a[1:-1], 2.0, atol=1e-9)


def test_differentiate_too_short():
    with pytest.raises(TooShortError):
        differentiate(Trajectory(0.1, np.zeros((2, 1))))


def test_smoothing_keeps_shape():
    tr = Trajectory(0.1, np.random.default_rng(0).normal(size=(15, 3)))
    v, a = differentiate(tr, window=5)
    assert v.shape == a.shape == (15, 3)
    with pytest.raises(ParameterError):
        FitConfig(BasisSet.default(3), window=4)


def test_target_forcing_constant():
    tr = Trajectory(0.01, np.full((40, 2), 0.7))
    x, f = target_forcing(tr, 0.39)
    assert x.shape == (38,) and np.all(f == 0)


def test_target_forcing_recovers_known_forcing():
    rng = np.random.default_rng(5)
    worst = 0.0
    for N in (10, 20, 40):
        b = BasisSet.default(N)
        for _ in range(5):
            p = random_params(rng, N=N)
            tr = rollout(p, b, duration=1.1 * p.tau)
            x, f = target_forcing(tr, p.tau, basis=b)
            keep = x >= 0.01
            F = forcing(x[keep], p, b)
            worst = max(worst, np.abs(f[keep] - F).max() / np.abs(F).max())
    assert worst <= 5e-2


def test_target_forcing_zero_weights():
    p = DmpParams([0.0, 1.0], [1.0, -1.0], 1.0, np.zeros((10, 2)))
    tr = rollout(p, BasisSet.default(10))
    _, f = target_forcing(tr, p.tau)
    assert np.linalg.norm(f, axis=1).max() <= 1e-2 * ALPHA_Z * BETA_Z * np.linalg.norm(p.g - p.y0)


def test_lwr_zero_forcing():
    b = BasisSet.default(10)
    x = np.linspace(0.01, 1, 30)
    w = fit_weights_lwr(x, np.zeros((30, 2)), [0, 0], [1, 2], b)
    assert np.all(w == 0)


def test_lwr_single_sample_closed_form():
    b = BasisSet.default(4)
    x0 = b.centers[1]
    y0, g, f0 = np.array([0.5]), np.array([2.0]), 3.0
    w = fit_weights_lwr([x0], [[f0]], y0, g, b, epsilon=1e-8)
    s = x0 * 1.5
    psi = np.exp(-(x0 - b.centers) ** 2 / (2 * b.widths**2))
    np.testing.assert_allclose(w[:, 0], psi * s * f0 / (psi * s * s + 1e-8), rtol=1e-12)
    assert w[1, 0] == pytest.approx(f0 / s, rel=1e-6)


def test_lwr_degenerate_dimension_warns():
    b = BasisSet.default(5)
    x = np.linspace(0.01, 1, 20)
    with pytest.warns(DegenerateDimensionWarning):
        w = fit_weights_lwr(x, np.ones((20, 2)), [0, 1], [1, 1], b)
    assert np.all(w[:, 1] == 0) and np.any(w[:, 0] != 0)


def _lwr_resynthesis_error(p, b, epsilon=1e-8):
    x = np.exp(-b.alpha_x * np.linspace(0, 1, 400))
    F = forcing(x, p, b)
    w = fit_weights_lwr(x, F, p.y0, p.g, b, epsilon)
    return np.abs(forcing(x, p.replace(w=w), b) - F).max() / np.abs(F).max()


@pytest.mark.xfail(strict=True, reason="per-basis LWR blurs neighbouring weights under the "
                   "overlapping default basis; worst relative error is 10-28% for random weights")
def test_lwr_reproduces_synthetic_forcing():
    rng = np.random.default_rng(2)
    b = BasisSet.default(10)
    worst = max(_lwr_resynthesis_error(random_params(rng, N=10), b) for _ in range(10))
    assert worst <= 5e-2


def test_lwr_exact_for_locally_linear_target():
    b = BasisSet.default(10)
    p = DmpParams([0.2, 0.0], [1.0, -0.5], 1.0, np.tile([[7.0, -3.0]], (10, 1)))
    # without the regularizer the per-basis estimate is exact
    assert _lwr_resynthesis_error(p, b, epsilon=0.0) < 1e-12


def test_fit_min_jerk_line():
    pts = min_jerk([0.1, 0.2], [0.8, 0.5], 1.0, 0.01)
    tr = Trajectory(0.01, pts)
    p = fit_segment(tr, FitConfig.with_basis(20))
    assert p.tau == pytest.approx(1.0)
    np.testing.assert_array_equal(p.y0, pts[0])
    np.testing.assert_array_equal(p.g, pts[-1])
    rec = rollout(p, BasisSet.default(20), dt=0.01)
    assert rmse(rec, tr) <= 0.01 * span(pts)


def test_fit_round_trip_random():
    rng = np.random.default_rng(9)
    for _ in range(20):
        N = int(rng.integers(10, 30))
        b = BasisSet.default(N)
        p = random_params(rng, N=N)
        demo = rollout(p, b)
        q = fit_segment(demo, FitConfig(b))
        assert rmse(rollout(q, b), demo) <= 0.02 * span(demo.points)


def test_fit_constant_segment():
    tr = Trajectory(0.02, np.full((25, 3), -0.4))
    p = fit_segment(tr, FitConfig.with_basis(7))
    assert np.all(p.w == 0) and np.array_equal(p.y0, p.g)
    assert rollout(p, BasisSet.default(7), dt=0.02) == tr


def test_fit_is_deterministic():
    pts = min_jerk([0, 0], [1, 1], 0.5, 0.01)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        a = fit_segment(Trajectory(0.01, pts), FitConfig.with_basis(10))
    assert a == fit_segment(Trajectory(0.01, pts), FitConfig.with_basis(10))
    assert math.isfinite(float(np.abs(a.w).max()))
