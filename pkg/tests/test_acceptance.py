"""Acceptance criteria 1-10, one PASS/FAIL line each."""

import itertools
import time
import warnings

import numpy as np
import pytest

from conftest import random_params
from dsdnet.baseline import CIMEDNet, baseline_fit_labels
from dsdnet.cli import main
from dsdnet.data import TASKS, evaluate_motions, make_dataset
from dsdnet.dmp import BasisSet, DmpParams, rollout
from dsdnet.fitting import FitConfig, fit_segment
from dsdnet.metrics import aggregate, dtw, resample, rmse
from dsdnet.model import DSDNet, NetworkSpec, fit_stats, pack_record
from dsdnet.segmentation import SegmentedRecord, detect_pauses, encode_demo, join, pad_records, split
from dsdnet.tasks import cutting


@pytest.fixture
def verdict(capsys):
    def report(k, ok, detail):
        with capsys.disabled():
            print(f"\nCRITERION {k}: {'PASS' if ok else 'FAIL'} {detail}")
        assert ok, f"criterion {k}: {detail}"
    return report


def span(points):
    return float(np.ptp(points, axis=0).max())


# 1. DMP engine properties

def test_criterion_1_dmp_properties(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    goal = scaling = temporal = 0.0
    fixed_ok = True
    for _ in range(40):
        N = int(rng.integers(5, 30))
        d = int(rng.integers(1, 4))
        b = BasisSet.default(N)
        p = random_params(rng, N=N, d=d)
        a = rollout(p, b)
        goal = max(goal, np.linalg.norm(a.points[-1] - p.g) / np.linalg.norm(p.g - p.y0))

        s = rng.uniform(-3, 3, d)
        y0b = rng.uniform(-1, 1, d)
        q = p.replace(y0=y0b, g=y0b + s * (p.g - p.y0))
        expected = y0b + s * (a.points - p.y0)
        ref = np.abs(expected - y0b).max() + np.abs(y0b).max()
        scaling = max(scaling, np.abs(rollout(q, b).points - expected).max() / ref)

        slow = p.replace(tau=2 * p.tau)
        sp = span(a.points)
        same_rel = dtw(a.points, rollout(slow, b).points) / sp
        same_abs = dtw(a.points, rollout(slow, b, dt=p.tau / 250).points[::2]) / sp
        temporal = max(temporal, same_rel, same_abs)

        rest = DmpParams(p.y0, p.y0, p.tau, np.zeros((N, d)))
        fixed_ok &= bool(np.all(rollout(rest, b).points == p.y0))
    elapsed = time.perf_counter() - t0
    ok = goal <= 2e-2 and scaling <= 1e-9 and temporal <= 1e-3 and fixed_ok and elapsed < 10
    verdict(1, ok, f"goal {goal:.2e} <= 2e-2, spatial {scaling:.2e} <= 1e-9, "
                   f"temporal DTW/span {temporal:.2e} <= 1e-3, fixed point exact={fixed_ok}, "
                   f"{elapsed:.1f}s < 10s")


# 2. Fitting round trip

def test_criterion_2_fit_round_trip(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(202)
    worst = 0.0
    for _ in range(100):
        N = int(rng.integers(10, 31))
        b = BasisSet.default(N)
        demo = rollout(random_params(rng, N=N, w_max=50), b)
        q = fit_segment(demo, FitConfig(b))
        worst = max(worst, rmse(rollout(q, b), demo) / span(demo.points))
    elapsed = time.perf_counter() - t0
    verdict(2, worst <= 0.02 and elapsed < 60,
            f"worst RMSE/span {worst:.4f} <= 0.02 over 100 cases, {elapsed:.1f}s < 60s")


# 3. Reconstruction error and weight range versus basis count

def test_criterion_3_basis_count_sweep(verdict):
    x0 = cutting.LEFT_X
    width = 4 * cutting.SPACING
    verts = [[x0, cutting.TABLE_Y], [x0 + width, cutting.TABLE_Y],
             [x0 + width, cutting.TABLE_Y + 0.3], [x0, cutting.TABLE_Y + 0.3]]
    scene = cutting.make_scene(verts)
    demo = cutting.plan_cutting(scene)
    assert cutting.expected_segments(scene) == 9
    medians, rmses, wmax = [], [], []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for N in (5, 10, 20, 50, 100):
            p = baseline_fit_labels(demo, N)
            rec = rollout(p, BasisSet.default(N), demo.dt)
            T = max(len(rec), len(demo))
            dist = np.linalg.norm(resample(rec.points, T) - resample(demo.points, T), axis=1)
            medians.append(float(np.median(dist)))
            rmses.append(rmse(rec, demo))
            wmax.append(float(np.abs(p.w).max()))
    mono = all(b <= a for a, b in zip(medians, medians[1:]))
    mono_rmse = all(b <= a for a, b in zip(rmses, rmses[1:]))
    grows = wmax[4] > wmax[1]
    verdict(3, mono and mono_rmse and grows,
            "median error " + "/".join(f"{m:.4f}" for m in medians) + " non-increasing, "
            f"max|w| N=100 {wmax[4]:.3g} > N=10 {wmax[1]:.3g}")


# 4. DTW against exhaustive enumeration

def enumerate_dtw(a, b):
    n, m = len(a), len(b)
    cost = np.linalg.norm(a[:, None] - b[None], axis=2)
    best = np.inf
    # each monotone path is a sequence of steps (1,0), (0,1), (1,1) from (0,0) to (n-1,m-1)
    for diag in range(min(n, m)):
        down, right = n - 1 - diag, m - 1 - diag
        for order in set(itertools.permutations("d" * diag + "v" * down + "h" * right)):
            i = j = 0
            total = cost[0, 0]
            for s in order:
                i += s in "dv"
                j += s in "dh"
                total += cost[i, j]
            best = min(best, total)
    return best


def test_criterion_4_dtw_oracle(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(404)
    worst = 0.0
    for _ in range(500):
        a = rng.normal(size=(rng.integers(1, 7), 2))
        b = rng.normal(size=(rng.integers(1, 7), 2))
        worst = max(worst, abs(dtw(a, b) - enumerate_dtw(a, b)), abs(dtw(a, b) - dtw(b, a)))
        worst = max(worst, dtw(a, a))
    elapsed = time.perf_counter() - t0
    verdict(4, worst <= 1e-12 and elapsed < 30,
            f"max |dtw - enumeration|, asymmetry, dtw(a,a) = {worst:.1e} over 500 pairs, {elapsed:.1f}s < 30s")


# 5. Gradient check

def test_criterion_5_gradient_check(verdict):
    spec = NetworkSpec(M=2, d=2, N=3, L=2, H=9, W=9, channels=(2, 2), kernel=3, fc=6, hidden=6,
                       slot_hidden=4)
    rng = np.random.default_rng(505)
    recs = [SegmentedRecord(rng.random((9, 9)), tuple(random_params(rng, N=3) for _ in range(2)),
                            int(rng.integers(1, 3))) for _ in range(4)]
    raw = np.stack([pack_record(r, spec) for r in recs])
    T = fit_stats(raw).normalize(raw)
    X = np.stack([r.image for r in recs])[:, None]
    net = spec.build()
    # perturb so biases are nonzero too
    vec = net.init(0) + rng.normal(0, 0.1, net.layout.size)
    _, grad = net.loss_and_grad(vec, X, T)
    h = 1e-5
    worst = 0.0
    for i in range(net.layout.size):
        e = np.zeros_like(vec)
        e[i] = h
        fd = (net.loss(vec + e, X, T) - net.loss(vec - e, X, T)) / (2 * h)
        worst = max(worst, abs(fd - grad[i]) / max(abs(fd), abs(grad[i]), 1e-8))
    n = net.layout.size
    verdict(5, worst <= 1e-4 and 200 <= n <= 500,
            f"max relative error {worst:.2e} <= 1e-4 over all {n} coordinates of a {n}-parameter network")


# 6. Expert plans succeed on their own scenes

def test_criterion_6_planner_closure(verdict):
    rates = {}
    for name, tdef in TASKS.items():
        good = 0
        for seed in range(200):
            scene = tdef.generate(seed)
            succ, att, overall = tdef.score(tdef.plan(scene), scene)
            good += att > 0 and succ == att and overall is not False
        rates[name] = 100.0 * good / 200
    verdict(6, all(r == 100.0 for r in rates.values()),
            ", ".join(f"{k} {v:.1f}%" for k, v in rates.items()) + " (200 seeds each, need 100%)")


# 7 and 8. Desk-scale comparisons with the single-DMP baseline

def run_models(task, count):
    ds = make_dataset(task, count, seed=0)
    X, Xv, Xt = ds.images("train"), ds.images("val"), ds.images("test")
    test_ids = ds.splits["test"]
    reports = {}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        dsd = DSDNet(random_state=0).fit(X, ds.subset("train"), Xv, ds.subset("val"))
        reports["dsdnet"] = aggregate(evaluate_motions(ds, dict(zip(test_ids, dsd.predict_motion(Xt)))))
        for v in ("eq", "plus"):
            est = CIMEDNet(v, random_state=0).fit(X, ds.baseline_labels(v, "train"),
                                                   Xv, ds.baseline_labels(v, "val"))
            motions = dict(zip(test_ids, est.predict_motion(Xt)))
            reports[v] = aggregate(evaluate_motions(ds, motions))
    return reports


def test_criterion_7_cutting_limited_data(verdict):
    t0 = time.perf_counter()
    r = run_models("cut", 100)
    elapsed = time.perf_counter() - t0
    d, e, p = r["dsdnet"], r["eq"], r["plus"]
    ok = (d.success_rate >= 80 and d.success_rate > e.success_rate and d.success_rate > p.success_rate
          and d.mean_dtw < e.mean_dtw and elapsed < 1800)
    verdict(7, ok, f"success DSDNet {d.success_rate:.1f}% (>= 80) vs CIMEDNet(=) {e.success_rate:.1f}% "
                   f"and (+) {p.success_rate:.1f}%; DTW {d.mean_dtw:.3f} < {e.mean_dtw:.3f}; "
                   f"{elapsed:.0f}s")


def test_criterion_8_pickplace_fixed(verdict):
    t0 = time.perf_counter()
    r = run_models("pickplace-fixed", 150)
    elapsed = time.perf_counter() - t0
    d, e, p = (r[k].overall_rate for k in ("dsdnet", "eq", "plus"))
    verdict(8, d >= 90 and e < d and p < d and elapsed < 1800,
            f"overall success DSDNet {d:.1f}% (>= 90) vs CIMEDNet(=) {e:.1f}% and (+) {p:.1f}%; {elapsed:.0f}s")


# 9. Padding and segment bookkeeping

def test_criterion_9_bookkeeping(verdict):
    ds = make_dataset("cut", 100, seed=0, baselines=())
    config = FitConfig.with_basis(ds.N)
    records = [ds.records[i] for i in ds.ids]
    bad = []
    repadded = pad_records(records, ds.M, donors=[ds.records[i] for i in ds.splits["train"]])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for rid, rec, again in zip(ds.ids, records, repadded):
            demo = ds.demos[rid]
            if not 1 <= rec.n <= ds.M:
                bad.append((rid, "n out of range"))
            if again.params != rec.params or again.n != rec.n:
                bad.append((rid, "padding not idempotent"))
            if encode_demo(demo, rec.image, ds.M, config).params != rec.fitted:
                bad.append((rid, "fitted slots changed"))
            if join(split(demo, detect_pauses(demo))) != demo:
                bad.append((rid, "split/join mismatch"))
    verdict(9, not bad, f"{len(bad)} violations over {len(records)} records"
            + (f": {bad[:3]}" if bad else ""))


# 10. Determinism of the command line

def test_criterion_10_determinism(verdict, tmp_path):
    def tree(path):
        return {p.relative_to(path).as_posix(): p.read_bytes() for p in sorted(path.rglob("*")) if p.is_file()}

    for name in ("a", "b"):
        assert main(["gen-data", "--task", "cut", "--count", "20", "--seed", "7",
                     "--out", str(tmp_path / name)]) == 0
        assert main(["train", "--dataset", str(tmp_path / name), "--weights", str(tmp_path / f"{name}.bin"),
                     "--epochs", "10", "--seed", "7"]) == 0
    same_data = tree(tmp_path / "a") == tree(tmp_path / "b")
    same_weights = (tmp_path / "a.bin").read_bytes() == (tmp_path / "b.bin").read_bytes()
    same_log = (tmp_path / "a.bin.log.csv").read_bytes() == (tmp_path / "b.bin.log.csv").read_bytes()
    verdict(10, same_data and same_weights and same_log,
            f"gen-data identical={same_data}, train weights identical={same_weights}, log identical={same_log}")
