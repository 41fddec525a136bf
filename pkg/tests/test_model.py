import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from conftest import random_params
from dsdnet.dmp import BasisSet, rollout_batch
from dsdnet.errors import ParameterError
from dsdnet.metrics import rmse
from dsdnet.model import (DSDNet, ModelWeights, NetworkSpec, NormStats, Prediction, fit_stats, forward,
                          gradients, load_model, loss, pack_record, rollout_prediction, save_model,
                          train, unpack)
from dsdnet.nn import Dense, Sequential, SlotDecoder
from dsdnet.segmentation import SegmentedRecord

SMALL = dict(H=12, W=12, channels=(2, 3), kernel=3, fc=16, hidden=16, slot_hidden=8, L=3)
EST = dict(latent_dim=3, channels=(2, 3), kernel=3, fc=16, hidden=16, slot_hidden=8)


def small_spec(M=3, d=2, N=4, seed=0):
    return NetworkSpec(M, d, N, seed=seed, **SMALL)


def make_records(count, M=3, d=2, N=4, seed=0):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        params = tuple(random_params(rng, N=N, d=d, w_max=20) for _ in range(M))
        out.append(SegmentedRecord(rng.random((12, 12)), params, int(rng.integers(1, M + 1))))
    return out


def raw_stats(records, spec):
    return fit_stats(np.stack([pack_record(r, spec) for r in records]))


def test_spec_sizes():
    spec = small_spec()
    assert spec.fixed_size == 1 + 2 * 3 * 2 + 3
    assert spec.n_outputs == spec.fixed_size + 3 * 4 * 2
    with pytest.raises(ParameterError):
        NetworkSpec(0, 2, 4)
    assert NetworkSpec.from_dict(spec.to_dict()) == spec


def test_pack_unpack_round_trip():
    spec = small_spec()
    rec = make_records(1)[0]
    pred = unpack(pack_record(rec, spec), spec)
    assert pred.n_hat == rec.n
    assert [p for p in pred.params()] == list(rec.params)
    with pytest.raises(ParameterError):
        unpack(np.zeros(5), spec)


def test_zero_weights_predict_means():
    spec = small_spec()
    recs = make_records(6)
    stats = raw_stats(recs, spec)
    weights = ModelWeights(np.zeros(spec.build().layout.size), stats)
    pred = forward(recs[0].image, weights, spec)
    np.testing.assert_allclose(pred.vector(), stats.mean, atol=1e-12)


def test_identical_images_identical_predictions():
    spec = small_spec()
    recs = make_records(4)
    weights = ModelWeights(spec.build().init(1), raw_stats(recs, spec))
    preds = forward(np.stack([recs[0].image] * 3), weights, spec)
    for p in preds[1:]:
        np.testing.assert_array_equal(p.vector(), preds[0].vector())


def test_slot_decoder_is_permutation_equivariant(rng):
    dec = SlotDecoder(2, 4, 3, 5, 6, "dec")
    net = Sequential([dec])
    vec = net.init(0)
    x = rng.normal(size=(2, 2 + 4 * 3))
    perm = [2, 0, 3, 1]
    xp = np.concatenate([x[:, :2], x[:, 2:].reshape(2, 4, 3)[:, perm].reshape(2, -1)], axis=1)
    y, yp = net.forward(vec, x), net.forward(vec, xp)
    np.testing.assert_array_equal(yp[:, :2], x[:, :2])
    np.testing.assert_allclose(yp[:, 2:].reshape(2, 4, 6), y[:, 2:].reshape(2, 4, 6)[:, perm], atol=1e-15)


def test_loss_examples():
    spec = small_spec()
    recs = make_records(5)
    stats = raw_stats(recs, spec)
    label = recs[0]
    pred = unpack(pack_record(label, spec), spec)
    assert loss(pred, label, stats, spec) == 0.0
    pred.n_hat += 1.0
    assert loss(pred, label, stats, spec) == pytest.approx(1.0, abs=1e-12)


def test_loss_matches_explicit_sum():
    spec = small_spec()
    recs = make_records(5)
    stats = raw_stats(recs, spec)
    a, b = recs[1], recs[2]
    pred = unpack(pack_record(a, spec), spec)
    m, s = stats.mean, stats.scale
    k = 0
    total = ((a.n - m[k]) - (b.n - m[k])) ** 2
    k += 1
    terms = []
    for field in ("y0", "g"):
        for pa, pb in zip(a.params, b.params):
            for j in range(spec.d):
                terms.append((getattr(pa, field)[j], getattr(pb, field)[j]))
    for pa, pb in zip(a.params, b.params):
        terms.append((pa.tau, pb.tau))
    for pa, pb in zip(a.params, b.params):
        for i in range(spec.N):
            for j in range(spec.d):
                terms.append((pa.w[i, j], pb.w[i, j]))
    for u, v in terms:
        total += ((u - m[k]) / s[k] - (v - m[k]) / s[k]) ** 2
        k += 1
    assert k == spec.n_outputs
    assert loss(pred, b, stats, spec) == pytest.approx(total, rel=1e-12)


def test_zero_loss_gives_zero_gradient():
    spec = small_spec()
    recs = make_records(3)
    net = spec.build()
    vec = net.init(0)
    X = recs[0].image[None, None]
    value, grad = net.loss_and_grad(vec, X, net.forward(vec, X))
    assert value == 0.0 and np.all(grad == 0.0)


def test_dense_gradient_closed_form(rng):
    net = Sequential([Dense(3, 2, "d")])
    vec = net.init(0)
    X, T = rng.normal(size=(4, 3)), rng.normal(size=(4, 2))
    P = net.layout.views(vec)
    W = next(v for k, v in P.items() if v.ndim == 2)
    b = next(v for k, v in P.items() if v.ndim == 1)
    R = X @ W + b - T if W.shape == (3, 2) else X @ W.T + b - T
    _, grad = net.loss_and_grad(vec, X, T)
    G = net.layout.views(grad)
    gW = next(v for k, v in G.items() if v.ndim == 2)
    gb = next(v for k, v in G.items() if v.ndim == 1)
    expect_W = 2 * X.T @ R / 4
    np.testing.assert_allclose(gW, expect_W if W.shape == (3, 2) else expect_W.T, atol=1e-12)
    np.testing.assert_allclose(gb, 2 * R.sum(0) / 4, atol=1e-12)


def test_full_gradient_finite_differences():
    spec = NetworkSpec(2, 2, 2, L=2, H=7, W=7, channels=(2,), kernel=3, fc=4, hidden=4, slot_hidden=3)
    recs = [SegmentedRecord(np.random.default_rng(k).random((7, 7)),
                            tuple(random_params(np.random.default_rng(10 + k), N=2) for _ in range(2)), 1 + k % 2)
            for k in range(3)]
    weights = ModelWeights(spec.build().init(3), raw_stats(recs, spec))
    images = np.stack([r.image for r in recs])
    _, grad = gradients(images, recs, weights, spec)
    net = spec.build()
    X = images[:, None]
    T = weights.stats.normalize(np.stack([pack_record(r, spec) for r in recs]))
    for i in range(0, net.layout.size, 3):
        e = np.zeros(net.layout.size)
        e[i] = 1e-6
        fd = (net.loss(weights.vector + e, X, T) - net.loss(weights.vector - e, X, T)) / 2e-6
        assert abs(fd - grad[i]) <= 1e-5 * max(1.0, abs(fd)), i


def test_n_segments_rounding():
    M = 4
    base = dict(y0=np.zeros((M, 1)), g=np.ones((M, 1)), tau=np.ones(M), w=np.zeros((M, 2, 1)))
    for n_hat, n in ((0.4, 1), (-3.0, 1), (1.5, 2), (2.49, 2), (M + 3.0, M)):
        assert Prediction(n_hat, **base).n_segments == n


def test_negative_tau_is_clamped():
    M = 2
    p = Prediction(2.0, np.zeros((M, 1)), np.ones((M, 1)), np.array([-1.0, 0.5]), np.zeros((M, 3, 1)))
    assert p.params()[0].tau == 1e-3
    traj = rollout_prediction(p, dt=1e-4)
    assert np.all(np.isfinite(traj.points))


def test_norm_stats_round_trip(rng):
    raw = rng.normal(size=(10, 5)) * [1, 10, 0, 3, 1e-3]
    st = NormStats.fit(raw, unit_scale=(0,))
    assert st.scale[0] == 1.0 and st.scale[2] == 1e-8
    np.testing.assert_allclose(st.denormalize(st.normalize(raw)), raw, atol=1e-12)
    assert NormStats.from_dict(st.to_dict()).mean.tolist() == st.mean.tolist()


def test_train_memorizes_one_record():
    spec = small_spec()
    rec = make_records(1, seed=5)
    out = train(rec, rec, spec, lr=1e-2, epochs=800, patience=800)
    assert out.log[out.best_epoch][2] < 1e-3 * out.log[0][2]
    pred = forward(rec[0].image, out.weights, spec)
    assert pred.n_segments == rec[0].n


def test_train_determinism_and_lr_zero():
    spec = small_spec()
    recs = make_records(8)
    a = train(recs[:6], recs[6:], spec, epochs=5)
    b = train(recs[:6], recs[6:], spec, epochs=5)
    np.testing.assert_array_equal(a.weights.vector, b.weights.vector)
    assert a.log == b.log and a.log[0][0] == 0
    z = train(recs[:6], recs[6:], spec, lr=0.0, epochs=3)
    np.testing.assert_array_equal(z.weights.vector, spec.build().init(spec.seed))
    with pytest.raises(ParameterError):
        train(recs, [], spec)


def test_estimator_sklearn_contract():
    est = DSDNet(max_epochs=3, **EST)
    assert clone(est).get_params() == est.get_params()
    with pytest.raises(NotFittedError):
        est.predict(np.zeros((1, 12, 12)))
    est.set_params(lr=5e-3)
    assert est.lr == 5e-3


def test_estimator_fit_predict_save_load(tmp_path):
    recs = make_records(10)
    X = np.stack([r.image for r in recs])
    est = DSDNet(max_epochs=4, **EST).fit(X[:8], recs[:8], X[8:], recs[8:])
    assert est.n_iter_ == 4 and len(est.log_) == 5
    preds = est.predict(X)
    assert len(preds) == 10 and preds[0].w.shape == (3, 4, 2)
    assert est.score(X, recs) <= 0
    est.save(tmp_path / "m.bin")
    back = DSDNet.load(tmp_path / "m.bin")
    for p, q in zip(preds, back.predict(X)):
        np.testing.assert_array_equal(p.vector(), q.vector())
    variant, spec_d, _ = load_model(tmp_path / "m.bin")
    assert variant == "dsdnet" and spec_d["M"] == 3


def test_memorized_prediction_reproduces_label_motion():
    rec = make_records(1, seed=9)
    X = rec[0].image[None]
    est = DSDNet(lr=1e-2, max_epochs=1500, patience=1500, **EST).fit(X, rec)
    pred = est.predict(X)[0]
    basis = BasisSet.default(4)
    ref = rollout_batch(rec[0].fitted, basis, 0.01)
    got = rollout_batch(pred.params()[:rec[0].n], basis, 0.01)
    for a, b in zip(got, ref):
        span = np.ptp(b.points, axis=0).max() + abs(b.points[-1] - b.points[0]).max()
        assert rmse(a, b) <= 0.02 * max(span, 1.0)


def test_save_model_detects_tampered_spec(tmp_path):
    spec = small_spec()
    recs = make_records(2)
    w = ModelWeights(spec.build().init(0), raw_stats(recs, spec))
    save_model(tmp_path / "m.bin", "dsdnet", spec, w)
    raw = (tmp_path / "m.bin").read_bytes().replace(b'"slot_hidden":8', b'"slot_hidden":9', 1)
    (tmp_path / "t.bin").write_bytes(raw)
    with pytest.raises(ParameterError):
        load_model(tmp_path / "t.bin")
