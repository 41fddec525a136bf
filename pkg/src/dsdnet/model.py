"""DSDNet: image -> up to M DMP segments through a two-stage decoder.

The encoder maps an image to a code. The first decoder emits the segment
count n, per-slot start/goal positions and time constants, and one latent
vector per slot. A second decoder, shared by all slots, turns each latent
into that slot's basis weights. Targets are z-scored per parameter with
training-split statistics and the loss is the summed squared error in
that normalized space.
"""

from __future__ import annotations

import functools
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import ConvergenceWarning
from sklearn.utils.validation import check_array, check_is_fitted

from . import io
from .dmp import BasisSet, DmpParams, Trajectory, concat_segments, rollout_batch
from .errors import ParameterError
from .nn import Dense, Sequential, SlotDecoder, Tanh, encoder_layers, train_network

SCALE_FLOOR = 1e-8
TAU_FLOOR = 1e-3
DEFAULT_DT = 0.01


@dataclass(frozen=True)
class NetworkSpec:
    M: int
    d: int
    N: int
    L: int = 8
    H: int = 50
    W: int = 50
    channels: tuple = (8, 16)
    kernel: int = 5
    stride: int = 2
    fc: int = 128
    hidden: int = 128
    slot_hidden: int = 64
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(int(c) for c in self.channels))
        for name in ("M", "d", "N", "L", "H", "W", "kernel", "stride", "fc", "hidden", "slot_hidden"):
            if int(getattr(self, name)) < 1:
                raise ParameterError(f"{name} must be >= 1, got {getattr(self, name)}")

    @property
    def fixed_size(self) -> int:
        """n, y0, g and tau outputs, which bypass the second decoder."""
        return 1 + 2 * self.M * self.d + self.M

    @property
    def n_outputs(self) -> int:
        return self.fixed_size + self.M * self.N * self.d

    def build(self) -> Sequential:
        return _build(self)

    def to_dict(self):
        d = asdict(self)
        d["channels"] = list(self.channels)
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@functools.lru_cache(maxsize=32)
def _build(spec: NetworkSpec) -> Sequential:
    layers = encoder_layers(spec.H, spec.W, spec.channels, spec.kernel, spec.stride, spec.fc)
    layers += [
        Dense(spec.fc, spec.hidden, "dec1.fc"), Tanh(),
        Dense(spec.hidden, spec.fixed_size + spec.M * spec.L, "dec1.head"),
        SlotDecoder(spec.fixed_size, spec.M, spec.L, spec.slot_hidden, spec.N * spec.d, "dec2"),
    ]
    return Sequential(layers)


@dataclass(frozen=True)
class NormStats:
    """Per-parameter affine map between raw and normalized targets."""

    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, raw, unit_scale=(), floor: float = SCALE_FLOOR) -> "NormStats":
        raw = np.asarray(raw, dtype=float)
        mean = raw.mean(axis=0)
        scale = np.maximum(raw.std(axis=0), floor)
        scale[list(unit_scale)] = 1.0
        return cls(mean, scale)

    def normalize(self, raw):
        return (np.asarray(raw, dtype=float) - self.mean) / self.scale

    def denormalize(self, z):
        return np.asarray(z, dtype=float) * self.scale + self.mean

    def to_dict(self):
        return {"mean": self.mean.tolist(), "scale": self.scale.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["mean"], dtype=float), np.asarray(d["scale"], dtype=float))


@dataclass
class ModelWeights:
    vector: np.ndarray
    stats: NormStats
    layout: list = field(default_factory=list)

    def __post_init__(self):
        if not np.all(np.isfinite(self.vector)):
            raise ParameterError("weights must be finite")


@dataclass
class Prediction:
    n_hat: float
    y0: np.ndarray   # (M, d)
    g: np.ndarray    # (M, d)
    tau: np.ndarray  # (M,)
    w: np.ndarray    # (M, N, d)

    @property
    def M(self) -> int:
        return self.tau.size

    @property
    def n_segments(self) -> int:
        """n_hat rounded half-up and clipped to [1, M]."""
        return int(min(max(math.floor(self.n_hat + 0.5), 1), self.M))

    def params(self) -> list[DmpParams]:
        # a network can emit a non-positive tau; clamp so the segment stays integrable
        return [DmpParams(self.y0[i], self.g[i], max(float(self.tau[i]), TAU_FLOOR), self.w[i])
                for i in range(self.M)]

    def vector(self) -> np.ndarray:
        return np.concatenate([[self.n_hat], self.y0.ravel(), self.g.ravel(), self.tau, self.w.ravel()])


def pack_record(record, spec: NetworkSpec) -> np.ndarray:
    """Raw target vector [n, y0, g, tau, w] of a SegmentedRecord."""
    params = record.params
    if len(params) != spec.M:
        raise ParameterError(f"record has {len(params)} slots, network expects M={spec.M}")
    if any(p.d != spec.d or p.n_basis != spec.N for p in params):
        raise ParameterError(f"record parameters do not match d={spec.d}, N={spec.N}")
    return np.concatenate([
        [float(record.n)],
        np.concatenate([p.y0 for p in params]),
        np.concatenate([p.g for p in params]),
        [p.tau for p in params],
        np.concatenate([p.w.ravel() for p in params]),
    ])


def unpack(vec, spec: NetworkSpec) -> Prediction:
    M, d, N = spec.M, spec.d, spec.N
    vec = np.asarray(vec, dtype=float)
    if vec.shape != (spec.n_outputs,):
        raise ParameterError(f"expected {spec.n_outputs} values, got shape {vec.shape}")
    k = 1 + M * d
    return Prediction(
        float(vec[0]),
        vec[1:k].reshape(M, d).copy(),
        vec[k:k + M * d].reshape(M, d).copy(),
        vec[k + M * d:spec.fixed_size].copy(),
        vec[spec.fixed_size:].reshape(M, N, d).copy(),
    )


def fit_stats(raw_targets) -> NormStats:
    """Training-split statistics; the n entry keeps scale 1 so its loss term stays in segment units."""
    return NormStats.fit(raw_targets, unit_scale=(0,))


def as_image_batch(images, H: int, W: int) -> np.ndarray:
    """(B, 1, H, W) float array from one image or a stack of images."""
    X = check_array(images, allow_nd=True, ensure_2d=False, dtype=float,
                    ensure_min_samples=1, input_name="images")
    if X.ndim == 2:
        X = X[None]
    if X.ndim == 4 and X.shape[1] == 1:
        X = X[:, 0]
    if X.ndim != 3 or X.shape[1:] != (H, W):
        raise ParameterError(f"images must be {H}x{W}, got shape {np.shape(images)}")
    return X[:, None]


def forward(images, weights: ModelWeights, spec: NetworkSpec):
    """Prediction for one image, or a list of them for a stack."""
    single = np.ndim(images) == 2
    X = as_image_batch(images, spec.H, spec.W)
    raw = weights.stats.denormalize(spec.build().forward(weights.vector, X))
    preds = [unpack(r, spec) for r in raw]
    return preds[0] if single else preds


def loss(pred: Prediction, label, stats: NormStats, spec: NetworkSpec) -> float:
    diff = stats.normalize(pred.vector()) - stats.normalize(pack_record(label, spec))
    return float(np.sum(diff * diff))


def gradients(images, labels, weights: ModelWeights, spec: NetworkSpec):
    """(mean batch loss, gradient with the layout of ``weights.vector``)."""
    X = as_image_batch(images, spec.H, spec.W)
    T = weights.stats.normalize(np.stack([pack_record(r, spec) for r in labels]))
    return spec.build().loss_and_grad(weights.vector, X, T)


def rollout_prediction(pred: Prediction, basis: BasisSet | None = None, dt: float = DEFAULT_DT,
                       n: int | None = None) -> Trajectory:
    """Roll out the first n slots (default: the predicted count) and join them."""
    n = pred.n_segments if n is None else n
    params = pred.params()[:n]
    basis = basis or BasisSet.default(params[0].n_basis)
    return concat_segments(rollout_batch(params, basis, dt), n)


def predict_motion(image, weights: ModelWeights, spec: NetworkSpec, basis: BasisSet | None = None,
                   dt: float = DEFAULT_DT) -> Trajectory:
    return rollout_prediction(forward(np.asarray(image, dtype=float), weights, spec), basis, dt)


@dataclass
class TrainOutcome:
    weights: ModelWeights
    log: list
    best_epoch: int
    diverged: bool


def train(train_records, val_records, spec: NetworkSpec, lr: float = 1e-3, batch_size: int = 16,
          epochs: int = 500, patience: int = 50, momentum: float = 0.9) -> TrainOutcome:
    """Fit DSDNet on SegmentedRecords. Deterministic in ``spec.seed``."""
    return _train(_DSDCodec(spec), train_records, val_records, lr, batch_size, epochs, patience, momentum)


class _DSDCodec:
    """Glue between records and network targets for DSDNet."""

    variant = "dsdnet"

    def __init__(self, spec):
        self.spec = spec

    def net(self):
        return self.spec.build()

    def image(self, rec):
        return rec.image

    def pack(self, rec):
        return pack_record(rec, self.spec)

    def stats(self, raw):
        return fit_stats(raw)

    def unpack(self, vec):
        return unpack(vec, self.spec)


def _train(codec, train_records, val_records, lr, batch_size, epochs, patience, momentum):
    spec = codec.spec
    train_records, val_records = list(train_records), list(val_records)
    if not train_records or not val_records:
        raise ParameterError("training needs non-empty train and validation splits")
    X = as_image_batch(np.stack([codec.image(r) for r in train_records]), spec.H, spec.W)
    Xv = as_image_batch(np.stack([codec.image(r) for r in val_records]), spec.H, spec.W)
    raw = np.stack([codec.pack(r) for r in train_records])
    stats = codec.stats(raw)
    T = stats.normalize(raw)
    Tv = stats.normalize(np.stack([codec.pack(r) for r in val_records]))
    net = codec.net()
    result = train_network(net, net.init(spec.seed), X, T, Xv, Tv, lr=lr, momentum=momentum,
                           batch_size=batch_size, max_epochs=epochs, patience=patience, seed=spec.seed)
    weights = ModelWeights(result.vector, stats, net.layout.table())
    return TrainOutcome(weights, result.log, result.best_epoch, result.diverged)


def save_model(path, variant: str, spec, weights: ModelWeights) -> None:
    spec_d = spec.to_dict()
    header = {
        "variant": variant,
        "spec": spec_d,
        "spec_hash": io.spec_hash(spec_d),
        "stats": weights.stats.to_dict(),
        "layout": weights.layout,
    }
    header.update({k: spec_d[k] for k in ("M", "N", "d", "L", "H", "W") if k in spec_d})
    io.save_weights(path, header, weights.vector)


def load_model(path):
    """(variant, spec dict, ModelWeights) from a weights file."""
    header, vec = io.load_weights(path)
    if io.spec_hash(header["spec"]) != header["spec_hash"]:
        raise ParameterError(f"{path}: spec hash mismatch")
    return header["variant"], header["spec"], ModelWeights(vec, NormStats.from_dict(header["stats"]),
                                                         header.get("layout", []))


class NetEstimatorMixin:
    """Shared fit/predict plumbing for the image-to-DMP estimators."""

    def _fit(self, codec, X, y, X_val, y_val):
        X = np.asarray(X, dtype=float)
        y = list(y)
        if len(X) != len(y):
            raise ParameterError(f"{len(X)} images but {len(y)} labels")
        if X_val is None:
            X_val, y_val = X, y
        train_set = [_Labeled(img, lab) for img, lab in zip(X, y)]
        val_set = [_Labeled(img, lab) for img, lab in zip(np.asarray(X_val, dtype=float), y_val)]
        out = _train(_LabeledCodec(codec), train_set, val_set, self.lr, self.batch_size,
                     self.max_epochs, self.patience, self.momentum)
        if out.diverged:
            warnings.warn("training diverged; keeping the best finite checkpoint", ConvergenceWarning)
        self.spec_ = codec.spec
        self.weights_ = out.weights
        self.log_ = out.log
        self.best_epoch_ = out.best_epoch
        self.n_iter_ = len(out.log) - 1
        self.diverged_ = out.diverged
        return self

    def _raw_predict(self, X):
        check_is_fitted(self, "weights_")
        Xb = as_image_batch(X, self.spec_.H, self.spec_.W)
        out = self.spec_.build().forward(self.weights_.vector, Xb)
        return self.weights_.stats.denormalize(out)

    def _mean_loss(self, codec, X, y):
        check_is_fitted(self, "weights_")
        Xb = as_image_batch(X, self.spec_.H, self.spec_.W)
        T = self.weights_.stats.normalize(np.stack([codec.pack(lab) for lab in y]))
        return self.spec_.build().loss(self.weights_.vector, Xb, T)

    def save(self, path):
        check_is_fitted(self, "weights_")
        save_model(path, self._variant(), self.spec_, self.weights_)


@dataclass
class _Labeled:
    image: np.ndarray
    label: object


class _LabeledCodec:
    def __init__(self, codec):
        self.inner = codec
        self.spec = codec.spec

    def net(self):
        return self.inner.net()

    def image(self, item):
        return item.image

    def pack(self, item):
        return self.inner.pack(item.label)

    def stats(self, raw):
        return self.inner.stats(raw)


class DSDNet(NetEstimatorMixin, BaseEstimator):
    """Segmented DMP network as a scikit-learn style estimator.

    ``fit(X, y)`` takes images of shape (B, H, W) and SegmentedRecords (or
    anything with ``params`` and ``n``); M, N and d are read from the labels.
    Without an explicit validation set the training set is monitored.
    """

    def __init__(self, latent_dim=8, channels=(8, 16), kernel=5, stride=2, fc=128, hidden=128,
                 slot_hidden=64, lr=1e-3, momentum=0.9, batch_size=16, max_epochs=500,
                 patience=50, dt=DEFAULT_DT, random_state=0):
        self.latent_dim = latent_dim
        self.channels = channels
        self.kernel = kernel
        self.stride = stride
        self.fc = fc
        self.hidden = hidden
        self.slot_hidden = slot_hidden
        self.lr = lr
        self.momentum = momentum
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.patience = patience
        self.dt = dt
        self.random_state = random_state

    def _variant(self):
        return "dsdnet"

    def _spec_for(self, X, y):
        first = y[0].params[0]
        H, W = np.shape(X)[-2:]
        return NetworkSpec(len(y[0].params), first.d, first.n_basis, self.latent_dim, H, W,
                           tuple(self.channels), self.kernel, self.stride, self.fc, self.hidden,
                           self.slot_hidden, self.random_state)

    def fit(self, X, y, X_val=None, y_val=None):
        y = list(y)
        return self._fit(_DSDCodec(self._spec_for(X, y)), X, y, X_val, y_val)

    def predict(self, X) -> list[Prediction]:
        return [unpack(r, self.spec_) for r in self._raw_predict(X)]

    def predict_motion(self, X, basis: BasisSet | None = None) -> list[Trajectory]:
        return [rollout_prediction(p, basis, self.dt) for p in self.predict(X)]

    def score(self, X, y):
        """Negative mean normalized loss (higher is better)."""
        return -self._mean_loss(_DSDCodec(self.spec_), X, list(y))

    @classmethod
    def load(cls, path) -> "DSDNet":
        variant, spec_d, weights = load_model(path)
        if variant != "dsdnet":
            raise ParameterError(f"{path} holds a {variant} model, not dsdnet")
        spec = NetworkSpec.from_dict(spec_d)
        est = cls(spec.L, spec.channels, spec.kernel, spec.stride, spec.fc, spec.hidden,
                  spec.slot_hidden, random_state=spec.seed)
        est.spec_, est.weights_ = spec, weights
        return est
