"""CIMEDNet-style baseline: one image -> one DMP for the whole motion.

The "eq" variant uses as many basis functions as DSDNet has in total
(M * N); the "plus" variant uses three times that.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import functools

import numpy as np
from sklearn.base import BaseEstimator

from .dmp import BasisSet, DmpParams, Trajectory, rollout
from .errors import ParameterError
from .fitting import FitConfig, fit_segment
from .model import (DEFAULT_DT, TAU_FLOOR, ModelWeights, NetEstimatorMixin, NormStats, TrainOutcome,
                    _train, as_image_batch, load_model)
from .nn import Dense, Sequential, Tanh, encoder_layers

VARIANTS = ("eq", "plus")
PLUS_FACTOR = 3


def basis_count(variant: str, M: int, N: int) -> int:
    if variant not in VARIANTS:
        raise ParameterError(f"unknown baseline variant {variant!r}")
    return M * N * (PLUS_FACTOR if variant == "plus" else 1)


def baseline_fit_labels(demo: Trajectory, n_basis: int, window: int = 1) -> DmpParams:
    """One primitive fitted to the whole unsegmented demonstration."""
    return fit_segment(demo, FitConfig.with_basis(n_basis, window=window))


@dataclass(frozen=True)
class BaselineSpec:
    d: int
    N_b: int
    variant: str = "eq"
    H: int = 50
    W: int = 50
    channels: tuple = (8, 16)
    kernel: int = 5
    stride: int = 2
    fc: int = 128
    hidden: int = 128
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(int(c) for c in self.channels))
        if self.variant not in VARIANTS:
            raise ParameterError(f"unknown baseline variant {self.variant!r}")
        if self.d < 1 or self.N_b < 1:
            raise ParameterError("d and N_b must be >= 1")

    @property
    def n_outputs(self) -> int:
        return 2 * self.d + 1 + self.N_b * self.d

    def build(self) -> Sequential:
        return _build(self)

    def to_dict(self):
        d = asdict(self)
        d["channels"] = list(self.channels)
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@functools.lru_cache(maxsize=16)
def _build(spec: BaselineSpec) -> Sequential:
    layers = encoder_layers(spec.H, spec.W, spec.channels, spec.kernel, spec.stride, spec.fc)
    layers += [Dense(spec.fc, spec.hidden, "dec1.fc"), Tanh(), Dense(spec.hidden, spec.n_outputs, "dec1.head")]
    return Sequential(layers)


def pack_params(p: DmpParams, spec: BaselineSpec) -> np.ndarray:
    if p.d != spec.d or p.n_basis != spec.N_b:
        raise ParameterError(f"label has d={p.d}, N={p.n_basis}; expected d={spec.d}, N={spec.N_b}")
    return np.concatenate([p.y0, p.g, [p.tau], p.w.ravel()])


def unpack_params(vec, spec: BaselineSpec) -> DmpParams:
    d = spec.d
    vec = np.asarray(vec, dtype=float)
    return DmpParams(vec[:d], vec[d:2 * d], max(float(vec[2 * d]), TAU_FLOOR),
                     vec[2 * d + 1:].reshape(spec.N_b, d))


class _Codec:
    def __init__(self, spec):
        self.spec = spec

    def net(self):
        return self.spec.build()

    def image(self, item):
        return item[0]

    def pack(self, label):
        return pack_params(label, self.spec)

    def stats(self, raw):
        return NormStats.fit(raw)


class _PairCodec(_Codec):
    def pack(self, item):
        return pack_params(item[1], self.spec)


def baseline_forward(images, weights: ModelWeights, spec: BaselineSpec):
    single = np.ndim(images) == 2
    X = as_image_batch(images, spec.H, spec.W)
    raw = weights.stats.denormalize(spec.build().forward(weights.vector, X))
    out = [unpack_params(r, spec) for r in raw]
    return out[0] if single else out


def baseline_loss(pred: DmpParams, label: DmpParams, stats: NormStats, spec: BaselineSpec) -> float:
    diff = stats.normalize(pack_params(pred, spec)) - stats.normalize(pack_params(label, spec))
    return float(np.sum(diff * diff))


def baseline_train(train_pairs, val_pairs, spec: BaselineSpec, lr=1e-3, batch_size=16, epochs=500,
                   patience=50, momentum=0.9) -> TrainOutcome:
    """Train on (image, DmpParams) pairs."""
    return _train(_PairCodec(spec), train_pairs, val_pairs, lr, batch_size, epochs, patience, momentum)


def baseline_predict_motion(image, weights, spec: BaselineSpec, dt: float = DEFAULT_DT) -> Trajectory:
    p = baseline_forward(np.asarray(image, dtype=float), weights, spec)
    return rollout(p, BasisSet.default(spec.N_b), dt)


class CIMEDNet(NetEstimatorMixin, BaseEstimator):
    """Single-DMP image-to-motion baseline; labels are DmpParams fitted to whole demos."""

    def __init__(self, variant="eq", channels=(8, 16), kernel=5, stride=2, fc=128, hidden=128,
                 lr=1e-3, momentum=0.9, batch_size=16, max_epochs=500, patience=50,
                 dt=DEFAULT_DT, random_state=0):
        self.variant = variant
        self.channels = channels
        self.kernel = kernel
        self.stride = stride
        self.fc = fc
        self.hidden = hidden
        self.lr = lr
        self.momentum = momentum
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.patience = patience
        self.dt = dt
        self.random_state = random_state

    def _variant(self):
        return f"cimednet-{self.variant}"

    def fit(self, X, y, X_val=None, y_val=None):
        y = list(y)
        H, W = np.shape(X)[-2:]
        spec = BaselineSpec(y[0].d, y[0].n_basis, self.variant, H, W, tuple(self.channels),
                            self.kernel, self.stride, self.fc, self.hidden, self.random_state)
        return self._fit(_Codec(spec), X, y, X_val, y_val)

    def predict(self, X) -> list[DmpParams]:
        return [unpack_params(r, self.spec_) for r in self._raw_predict(X)]

    def predict_motion(self, X) -> list[Trajectory]:
        basis = BasisSet.default(self.spec_.N_b)
        return [rollout(p, basis, self.dt) for p in self.predict(X)]

    def score(self, X, y):
        return -self._mean_loss(_Codec(self.spec_), X, list(y))

    @classmethod
    def load(cls, path) -> "CIMEDNet":
        variant, spec_d, weights = load_model(path)
        if not variant.startswith("cimednet-"):
            raise ParameterError(f"{path} holds a {variant} model, not a baseline")
        spec = BaselineSpec.from_dict(spec_d)
        est = cls(spec.variant, spec.channels, spec.kernel, spec.stride, spec.fc, spec.hidden,
                  random_state=spec.seed)
        est.spec_, est.weights_ = spec, weights
        return est
