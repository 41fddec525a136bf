"""Small numpy networks with hand-written reverse mode.

Parameters live in one flat float64 vector; each layer reads and writes
views into it through a ``Layout``. Layers implement ``forward`` returning
``(output, cache)`` and ``backward`` consuming the cache.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalBlowupError, ParameterError


class Layout:
    """Named, shaped slices of a flat parameter vector."""

    def __init__(self, entries):
        self.entries = []
        self.slices = {}
        offset = 0
        for name, shape in entries:
            size = int(np.prod(shape))
            self.entries.append((name, tuple(shape)))
            self.slices[name] = (slice(offset, offset + size), tuple(shape))
            offset += size
        self.size = offset

    def views(self, vec):
        if vec.shape != (self.size,):
            raise ParameterError(f"parameter vector has shape {vec.shape}, layout needs ({self.size},)")
        return {name: vec[sl].reshape(shape) for name, (sl, shape) in self.slices.items()}

    def table(self):
        return [[name, self.slices[name][0].start, self.slices[name][0].stop, list(shape)]
                for name, shape in self.entries]


class Layer:
    name = ""

    def shapes(self):
        return []

    def fans(self, pname):
        return None

    def forward(self, x, P):
        raise NotImplementedError

    def backward(self, dy, cache, P, G):
        raise NotImplementedError


class Dense(Layer):
    def __init__(self, n_in, n_out, name):
        self.n_in, self.n_out, self.name = n_in, n_out, name

    def shapes(self):
        return [(f"{self.name}.W", (self.n_in, self.n_out)), (f"{self.name}.b", (self.n_out,))]

    def fans(self, pname):
        return (self.n_in, self.n_out) if pname.endswith(".W") else None

    def forward(self, x, P):
        return x @ P[f"{self.name}.W"] + P[f"{self.name}.b"], x

    def backward(self, dy, x, P, G):
        G[f"{self.name}.W"] += x.T @ dy
        G[f"{self.name}.b"] += dy.sum(axis=0)
        return dy @ P[f"{self.name}.W"].T


class Tanh(Layer):
    def forward(self, x, P):
        y = np.tanh(x)
        return y, y

    def backward(self, dy, y, P, G):
        return dy * (1.0 - y * y)


class Conv2D(Layer):
    """Valid cross-correlation over (B, C, H, W) inputs."""

    def __init__(self, c_in, c_out, kernel, stride, name):
        self.c_in, self.c_out, self.k, self.s, self.name = c_in, c_out, kernel, stride, name

    def out_size(self, h, w):
        return (h - self.k) // self.s + 1, (w - self.k) // self.s + 1

    def shapes(self):
        return [(f"{self.name}.W", (self.c_out, self.c_in, self.k, self.k)),
                (f"{self.name}.b", (self.c_out,))]

    def fans(self, pname):
        area = self.k * self.k
        return (self.c_in * area, self.c_out * area) if pname.endswith(".W") else None

    def forward(self, x, P):
        B, C, H, W = x.shape
        k, s = self.k, self.s
        ho, wo = self.out_size(H, W)
        if ho < 1 or wo < 1:
            raise ParameterError(f"{self.name}: input {H}x{W} smaller than kernel {k}")
        win = np.lib.stride_tricks.sliding_window_view(x, (k, k), axis=(2, 3))[:, :, ::s, ::s]
        patches = win.transpose(0, 2, 3, 1, 4, 5).reshape(B * ho * wo, C * k * k)
        Wm = P[f"{self.name}.W"].reshape(self.c_out, -1)
        out = patches @ Wm.T + P[f"{self.name}.b"]
        return out.reshape(B, ho, wo, self.c_out).transpose(0, 3, 1, 2), (patches, x.shape)

    def backward(self, dy, cache, P, G):
        patches, (B, C, H, W) = cache
        k, s = self.k, self.s
        ho, wo = dy.shape[2:]
        d2 = dy.transpose(0, 2, 3, 1).reshape(-1, self.c_out)
        Wm = P[f"{self.name}.W"].reshape(self.c_out, -1)
        G[f"{self.name}.W"] += (d2.T @ patches).reshape(self.c_out, C, k, k)
        G[f"{self.name}.b"] += d2.sum(axis=0)
        dp = (d2 @ Wm).reshape(B, ho, wo, C, k, k).transpose(0, 3, 1, 2, 4, 5)
        dx = np.zeros((B, C, H, W))
        for i in range(k):
            for j in range(k):
                dx[:, :, i:i + s * (ho - 1) + 1:s, j:j + s * (wo - 1) + 1:s] += dp[..., i, j]
        return dx


class Flatten(Layer):
    def forward(self, x, P):
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, dy, shape, P, G):
        return dy.reshape(shape)


class SlotDecoder(Layer):
    """Passes the first ``keep`` columns through and decodes the remaining
    ``slots * latent`` columns slot by slot with one shared MLP."""

    def __init__(self, keep, slots, latent, hidden, n_out, name):
        self.keep, self.slots, self.latent = keep, slots, latent
        self.name = name
        self.mlp = [Dense(latent, hidden, f"{name}.fc1"), Tanh(), Dense(hidden, n_out, f"{name}.fc2")]

    def shapes(self):
        return [s for layer in self.mlp for s in layer.shapes()]

    def fans(self, pname):
        for layer in self.mlp:
            if any(pname == n for n, _ in layer.shapes()):
                return layer.fans(pname)
        return None

    def forward(self, x, P):
        B = x.shape[0]
        h = x[:, self.keep:].reshape(B * self.slots, self.latent)
        caches = []
        for layer in self.mlp:
            h, c = layer.forward(h, P)
            caches.append(c)
        return np.concatenate([x[:, :self.keep], h.reshape(B, -1)], axis=1), caches

    def backward(self, dy, caches, P, G):
        B = dy.shape[0]
        dh = dy[:, self.keep:].reshape(B * self.slots, -1)
        for layer, c in zip(reversed(self.mlp), reversed(caches)):
            dh = layer.backward(dh, c, P, G)
        return np.concatenate([dy[:, :self.keep], dh.reshape(B, -1)], axis=1)


class Sequential:
    def __init__(self, layers):
        self.layers = list(layers)
        self.layout = Layout([s for layer in self.layers for s in layer.shapes()])

    def init(self, seed) -> np.ndarray:
        """Glorot-uniform weights, zero biases, drawn in layout order."""
        rng = np.random.default_rng(seed)
        vec = np.zeros(self.layout.size)
        views = self.layout.views(vec)
        for name, shape in self.layout.entries:
            fans = next((f for layer in self.layers if (f := layer.fans(name)) is not None), None)
            if fans is not None:
                limit = math.sqrt(6.0 / (fans[0] + fans[1]))
                views[name][...] = rng.uniform(-limit, limit, size=shape)
        return vec

    def forward(self, vec, x, keep_caches=False):
        P = self.layout.views(vec)
        caches = []
        for layer in self.layers:
            x, c = layer.forward(x, P)
            caches.append(c if keep_caches else None)
        return (x, caches) if keep_caches else x

    def backward(self, vec, caches, dout):
        P = self.layout.views(vec)
        grad = np.zeros(self.layout.size)
        G = self.layout.views(grad)
        for layer, c in zip(reversed(self.layers), reversed(caches)):
            dout = layer.backward(dout, c, P, G)
        return grad

    def loss(self, vec, X, T) -> float:
        """Mean over examples of the summed squared error against targets T."""
        out = self.forward(vec, X)
        return float(np.mean(np.sum((out - T) ** 2, axis=1)))

    def loss_and_grad(self, vec, X, T):
        out, caches = self.forward(vec, X, keep_caches=True)
        diff = out - T
        value = float(np.mean(np.sum(diff**2, axis=1)))
        if not math.isfinite(value):
            raise NumericalBlowupError(None, "non-finite training loss")
        return value, self.backward(vec, caches, 2.0 * diff / len(X))


def encoder_layers(H, W, channels=(8, 16), kernel=5, stride=2, fc=128):
    layers = []
    c_in, h, w = 1, H, W
    for i, c in enumerate(channels):
        conv = Conv2D(c_in, c, kernel, stride, f"conv{i + 1}")
        h, w = conv.out_size(h, w)
        if h < 1 or w < 1:
            raise ParameterError(f"image {H}x{W} too small for {len(channels)} conv layers")
        layers += [conv, Tanh()]
        c_in = c
    layers += [Flatten(), Dense(c_in * h * w, fc, "enc.fc"), Tanh()]
    return layers


@dataclass
class TrainResult:
    vector: np.ndarray
    log: list = field(default_factory=list)  # (epoch, train_loss, val_loss)
    best_epoch: int = 0
    diverged: bool = False


def train_network(net: Sequential, vec0, X, T, Xv, Tv, *, lr=1e-3, momentum=0.9,
                  batch_size=16, max_epochs=500, patience=50, seed=0) -> TrainResult:
    """Momentum SGD on the mean squared-error sum; keeps the lowest-validation weights.

    Epoch 0 in the log is the untrained network. Training stops early after
    ``patience`` epochs without validation improvement, or on divergence,
    in which case the best finite checkpoint is returned.
    """
    if len(X) == 0 or len(Xv) == 0:
        raise ParameterError("training needs non-empty train and validation splits")
    rng = np.random.default_rng(seed)
    vec = np.array(vec0, dtype=float)
    vel = np.zeros_like(vec)
    best_val = net.loss(vec, Xv, Tv)
    result = TrainResult(vec.copy(), [(0, net.loss(vec, X, T), best_val)])
    stale = 0
    for epoch in range(1, max_epochs + 1):
        order = rng.permutation(len(X))
        try:
            for start in range(0, len(X), batch_size):
                idx = order[start:start + batch_size]
                _, grad = net.loss_and_grad(vec, X[idx], T[idx])
                vel = momentum * vel - lr * grad
                vec = vec + vel
        except NumericalBlowupError:
            result.diverged = True
            break
        with np.errstate(over="ignore", invalid="ignore"):
            tr, va = net.loss(vec, X, T), net.loss(vec, Xv, Tv)
        if not (math.isfinite(va) and math.isfinite(tr)):
            result.diverged = True
            break
        result.log.append((epoch, tr, va))
        if va < best_val:
            best_val, stale = va, 0
            result.vector, result.best_epoch = vec.copy(), epoch
        else:
            stale += 1
            if stale >= patience:
                break
    return result
