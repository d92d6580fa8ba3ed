"""Minimal neural substrate with hand-derived gradients.

Everything is float64 and deterministic under a seeded generator:
dense layers, LSTM cells run in either direction, bidirectional
stacks, a one-hidden-layer rectifier classifier, softmax
cross-entropy, inverted dropout, and momentum SGD with L2. The
forward passes return explicit caches so layers can be reused
re-entrantly (the character encoder runs once per word).
"""

from __future__ import annotations

import numpy as np

from .serialize import load_blob, save_blob

CHECKPOINT_MAGIC = b"SPNN1"


class Param:
    """A named trainable array with an accumulated gradient."""

    __slots__ = ("name", "value", "grad")

    def __init__(self, value, name: str):
        self.name = name
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)

    def zero_grad(self):
        self.grad[...] = 0.0


def glorot(rng, fan_in: int, fan_out: int, shape) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def sigmoid(x):
    pos = x >= 0
    z = np.exp(np.where(pos, -x, x))
    return np.where(pos, 1.0 / (1.0 + z), z / (1.0 + z))


def softmax(logits):
    """Row-wise softmax; accepts a vector or a matrix."""
    z = np.atleast_2d(logits)
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    p = e / e.sum(axis=1, keepdims=True)
    return p if np.ndim(logits) > 1 else p[0]


def nll_loss(logits, gold):
    """Summed negative log-likelihood and its gradient w.r.t. the logits."""
    probs = softmax(np.atleast_2d(logits))
    gold = np.atleast_1d(gold)
    rows = np.arange(len(gold))
    loss = -np.log(probs[rows, gold]).sum()
    dlogits = probs.copy()
    dlogits[rows, gold] -= 1.0
    return loss, dlogits


def dropout_mask(rng, shape, p: float, training: bool = True) -> np.ndarray:
    """Inverted-dropout mask: zeros with probability p, 1/(1-p) otherwise."""
    if not 0.0 <= p < 1.0:
        raise ValueError(f"drop probability must be in [0, 1), got {p}")
    if not training or p == 0.0:
        return np.ones(shape)
    return (rng.random(shape) >= p) / (1.0 - p)


class Linear:
    def __init__(self, in_dim: int, out_dim: int, rng, name: str):
        self.W = Param(glorot(rng, in_dim, out_dim, (in_dim, out_dim)), f"{name}.W")
        self.b = Param(np.zeros(out_dim), f"{name}.b")

    def forward(self, X):
        Y = X @ self.W.value + self.b.value
        return Y, X

    def backward(self, dY, cache):
        X = cache
        self.W.grad += X.T @ dY
        self.b.grad += dY.sum(axis=0)
        return dY @ self.W.value.T

    def params(self):
        return [self.W, self.b]


class LSTMCell:
    """One direction of an LSTM; gate order is input, forget, output, candidate."""

    def __init__(self, in_dim: int, hidden: int, rng, name: str):
        self.in_dim = in_dim
        self.hidden = hidden
        self.Wx = Param(glorot(rng, in_dim, 4 * hidden, (in_dim, 4 * hidden)), f"{name}.Wx")
        self.Wh = Param(glorot(rng, hidden, 4 * hidden, (hidden, 4 * hidden)), f"{name}.Wh")
        b = np.zeros(4 * hidden)
        b[hidden:2 * hidden] = 1.0  # forget-gate bias
        self.b = Param(b, f"{name}.b")

    def run(self, X, reverse: bool = False):
        """Hidden states for every position; X is (T, in_dim)."""
        T = X.shape[0]
        H = self.hidden
        order = range(T - 1, -1, -1) if reverse else range(T)
        G_in = X @ self.Wx.value + self.b.value
        Hs = np.zeros((T, H))
        gates = np.zeros((T, 4 * H))
        c_prevs = np.zeros((T, H))
        h_prevs = np.zeros((T, H))
        tanh_cs = np.zeros((T, H))
        h = np.zeros(H)
        c = np.zeros(H)
        for t in order:
            z = G_in[t] + h @ self.Wh.value
            i = sigmoid(z[:H])
            f = sigmoid(z[H:2 * H])
            o = sigmoid(z[2 * H:3 * H])
            g = np.tanh(z[3 * H:])
            h_prevs[t] = h
            c_prevs[t] = c
            c = f * c + i * g
            tc = np.tanh(c)
            h = o * tc
            gates[t, :H] = i
            gates[t, H:2 * H] = f
            gates[t, 2 * H:3 * H] = o
            gates[t, 3 * H:] = g
            tanh_cs[t] = tc
            Hs[t] = h
        cache = (X, gates, c_prevs, h_prevs, tanh_cs, reverse)
        return Hs, cache

    def backward(self, dHs, cache):
        X, gates, c_prevs, h_prevs, tanh_cs, reverse = cache
        T = X.shape[0]
        H = self.hidden
        order = range(T) if reverse else range(T - 1, -1, -1)
        dZ = np.zeros((T, 4 * H))
        dh_carry = np.zeros(H)
        dc_carry = np.zeros(H)
        for t in order:
            i = gates[t, :H]
            f = gates[t, H:2 * H]
            o = gates[t, 2 * H:3 * H]
            g = gates[t, 3 * H:]
            tc = tanh_cs[t]
            dh = dHs[t] + dh_carry
            do = dh * tc
            dc = dc_carry + dh * o * (1.0 - tc * tc)
            di = dc * g
            dg = dc * i
            df = dc * c_prevs[t]
            dc_carry = dc * f
            dz = dZ[t]
            dz[:H] = di * i * (1.0 - i)
            dz[H:2 * H] = df * f * (1.0 - f)
            dz[2 * H:3 * H] = do * o * (1.0 - o)
            dz[3 * H:] = dg * (1.0 - g * g)
            dh_carry = dz @ self.Wh.value.T
        self.Wx.grad += X.T @ dZ
        self.Wh.grad += h_prevs.T @ dZ
        self.b.grad += dZ.sum(axis=0)
        return dZ @ self.Wx.value.T

    def params(self):
        return [self.Wx, self.Wh, self.b]


class BiLSTM:
    """Per-position concatenation of a forward and a backward LSTM pass."""

    def __init__(self, in_dim: int, hidden: int, rng, name: str):
        self.hidden = hidden
        self.fwd = LSTMCell(in_dim, hidden, rng, f"{name}.fwd")
        self.bwd = LSTMCell(in_dim, hidden, rng, f"{name}.bwd")

    def forward(self, X):
        Hf, cf = self.fwd.run(X, reverse=False)
        Hb, cb = self.bwd.run(X, reverse=True)
        return np.concatenate([Hf, Hb], axis=1), (cf, cb)

    def backward(self, dY, cache):
        cf, cb = cache
        H = self.hidden
        dX = self.fwd.backward(dY[:, :H], cf)
        dX += self.bwd.backward(dY[:, H:], cb)
        return dX

    def params(self):
        return self.fwd.params() + self.bwd.params()

    def final_states(self, Hs):
        """Concatenated last forward / last backward hidden state."""
        return np.concatenate([Hs[-1, :self.hidden], Hs[0, self.hidden:]])


class BiLSTMStack:
    def __init__(self, in_dim: int, hidden: int, depth: int, rng, name: str):
        self.layers = []
        d = in_dim
        for k in range(depth):
            self.layers.append(BiLSTM(d, hidden, rng, f"{name}.{k}"))
            d = 2 * hidden

    def forward(self, X):
        caches = []
        for layer in self.layers:
            X, cache = layer.forward(X)
            caches.append(cache)
        return X, caches

    def backward(self, dY, caches):
        for layer, cache in zip(reversed(self.layers), reversed(caches)):
            dY = layer.backward(dY, cache)
        return dY

    def params(self):
        return [p for layer in self.layers for p in layer.params()]


class MLP:
    """Single rectifier hidden layer with softmax output."""

    def __init__(self, in_dim: int, hidden: int, out_dim: int, rng, name: str,
                 dropout: float = 0.0):
        self.dropout = dropout
        self.lin1 = Linear(in_dim, hidden, rng, f"{name}.lin1")
        self.lin2 = Linear(hidden, out_dim, rng, f"{name}.lin2")

    def forward(self, X, training: bool = False, rng=None):
        Z1, c1 = self.lin1.forward(X)
        A = np.maximum(Z1, 0.0)
        if training and self.dropout > 0.0:
            mask = dropout_mask(rng, A.shape, self.dropout, training=True)
        else:
            mask = 1.0
        Ad = A * mask
        logits, c2 = self.lin2.forward(Ad)
        return logits, (c1, Z1, mask, c2)

    def backward(self, dlogits, cache):
        c1, Z1, mask, c2 = cache
        dAd = self.lin2.backward(dlogits, c2)
        dA = dAd * mask
        dZ1 = dA * (Z1 > 0.0)
        return self.lin1.backward(dZ1, c1)

    def predict_proba(self, x):
        logits, _ = self.forward(np.atleast_2d(x), training=False)
        p = softmax(logits)
        return p if np.ndim(x) > 1 else p[0]

    def params(self):
        return self.lin1.params() + self.lin2.params()


class MomentumSGD:
    """v <- mu*v - lr*(grad + l2*theta); theta <- theta + v.

    Gradients are rescaled to ``clip_norm`` (global L2 norm) before the
    update when they exceed it; recurrent nets need this to survive the
    occasional exploding backpropagated gradient.
    """

    def __init__(self, params, lr: float = 0.01, momentum: float = 0.9, l2: float = 1e-6,
                 clip_norm: float | None = 5.0):
        self.params = list(params)
        self.lr = lr
        self.momentum = momentum
        self.l2 = l2
        self.clip_norm = clip_norm
        self.velocity = [np.zeros_like(p.value) for p in self.params]

    def step(self):
        sq = 0.0
        for p in self.params:
            if not np.all(np.isfinite(p.grad)):
                raise FloatingPointError(f"non-finite gradient in {p.name}")
            sq += float((p.grad * p.grad).sum())
        scale = 1.0
        if self.clip_norm is not None and sq > self.clip_norm ** 2:
            scale = self.clip_norm / np.sqrt(sq)
        for p, v in zip(self.params, self.velocity):
            v *= self.momentum
            v -= self.lr * (scale * p.grad + self.l2 * p.value)
            p.value += v

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()


def check_gradients(loss_fn, params, step: float = 1e-5, max_coords: int | None = None,
                    rng=None, floor: float = 1e-4) -> float:
    """Largest relative error between stored gradients and central differences.

    ``loss_fn`` must recompute the scalar loss from current parameter
    values without touching gradients; the caller fills the gradients
    beforehand. For tensors bigger than ``max_coords`` a random subset of
    coordinates is probed. The ``floor`` in the error denominator turns
    the comparison into an absolute one for near-zero coordinates, where
    central differences cannot resolve below eps*|loss|/(2*step) anyway.
    """
    worst = 0.0
    for p in params:
        flat_v = p.value.reshape(-1)
        flat_g = p.grad.reshape(-1)
        n = flat_v.size
        if max_coords is not None and n > max_coords:
            if rng is None:
                rng = np.random.default_rng(0)
            coords = rng.choice(n, size=max_coords, replace=False)
        else:
            coords = range(n)
        for idx in coords:
            orig = flat_v[idx]
            flat_v[idx] = orig + step
            up = loss_fn()
            flat_v[idx] = orig - step
            down = loss_fn()
            flat_v[idx] = orig
            numeric = (up - down) / (2.0 * step)
            analytic = flat_g[idx]
            err = abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)
            worst = max(worst, err)
    return worst


def save_checkpoint(path, params, meta: dict) -> None:
    """Versioned binary checkpoint; arrays round-trip bit-exactly."""
    save_blob(path, CHECKPOINT_MAGIC, {
        "arrays": {p.name: p.value for p in params},
        "meta": meta,
    })


def load_checkpoint(path) -> dict:
    return load_blob(path, CHECKPOINT_MAGIC)


def restore_params(params, arrays: dict) -> None:
    for p in params:
        if p.name not in arrays:
            raise ValueError(f"checkpoint is missing parameter '{p.name}'")
        stored = np.asarray(arrays[p.name])
        if stored.shape != p.value.shape:
            raise ValueError(f"shape mismatch for '{p.name}': "
                             f"{stored.shape} vs {p.value.shape}")
        p.value[...] = stored
