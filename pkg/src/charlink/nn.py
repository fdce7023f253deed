"""Dense numerics with hand-written gradients: 2-layer MLPs, softmax, Adam.

Everything is float64. MLPs act on single vectors or on row stacks ``(m, d_in)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

PROB_FLOOR = 1e-12
DEFAULT_HIDDEN = 32


def xavier_init(d_in: int, d_out: int, rng: np.random.Generator) -> np.ndarray:
    """``(d_out, d_in)`` matrix uniform in +-sqrt(6 / (d_in + d_out))."""
    if d_in <= 0 or d_out <= 0:
        raise ValueError("dimensions must be positive")
    bound = np.sqrt(6.0 / (d_in + d_out))
    return rng.uniform(-bound, bound, size=(d_out, d_in))


@dataclass
class MLPParams:
    W1: np.ndarray  # (d_hidden, d_in)
    b1: np.ndarray  # (d_hidden,)
    W2: np.ndarray  # (d_out, d_hidden)
    b2: np.ndarray  # (d_out,)

    def __post_init__(self):
        h, d_in = self.W1.shape
        if self.b1.shape != (h,) or self.W2.shape[1] != h or self.b2.shape != (self.W2.shape[0],):
            raise ValueError("inconsistent MLP parameter shapes")

    @property
    def d_in(self) -> int:
        return self.W1.shape[1]

    @property
    def d_out(self) -> int:
        return self.W2.shape[0]

    @classmethod
    def init(cls, d_in: int, d_hidden: int, d_out: int, rng) -> "MLPParams":
        return cls(xavier_init(d_in, d_hidden, rng), np.zeros(d_hidden),
                   xavier_init(d_hidden, d_out, rng), np.zeros(d_out))

    @classmethod
    def zeros(cls, d_in: int, d_hidden: int, d_out: int) -> "MLPParams":
        return cls(np.zeros((d_hidden, d_in)), np.zeros(d_hidden),
                   np.zeros((d_out, d_hidden)), np.zeros(d_out))

    def arrays(self) -> dict[str, np.ndarray]:
        return {"W1": self.W1, "b1": self.b1, "W2": self.W2, "b2": self.b2}

    def zeros_like(self) -> "MLPParams":
        return MLPParams(*(np.zeros_like(a) for a in self.arrays().values()))


@dataclass
class MLPCache:
    x: np.ndarray
    pre: np.ndarray
    hidden: np.ndarray


def relu(x):
    return np.maximum(x, 0.0)


def mlp_forward(p: MLPParams, x) -> tuple[np.ndarray, MLPCache]:
    """y = W2 relu(W1 x + b1) + b2, row-wise for stacked inputs."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != p.d_in:
        raise ValueError(f"MLP expects {p.d_in} inputs, got {x.shape[-1]}")
    pre = x @ p.W1.T + p.b1
    hidden = relu(pre)
    return hidden @ p.W2.T + p.b2, MLPCache(x, pre, hidden)


def mlp_backward(p: MLPParams, cache: MLPCache, dy) -> tuple[np.ndarray, MLPParams]:
    """Gradients of ``sum(y * dy)``; relu'(0) is taken as 0."""
    dy = np.asarray(dy, dtype=float)
    if dy.shape[-1] != p.d_out:
        raise ValueError(f"MLP output has {p.d_out} dims, gradient has {dy.shape[-1]}")
    x, hidden = cache.x, cache.hidden
    if dy.ndim == 1:
        dW2 = np.outer(dy, hidden)
        db2 = dy.copy()
        dpre = (p.W2.T @ dy) * (cache.pre > 0)
        dW1 = np.outer(dpre, x)
        db1 = dpre
        dx = p.W1.T @ dpre
    else:
        dW2 = dy.T @ hidden
        db2 = dy.sum(axis=0)
        dpre = (dy @ p.W2) * (cache.pre > 0)
        dW1 = dpre.T @ x
        db1 = dpre.sum(axis=0)
        dx = dpre @ p.W1
    return dx, MLPParams(dW1, db1, dW2, db2)


def softmax2(logits) -> np.ndarray:
    """Softmax over the last axis (length 2), max-shifted for stability."""
    z = np.asarray(logits, dtype=float)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(probs, label):
    """-log(probs[label]) with probabilities floored at 1e-12; vectorized over rows."""
    p = np.asarray(probs, dtype=float)
    lab = np.asarray(label)
    picked = np.take_along_axis(p.reshape(-1, p.shape[-1]), lab.reshape(-1, 1), axis=1)[:, 0]
    loss = -np.log(np.maximum(picked, PROB_FLOOR))
    return float(loss[0]) if p.ndim == 1 else loss


def cross_entropy_grad(probs, labels, weights=None) -> np.ndarray:
    """d(sum_e w_e * CE_e) / d(logits) for softmax2 logits."""
    p = np.asarray(probs, dtype=float)
    lab = np.asarray(labels, dtype=np.int64)
    onehot = np.zeros_like(p)
    onehot[np.arange(len(lab)), lab] = 1.0
    g = p - onehot
    # Where the floor clamps the loss it is constant in the logits.
    g[p[np.arange(len(lab)), lab] < PROB_FLOOR] = 0.0
    if weights is not None:
        g = g * np.asarray(weights, dtype=float)[:, None]
    return g


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(state: AdamState, params: dict, grads: dict) -> dict:
    """One bias-corrected Adam update. Advances ``state`` and returns new params."""
    if params.keys() != grads.keys():
        raise ValueError("parameter and gradient names differ")
    state.t += 1
    c1 = 1.0 - state.beta1 ** state.t
    c2 = 1.0 - state.beta2 ** state.t
    out = {}
    for name, value in params.items():
        g = np.asarray(grads[name], dtype=float)
        if g.shape != value.shape:
            raise ValueError(f"gradient shape mismatch for {name}: {g.shape} vs {value.shape}")
        m = state.m.get(name)
        v = state.v.get(name)
        m = state.beta1 * (m if m is not None else 0.0) + (1 - state.beta1) * g
        v = state.beta2 * (v if v is not None else 0.0) + (1 - state.beta2) * g * g
        state.m[name], state.v[name] = m, v
        out[name] = value - state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return out
