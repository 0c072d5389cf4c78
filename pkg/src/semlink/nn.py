"""Minimal neural-net primitives: parameters, layers, Adam, gradient checks.

Everything is plain float64 numpy with hand-written backward passes; there
is no autodiff graph. Models compose these functions and keep their own
parameter dicts, which makes finite-difference verification straightforward.
"""

import json

import numpy as np


class Parameter:
    """A trainable array with a matching gradient buffer."""

    def __init__(self, value: np.ndarray):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)

    @property
    def shape(self):
        return self.value.shape

    def zero_grad(self):
        self.grad[...] = 0.0


def glorot_uniform(shape, rng: np.random.Generator) -> np.ndarray:
    """Uniform init on +-sqrt(6/(fan_in+fan_out)); 1-d shapes are zeros."""
    if len(shape) == 1:
        return np.zeros(shape, dtype=np.float64)
    fan_in, fan_out = shape[0], shape[1]
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def affine_forward(x, W, b):
    return x @ W + b


def affine_backward(dy, x, W):
    dx = dy @ W.T
    dW = x.T @ dy
    db = dy.sum(axis=0)
    return dx, dW, db


def tanh_forward(x):
    return np.tanh(x)


def tanh_backward(dy, y):
    # y is the stored forward output.
    return dy * (1.0 - y * y)


def relu_forward(x):
    return np.maximum(x, 0.0)


def relu_backward(dy, y):
    return dy * (y > 0.0)


def softmax_cross_entropy(logits, targets):
    """Mean cross-entropy over rows; returns (loss, dlogits, probs).

    logits: (n, V); targets: (n,) int ids. Max-shifted for stability.
    """
    logits = np.asarray(logits, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.int64)
    n = logits.shape[0]
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    probs = exp / exp.sum(axis=1, keepdims=True)
    loss = -np.mean(np.log(probs[np.arange(n), targets] + 1e-300))
    dlogits = probs.copy()
    dlogits[np.arange(n), targets] -= 1.0
    dlogits /= n
    return loss, dlogits, probs


class Adam:
    """Standard Adam with bias correction; zeroes gradients after each step."""

    def __init__(self, params: dict, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(p.value) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.value) for k, p in params.items()}

    def step(self):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for k, p in self.params.items():
            g = p.grad
            self.m[k] = b1 * self.m[k] + (1 - b1) * g
            self.v[k] = b2 * self.v[k] + (1 - b2) * g * g
            m_hat = self.m[k] / (1 - b1 ** self.t)
            v_hat = self.v[k] / (1 - b2 ** self.t)
            p.value -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
            p.zero_grad()


def adam_step(params: dict, optimizer: Adam):
    """Functional wrapper kept for symmetry with the layer functions."""
    assert optimizer.params is params
    optimizer.step()


def gradient_check(loss_fn, params: dict, eps=1e-4, rng=None, n_samples=120):
    """Max relative error between analytic grads and central differences.

    loss_fn(compute_grads) -> float: with compute_grads=True it must also
    fill every Parameter.grad; with False it only evaluates the loss. The
    check perturbs a random subsample of coordinates (at least n_samples
    across all parameters, proportionally allocated).
    """
    rng = rng or np.random.Generator(np.random.PCG64(0))
    for p in params.values():
        p.zero_grad()
    loss_fn(True)
    analytic = {k: p.grad.copy() for k, p in params.items()}

    total = sum(p.value.size for p in params.values())
    max_rel = 0.0
    for name, p in params.items():
        k = max(1, int(round(n_samples * p.value.size / total)))
        flat = p.value.reshape(-1)
        idxs = rng.choice(p.value.size, size=min(k, p.value.size), replace=False)
        for i in idxs:
            orig = flat[i]
            flat[i] = orig + eps
            lp = loss_fn(False)
            flat[i] = orig - eps
            lm = loss_fn(False)
            flat[i] = orig
            numeric = (lp - lm) / (2 * eps)
            ana = analytic[name].reshape(-1)[i]
            denom = max(abs(numeric) + abs(ana), 1e-8)
            max_rel = max(max_rel, abs(numeric - ana) / denom)
    return max_rel


CHECKPOINT_VERSION = 1


def save_checkpoint(path, params: dict, config: dict, extra: dict | None = None):
    """JSON checkpoint; float repr round-trips bit-exactly."""
    blob = {
        "format_version": CHECKPOINT_VERSION,
        "config": config,
        "params": {
            k: {"shape": list(p.value.shape), "data": p.value.reshape(-1).tolist()}
            for k, p in params.items()
        },
    }
    if extra:
        blob.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(blob, fh)


def load_checkpoint(path):
    """Returns (params, config, blob)."""
    with open(path, encoding="utf-8") as fh:
        blob = json.load(fh)
    if blob.get("format_version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version in {path}")
    params = {}
    for k, spec in blob["params"].items():
        arr = np.array(spec["data"], dtype=np.float64).reshape(spec["shape"])
        params[k] = Parameter(arr)
    return params, blob["config"], blob
