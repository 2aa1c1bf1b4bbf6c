"""Minimal dense numeric kernel: linear ops, ReLU, softmax cross-entropy, Adam.

Everything operates on plain numpy arrays. Gradient-checked code paths run in
float64; experiment runs may use float32.
"""

import numpy as np


class ShapeError(ValueError):
    """Operand shapes are incompatible."""


def linear_forward(W, x):
    """Return W @ x for a (rows, cols) matrix and a length-cols vector."""
    W = np.asarray(W)
    x = np.asarray(x)
    if W.ndim != 2 or x.shape[-1] != W.shape[1]:
        raise ShapeError(f"linear_forward: W is {W.shape}, x is {x.shape}")
    return x @ W.T if x.ndim > 1 else W @ x


def relu(v):
    return np.maximum(v, 0)


def softmax(logits, axis=-1):
    """Numerically stabilized softmax (max-subtraction)."""
    z = logits - np.max(logits, axis=axis, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=axis, keepdims=True)


def softmax_xent(logits, label):
    """Cross-entropy loss and gradient w.r.t. logits for a single example.

    Returns (loss, grad) with grad = softmax(logits) - onehot(label).
    """
    logits = np.asarray(logits)
    n = logits.shape[0]
    if not 0 <= label < n:
        raise IndexError(f"label {label} out of range for {n} logits")
    z = logits - np.max(logits)
    logsumexp = np.log(np.sum(np.exp(z)))
    loss = logsumexp - z[label]
    grad = np.exp(z - logsumexp)
    grad[label] -= 1.0
    return loss, grad


def softmax_xent_batch(logits, labels):
    """Mean cross-entropy over a batch; grad is already divided by batch size.

    logits: (B, C), labels: (B,) ints. Returns (mean_loss, grad (B, C)).
    """
    logits = np.asarray(logits)
    labels = np.asarray(labels)
    b, c = logits.shape
    if labels.min() < 0 or labels.max() >= c:
        raise IndexError("label out of range")
    z = logits - np.max(logits, axis=1, keepdims=True)
    logsumexp = np.log(np.sum(np.exp(z), axis=1, keepdims=True))
    losses = logsumexp[:, 0] - z[np.arange(b), labels]
    probs = np.exp(z - logsumexp)
    grad = probs.copy()
    grad[np.arange(b), labels] -= 1.0
    grad /= b
    return float(np.mean(losses)), grad


class AdamState:
    """Bias-corrected Adam moments for one parameter tensor."""

    def __init__(self, shape, lr=3e-4, beta1=0.9, beta2=0.999, eps=1e-8,
                 dtype=np.float64):
        self.m = np.zeros(shape, dtype=dtype)
        self.v = np.zeros(shape, dtype=dtype)
        self.t = 0
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps

    def reset_rows(self, rows):
        """Zero the moments of freshly (re)initialized rows."""
        self.m[rows] = 0.0
        self.v[rows] = 0.0


def adam_step(param, grad, state):
    """Apply one in-place Adam update; returns the updated param.

    A zero gradient with zero moments leaves the parameter bitwise unchanged.
    """
    if param.shape != grad.shape or param.shape != state.m.shape:
        raise ShapeError(
            f"adam_step: param {param.shape}, grad {grad.shape}, "
            f"moments {state.m.shape}")
    state.t += 1
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * grad * grad
    mhat = state.m / (1.0 - state.beta1 ** state.t)
    vhat = state.v / (1.0 - state.beta2 ** state.t)
    param -= (state.lr * mhat / (np.sqrt(vhat) + state.eps)).astype(param.dtype)
    return param
