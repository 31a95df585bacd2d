"""Vectorized numpy reference kernels.

Parameter vectors are flat. With ``hidden == 0`` the layout is ``W (d, L)``
then ``b (L,)``; otherwise ``W1 (d, h), b1 (h,), W2 (h, L), b2 (L,)`` with a
tanh hidden layer.
"""

from __future__ import annotations

import numpy as np


def _unpack(params, d, num_classes, hidden):
    L = num_classes
    if hidden == 0:
        return params[: d * L].reshape(d, L), params[d * L :]
    o = 0
    W1 = params[o : o + d * hidden].reshape(d, hidden)
    o += d * hidden
    b1 = params[o : o + hidden]
    o += hidden
    W2 = params[o : o + hidden * L].reshape(hidden, L)
    o += hidden * L
    return W1, b1, W2, params[o : o + L]


def _log_softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def forward(params, X, y, num_classes, hidden):
    """Return ``(per_sample_losses, logits)`` for the samples ``X, y``."""
    d = X.shape[1]
    if hidden == 0:
        W, b = _unpack(params, d, num_classes, 0)
        z = X @ W + b
    else:
        W1, b1, W2, b2 = _unpack(params, d, num_classes, hidden)
        z = np.tanh(X @ W1 + b1) @ W2 + b2
    logp = _log_softmax(z)
    losses = -logp[np.arange(len(y)), y]
    return losses, z


def batch_grad(params, X, y, num_classes, hidden):
    """Gradient of the mean cross-entropy over the batch, as a flat vector."""
    n, d = X.shape
    out = np.empty_like(params)
    if hidden == 0:
        W, b = _unpack(params, d, num_classes, 0)
        p = np.exp(_log_softmax(X @ W + b))
        p[np.arange(n), y] -= 1.0
        p /= n
        gW, gb = _unpack(out, d, num_classes, 0)
        gW[...] = X.T @ p
        gb[...] = p.sum(axis=0)
        return out
    W1, b1, W2, b2 = _unpack(params, d, num_classes, hidden)
    a = np.tanh(X @ W1 + b1)
    p = np.exp(_log_softmax(a @ W2 + b2))
    p[np.arange(n), y] -= 1.0
    p /= n
    gW1, gb1, gW2, gb2 = _unpack(out, d, num_classes, hidden)
    gW2[...] = a.T @ p
    gb2[...] = p.sum(axis=0)
    dpre = (p @ W2.T) * (1.0 - a * a)
    gW1[...] = X.T @ dpre
    gb1[...] = dpre.sum(axis=0)
    return out


def sgd_epochs(params, X, y, order, lr, batch_size, num_classes, hidden):
    """Plain minibatch SGD; ``order`` holds one sample permutation per epoch."""
    w = params.copy()
    n = order.shape[1]
    for perm in order:
        for start in range(0, n, batch_size):
            idx = perm[start : start + batch_size]
            w -= lr * batch_grad(w, X[idx], y[idx], num_classes, hidden)
    return w
