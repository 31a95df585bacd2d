"""numba-compiled loop kernels, same contracts as :mod:`._numpy`."""

from __future__ import annotations

import math

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def _logits(params, X, num_classes, hidden, z, act):
    n, d = X.shape
    L = num_classes
    if hidden == 0:
        bo = d * L
        for i in range(n):
            for c in range(L):
                s = params[bo + c]
                for j in range(d):
                    s += X[i, j] * params[j * L + c]
                z[i, c] = s
        return
    b1o = d * hidden
    w2o = b1o + hidden
    b2o = w2o + hidden * L
    for i in range(n):
        for k in range(hidden):
            s = params[b1o + k]
            for j in range(d):
                s += X[i, j] * params[j * hidden + k]
            act[i, k] = math.tanh(s)
        for c in range(L):
            s = params[b2o + c]
            for k in range(hidden):
                s += act[i, k] * params[w2o + k * L + c]
            z[i, c] = s


@njit(cache=True, nogil=True)
def _softmax_rows(z, y, losses):
    # turns z into probabilities in place, fills losses
    n, L = z.shape
    for i in range(n):
        m = z[i, 0]
        for c in range(1, L):
            if z[i, c] > m:
                m = z[i, c]
        s = 0.0
        for c in range(L):
            s += math.exp(z[i, c] - m)
        lse = m + math.log(s)
        losses[i] = lse - z[i, y[i]]
        for c in range(L):
            z[i, c] = math.exp(z[i, c] - lse)


@njit(cache=True, nogil=True)
def forward(params, X, y, num_classes, hidden):
    n = X.shape[0]
    z = np.empty((n, num_classes))
    act = np.empty((n, max(hidden, 1)))
    _logits(params, X, num_classes, hidden, z, act)
    logits = z.copy()
    losses = np.empty(n)
    _softmax_rows(z, y, losses)
    return losses, logits


@njit(cache=True, nogil=True)
def _grad_into(params, X, y, num_classes, hidden, out):
    n, d = X.shape
    L = num_classes
    z = np.empty((n, L))
    act = np.empty((n, max(hidden, 1)))
    losses = np.empty(n)
    _logits(params, X, L, hidden, z, act)
    _softmax_rows(z, y, losses)
    for i in range(n):
        z[i, y[i]] -= 1.0
        for c in range(L):
            z[i, c] /= n
    out[:] = 0.0
    if hidden == 0:
        bo = d * L
        for i in range(n):
            for c in range(L):
                g = z[i, c]
                out[bo + c] += g
                for j in range(d):
                    out[j * L + c] += X[i, j] * g
        return
    b1o = d * hidden
    w2o = b1o + hidden
    b2o = w2o + hidden * L
    for i in range(n):
        for c in range(L):
            g = z[i, c]
            out[b2o + c] += g
            for k in range(hidden):
                out[w2o + k * L + c] += act[i, k] * g
        for k in range(hidden):
            s = 0.0
            for c in range(L):
                s += z[i, c] * params[w2o + k * L + c]
            s *= 1.0 - act[i, k] * act[i, k]
            out[b1o + k] += s
            for j in range(d):
                out[j * hidden + k] += X[i, j] * s


@njit(cache=True, nogil=True)
def batch_grad(params, X, y, num_classes, hidden):
    out = np.empty_like(params)
    _grad_into(params, X, y, num_classes, hidden, out)
    return out


@njit(cache=True, nogil=True)
def sgd_epochs(params, X, y, order, lr, batch_size, num_classes, hidden):
    w = params.copy()
    g = np.empty_like(params)
    epochs, n = order.shape
    for e in range(epochs):
        for start in range(0, n, batch_size):
            stop = min(start + batch_size, n)
            idx = order[e, start:stop]
            _grad_into(w, X[idx], y[idx], num_classes, hidden, g)
            for p in range(w.shape[0]):
                w[p] -= lr * g[p]
    return w
