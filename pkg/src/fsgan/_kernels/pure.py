"""Numpy implementations of the dense-layer hot kernels.

This is the reference backend: the compiled extension in ``_native.pyx``
must agree with these functions to floating-point noise. All arrays are
C-contiguous float64; weights use the (out_dim, in_dim) layout.
"""

import numpy as np

NAME = "pure"

# Logistic outputs are clamped into the open interval so downstream logs
# and strict (0,1) range checks stay valid even at saturation.
_LOGISTIC_LO = 1e-12
_LOGISTIC_HI = 1.0 - 1e-12


def affine(x, w, b):
    """y = x @ w.T + b for a batch of rows."""
    return x @ w.T + b


def affine_backward(x, w, gy):
    """Gradients of an affine layer: returns (gx, gw, gb)."""
    gx = gy @ w
    gw = gy.T @ x
    gb = gy.sum(axis=0)
    return gx, gw, gb


def leaky_relu(z, alpha):
    return np.where(z >= 0.0, z, alpha * z)


def leaky_relu_backward(z, ga, alpha):
    return np.where(z >= 0.0, ga, alpha * ga)


def logistic(z):
    # Branch on sign to avoid overflow in exp for large |z|.
    out = np.empty_like(z)
    pos = z >= 0.0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    np.clip(out, _LOGISTIC_LO, _LOGISTIC_HI, out=out)
    return out


def logistic_backward(a, ga):
    return ga * a * (1.0 - a)


def softmax(z):
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def softmax_backward(p, gp):
    # gz_i = p_i * (gp_i - sum_j gp_j p_j), rowwise.
    dot = (gp * p).sum(axis=1, keepdims=True)
    return p * (gp - dot)


def adam_update(param, grad, m, v, t, lr, beta1, beta2, eps):
    """One bias-corrected Adam step, in place on param/m/v.

    ``t`` is the post-increment step count (1 on the first call).
    """
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * grad * grad
    mhat = m / (1.0 - beta1**t)
    vhat = v / (1.0 - beta2**t)
    param -= lr * mhat / (np.sqrt(vhat) + eps)
