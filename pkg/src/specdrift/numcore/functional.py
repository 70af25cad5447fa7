"""Neural-network primitives built on :mod:`specdrift.numcore.tensor`."""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy.special import erf

from ..errors import DimensionError
from .tensor import Tensor, _make, as_tensor, matmul, sum_


def softmax(x, axis=-1):
    x = as_tensor(x)
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def bw(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return _make(out, (x,), bw, "softmax")


def log_softmax(x, axis=-1):
    x = as_tensor(x)
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    out = shifted - lse

    def bw(g):
        return (g - np.exp(out) * g.sum(axis=axis, keepdims=True),)

    return _make(out, (x,), bw, "log_softmax")


def gelu(x):
    """Exact (erf-based) GELU."""
    x = as_tensor(x)
    cdf = 0.5 * (1.0 + erf(x.data / math.sqrt(2.0)))
    out = x.data * cdf

    def bw(g):
        pdf = np.exp(-0.5 * x.data * x.data) / math.sqrt(2.0 * math.pi)
        return (g * (cdf + x.data * pdf),)

    return _make(out, (x,), bw, "gelu")


def layer_norm(x, axis=-1, eps=1e-5):
    """Normalise to zero mean / unit population variance along ``axis``.

    No affine parameters; callers scale and shift explicitly.
    """
    x = as_tensor(x)
    mu = x.data.mean(axis=axis, keepdims=True)
    xc = x.data - mu
    inv = 1.0 / np.sqrt((xc * xc).mean(axis=axis, keepdims=True) + eps)
    xhat = xc * inv

    def bw(g):
        gm = g.mean(axis=axis, keepdims=True)
        gxm = (g * xhat).mean(axis=axis, keepdims=True)
        return (inv * (g - gm - xhat * gxm),)

    return _make(xhat, (x,), bw, "layer_norm")


def linear(x, weight, bias=None):
    out = matmul(x, weight)
    return out if bias is None else out + bias


def cross_entropy(logits, labels):
    """Mean negative log-likelihood over the batch."""
    logits = as_tensor(logits)
    labels = np.asarray(labels, dtype=np.intp)
    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise DimensionError(f"cross_entropy: logits {logits.shape} vs labels {labels.shape}")
    onehot = np.zeros(logits.shape)
    onehot[np.arange(labels.size), labels] = 1.0
    return sum_(log_softmax(logits, axis=-1) * onehot) * (-1.0 / labels.size)


def shift_operators(length, kernel_size, boundaries=None):
    """Tap-selection matrices for a same-length convolution with edge replication.

    Returns ``S`` of shape ``[kernel_size, length, length]`` such that
    ``(x @ S[j].T)[i] == x[clip(i + j - kernel_size // 2)]``, where clipping
    is to the segment ``[boundaries[m], boundaries[m+1])`` containing ``i``.
    With ``boundaries=None`` the whole axis is one segment, so taps never cross
    segment edges and the edge value is repeated instead of zero-padded.
    """
    return _shift_operators(int(length), int(kernel_size), None if boundaries is None else tuple(boundaries))


@lru_cache(maxsize=256)
def _shift_operators(length, kernel_size, boundaries):
    if kernel_size < 1 or kernel_size % 2 == 0:
        raise DimensionError(f"kernel size must be odd and >= 1, got {kernel_size}")
    if boundaries is None:
        boundaries = [0, length]
    ops = np.zeros((kernel_size, length, length))
    half = kernel_size // 2
    for lo, hi in zip(boundaries[:-1], boundaries[1:]):
        for i in range(lo, hi):
            for j in range(kernel_size):
                ops[j, i, min(max(i + j - half, lo), hi - 1)] = 1.0
    ops.setflags(write=False)
    return ops


@lru_cache(maxsize=256)
def _tap_matrix(length, r, boundaries):
    # [..., L] @ [L, r*L] -> [..., r*L], reshaped by the caller to [..., r, L]
    flat = _shift_operators(length, r, boundaries).transpose(2, 0, 1).reshape(length, r * length)
    flat.setflags(write=False)
    return flat


def conv1d_same(signal, kernel, boundaries=None):
    """Same-length correlation of ``signal[..., L]`` with a replicate-padded kernel.

    ``kernel`` is either ``[r]`` (shared) or ``[..., r, L]`` (per-position taps,
    broadcast against the signal's leading axes). ``boundaries`` restricts
    each output position to taps inside its own segment.
    """
    signal, kernel = as_tensor(signal), as_tensor(kernel)
    length = signal.shape[-1]
    r = kernel.shape[-1] if kernel.ndim == 1 else kernel.shape[-2]
    flat = _tap_matrix(length, r, None if boundaries is None else tuple(boundaries))
    taps = matmul(signal.reshape(signal.shape[:-1] + (1, length)), Tensor(flat))
    taps = taps.reshape(signal.shape[:-1] + (r, length))
    if kernel.ndim == 1:
        kernel = kernel.reshape((r, 1))
    return sum_(taps * kernel, axis=-2)
