"""Differentiable real-input FFT pair and a split real/imag complex tensor.

Forward transforms are unnormalised and inverses scale by ``1/T``, so for
``x`` of length ``T``::

    rfft(x)[k] = sum_t x[t] * exp(-2j*pi*k*t/T),   k = 0 .. T//2

Bin 0 is DC; for even ``T`` bin ``T//2`` is Nyquist and is real.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DimensionError
from .tensor import Tensor, _make, add, as_tensor, concat, getitem, mul, neg, sub


@dataclass(frozen=True)
class ComplexTensor:
    """Complex array stored as two real tensors of identical shape."""

    re: Tensor
    im: Tensor

    def __post_init__(self):
        if self.re.shape != self.im.shape:
            raise DimensionError(f"re {self.re.shape} and im {self.im.shape} differ")

    @property
    def shape(self):
        return self.re.shape

    def numpy(self):
        return self.re.data + 1j * self.im.data

    @classmethod
    def from_numpy(cls, z, requires_grad=False):
        z = np.asarray(z, dtype=np.complex128)
        return cls(Tensor(z.real, requires_grad), Tensor(z.imag, requires_grad))

    def __getitem__(self, key):
        return ComplexTensor(getitem(self.re, key), getitem(self.im, key))

    def __mul__(self, other):
        return cmul(self, other)

    def conj(self):
        return ComplexTensor(self.re, neg(self.im))


def cmul(a, b):
    """Complex product; ``b`` may be a ComplexTensor or a real tensor/scalar."""
    if not isinstance(b, ComplexTensor):
        return ComplexTensor(mul(a.re, b), mul(a.im, b))
    re = sub(mul(a.re, b.re), mul(a.im, b.im))
    im = add(mul(a.re, b.im), mul(a.im, b.re))
    return ComplexTensor(re, im)


def cconcat(parts, axis=-1):
    return ComplexTensor(concat([p.re for p in parts], axis), concat([p.im for p in parts], axis))


def _edge_weights(n_bins, length):
    # DC and (even length) Nyquist appear once in the full spectrum, others twice
    w = np.full(n_bins, 2.0)
    w[0] = 1.0
    if length % 2 == 0:
        w[-1] = 1.0
    return w


def rfft(x, axis=-1):
    """Real-input DFT along ``axis``; returns ``floor(T/2) + 1`` bins."""
    x = as_tensor(x)
    axis = axis % x.ndim
    length = x.shape[axis]
    if length < 2:
        raise DimensionError(f"rfft needs at least 2 samples along axis {axis}, got {length}")
    z = np.fft.rfft(x.data, axis=axis)
    n_bins = z.shape[axis]
    stacked = np.stack([z.real, z.imag])
    shape = [1] * x.ndim
    shape[axis] = n_bins
    # adjoint of the half-spectrum map: grad_x[t] = sum_k Re(G_k e^{+2j pi k t/T})
    scale = (2.0 / _edge_weights(n_bins, length)).reshape(shape)

    def bw(g):
        spec = (g[0] + 1j * g[1]) * scale
        return (np.fft.irfft(spec, n=length, axis=axis) * (length / 2.0),)

    both = _make(stacked, (x,), bw, "rfft")
    return ComplexTensor(getitem(both, 0), getitem(both, 1))


def irfft(z, length, axis=-1):
    """Inverse of :func:`rfft` with ``1/T`` scaling.

    Hermitian symmetry is implied, so the imaginary parts of the DC bin and
    (even ``length``) Nyquist bin are ignored.
    """
    re, im = as_tensor(z.re), as_tensor(z.im)
    axis = axis % re.ndim
    n_bins = re.shape[axis]
    if n_bins != length // 2 + 1:
        raise DimensionError(f"irfft: {n_bins} bins cannot describe length {length}")
    out = np.fft.irfft(re.data + 1j * im.data, n=length, axis=axis)
    shape = [1] * re.ndim
    shape[axis] = n_bins
    weights = (_edge_weights(n_bins, length) / length).reshape(shape)
    dead = np.zeros(n_bins, dtype=bool)
    dead[0] = True
    if length % 2 == 0:
        dead[-1] = True
    dead = dead.reshape(shape)

    def bw(g):
        spec = np.fft.rfft(g, axis=axis) * weights
        gim = np.where(dead, 0.0, spec.imag)
        return spec.real, gim

    return _make(out, (re, im), bw, "irfft")
