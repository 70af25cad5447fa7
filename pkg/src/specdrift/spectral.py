"""Frequency-band layouts, polar decomposition and band-level descriptors."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ConfigurationError, DimensionError
from .numcore import (
    ComplexTensor,
    Tensor,
    as_tensor,
    cconcat,
    div,
    log,
    matmul,
    max_,
    mul,
    sqrt,
    stack,
    sum_,
    take,
)
from .numcore.tensor import _make

LOG_EPS = 1e-8
# Phase normalisation guard. Kept far below LOG_EPS so that A * P reproduces
# the original coefficient to ~1e-12 for any non-negligible magnitude.
PHASE_EPS = 1e-12

DESCRIPTOR_NAMES = ("log_mean", "log_std", "log_max", "log_energy", "peak_loc")
DESCRIPTOR_SUBSETS = {
    "logmom": (0, 1, 2),
    "logmom+peakloc": (0, 1, 2, 4),
    "logmom+bandenergy": (0, 1, 2, 3),
    "full": (0, 1, 2, 3, 4),
}


def descriptor_columns(subset):
    try:
        return DESCRIPTOR_SUBSETS[subset.lower()]
    except (KeyError, AttributeError):
        raise ConfigurationError(
            f"unknown descriptor subset {subset!r}; choose from {sorted(DESCRIPTOR_SUBSETS)}"
        ) from None


def balanced_boundaries(n_items, n_parts, start=0):
    """Contiguous split of ``n_items`` into ``n_parts``; earlier parts take the remainder."""
    if n_parts < 1 or n_parts > n_items:
        raise ConfigurationError(f"cannot split {n_items} items into {n_parts} non-empty parts")
    base, extra = divmod(n_items, n_parts)
    sizes = [base + (1 if m < extra else 0) for m in range(n_parts)]
    return tuple(int(b) for b in np.concatenate([[start], start + np.cumsum(sizes)]))


@dataclass(frozen=True)
class BandLayout:
    """Partition of the oscillatory rFFT bins ``1 .. length//2`` into contiguous bands.

    ``boundaries`` are absolute bin indices (DC is bin 0): band ``m`` covers
    ``boundaries[m] <= k < boundaries[m+1]``.
    """

    length: int
    boundaries: tuple

    def __post_init__(self):
        b = self.boundaries
        n_osc = self.length // 2
        if len(b) < 2 or b[0] != 1 or b[-1] != n_osc + 1:
            raise ConfigurationError(
                f"band boundaries {list(b)} must run from 1 to {n_osc + 1} for length {self.length}"
            )
        if any(hi <= lo for lo, hi in zip(b[:-1], b[1:])):
            raise ConfigurationError(f"band boundaries {list(b)} must be strictly ascending")

    @property
    def n_bands(self):
        return len(self.boundaries) - 1

    @property
    def n_bins(self):
        return self.length // 2

    @property
    def nyquist_present(self):
        return self.length % 2 == 0

    @property
    def sizes(self):
        return tuple(hi - lo for lo, hi in zip(self.boundaries[:-1], self.boundaries[1:]))

    @property
    def local_boundaries(self):
        """Boundaries re-indexed from 0 over the oscillatory bins only."""
        return tuple(b - 1 for b in self.boundaries)

    def bins(self, m):
        return list(range(self.boundaries[m], self.boundaries[m + 1]))

    @cached_property
    def band_of_bin(self):
        return band_index(self.local_boundaries)


def band_index(local_boundaries):
    out = np.empty(local_boundaries[-1], dtype=np.intp)
    for m, (lo, hi) in enumerate(zip(local_boundaries[:-1], local_boundaries[1:])):
        out[lo:hi] = m
    return out


def uniform_bands(length, n_bands):
    """Equal-width bands over the oscillatory bins (earlier bands take any extra bin)."""
    if length < 2:
        raise ConfigurationError(f"length must be >= 2, got {length}")
    return BandLayout(length, balanced_boundaries(length // 2, n_bands, start=1))


def custom_bands(length, boundaries):
    """Layout from explicit boundaries.

    Lists starting at 0 index the non-DC spectrum from zero (the convention of
    published band tables such as ``[0, 5, 12, 20, 32, 48, 64]``) and are shifted
    by one; lists starting at 1 are taken as absolute bin indices.
    """
    b = [int(v) for v in boundaries]
    if not b:
        raise ConfigurationError("empty boundary list")
    if b[0] == 0:
        b = [v + 1 for v in b]
    return BandLayout(length, tuple(b))


# -- polar form ---------------------------------------------------------

@dataclass(frozen=True)
class PolarSpectrum:
    """DC coefficient plus magnitude / unit-phase of the oscillatory bins.

    Shapes: ``dc`` is ``[..., 1]``; ``magnitude`` and ``phase`` are ``[..., K]``
    with ``K = T // 2``.
    """

    dc: ComplexTensor
    magnitude: Tensor
    phase: ComplexTensor


def complex_abs(re, im):
    """``sqrt(re^2 + im^2)`` with a zero (sub)gradient at the origin."""
    re, im = as_tensor(re), as_tensor(im)
    out = np.hypot(re.data, im.data)

    def bw(g):
        safe = np.where(out > 0, out, 1.0)
        scale = np.where(out > 0, g / safe, 0.0)
        return scale * re.data, scale * im.data

    return _make(out, (re, im), bw, "complex_abs")


def to_polar(z, eps=PHASE_EPS):
    """Split an rFFT spectrum (frequency on the last axis) into DC and polar parts."""
    if z.shape[-1] < 2:
        raise DimensionError("spectrum needs at least one oscillatory bin")
    dc = z[..., :1]
    rest = z[..., 1:]
    magnitude = complex_abs(rest.re, rest.im)
    denom = magnitude + eps
    phase = ComplexTensor(div(rest.re, denom), div(rest.im, denom))
    return PolarSpectrum(dc, magnitude, phase)


def from_polar(p):
    osc = ComplexTensor(mul(p.magnitude, p.phase.re), mul(p.magnitude, p.phase.im))
    return cconcat([p.dc, osc], axis=-1)


# -- band descriptors ---------------------------------------------------

def segment_statistics(values, local_boundaries, subset="full", eps=LOG_EPS):
    """Five pooled statistics per contiguous segment of the last axis.

    ``values`` is ``[..., D, K]`` (non-negative). Statistics pool the ``D``
    channels together with the segment's positions and are returned as
    ``[..., M, len(subset)]``:

    ``[log(mean+eps), log(std+eps), log(max+eps), log(sum_sq+eps), loc]``

    where ``loc`` is the position of the maximum divided by the segment length.
    """
    values = as_tensor(values)
    if values.ndim == 1:
        values = values.reshape((1, values.shape[0]))
    n_chan, n_pos = values.shape[-2], values.shape[-1]
    if local_boundaries[-1] != n_pos:
        raise DimensionError(f"layout covers {local_boundaries[-1]} positions, values have {n_pos}")
    lo = np.asarray(local_boundaries[:-1])
    sizes = np.diff(local_boundaries)
    n_bands = sizes.size
    owner = band_index(local_boundaries)
    member = np.zeros((n_pos, n_bands))
    member[np.arange(n_pos), owner] = 1.0
    counts = sizes * n_chan

    mu = matmul(sum_(values, axis=-2, keepdims=True), Tensor(member / counts))  # [..., 1, M]
    mu = mu.reshape(mu.shape[:-2] + (n_bands,))
    centred = values - take(mu, owner, axis=-1).reshape(mu.shape[:-1] + (1, n_pos))
    sq_dev = sum_(centred * centred, axis=-2, keepdims=True)
    var = matmul(sq_dev, Tensor(member / counts)).reshape(mu.shape)
    energy = matmul(sum_(values * values, axis=-2, keepdims=True), Tensor(member)).reshape(mu.shape)

    # pad each band to the widest one by repeating its first bin
    width = int(sizes.max())
    gather = np.array([[lo[m] + min(j, sizes[m] - 1) for j in range(width)] for m in range(n_bands)])
    peak_per_bin = max_(values, axis=-2)  # [..., K]
    grouped = take(peak_per_bin, gather, axis=-1)  # [..., M, width]
    peak = max_(grouped, axis=-1)
    loc = np.argmax(grouped.data, axis=-1) / sizes

    columns = [
        log(mu + eps),
        log(sqrt(var) + eps),
        log(peak + eps),
        log(energy + eps),
        Tensor(loc),
    ]
    cols = descriptor_columns(subset)
    return stack([columns[c] for c in cols], axis=-1)


def band_statistics(spectrum, layout, subset="full", eps=LOG_EPS):
    """Band descriptors from a :class:`PolarSpectrum` (or a raw magnitude tensor)."""
    magnitude = spectrum.magnitude if isinstance(spectrum, PolarSpectrum) else as_tensor(spectrum)
    if magnitude.shape[-1] != layout.n_bins:
        raise DimensionError(
            f"magnitude has {magnitude.shape[-1]} oscillatory bins, layout expects {layout.n_bins}"
        )
    return segment_statistics(magnitude, layout.local_boundaries, subset, eps)
