"""Frequency-band alignment: band descriptors drive per-band magnitude and phase modulation.

Pipeline for features ``X[B, T, D]``:

1. rFFT along time, per feature channel; DC is split off.
2. Oscillatory bins -> magnitude ``A`` and unit phase ``P``.
3. Pooled descriptors per band -> (learned band tokens x descriptors) attention.
4. Three heads give a softmax kernel ``w``, a gain ``g`` in (-1, 1) and a phase
   offset ``beta`` in (-pi, pi) for every band.
5. ``A' = A + g * (A (*) w - A)`` within each band; ``P' = P e^{j beta} / |.|``.
6. ``[DC, A' P']`` -> inverse rFFT.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigurationError, DegenerateBinError, DimensionError
from .numcore import (
    ComplexTensor,
    Tensor,
    cmul,
    conv1d_same,
    cos,
    div,
    irfft,
    matmul,
    maximum,
    mean,
    mul,
    rfft,
    sin,
    softmax,
    swapaxes,
    take,
    tanh,
)
from .params import MLP, Dense
from .spectral import (
    PHASE_EPS,
    PolarSpectrum,
    band_statistics,
    complex_abs,
    custom_bands,
    descriptor_columns,
    from_polar,
    to_polar,
    uniform_bands,
)

MODES = ("sample_specific", "batch_shared")
INTERACTIONS = ("cross_attention", "self_attention")
MODULATE = ("magnitude", "phase", "both")


@dataclass
class FbamConfig:
    n_bands: int = 6
    kernel_size: int = 3
    token_dim: int = 64
    mode: str = "sample_specific"
    dc_learnable: bool = False
    magnitude_residual: bool = True
    static_modulation: bool = False
    band_interaction: str = "cross_attention"
    modulate: str = "both"
    descriptor_subset: str = "full"
    # optional explicit band boundaries, one list per pyramid scale
    band_boundaries: list | None = field(default=None)

    def __post_init__(self):
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise ConfigurationError(f"kernel_size must be odd and >= 1, got {self.kernel_size}")
        if self.n_bands < 1:
            raise ConfigurationError(f"n_bands must be >= 1, got {self.n_bands}")
        if self.token_dim < 1:
            raise ConfigurationError(f"token_dim must be >= 1, got {self.token_dim}")
        _choice("mode", self.mode, MODES)
        _choice("band_interaction", self.band_interaction, INTERACTIONS)
        _choice("modulate", self.modulate, MODULATE)
        descriptor_columns(self.descriptor_subset)

    @property
    def n_descriptors(self):
        return len(descriptor_columns(self.descriptor_subset))

    def to_dict(self):
        return asdict(self)


def _choice(name, value, allowed):
    if value not in allowed:
        raise ConfigurationError(f"{name} must be one of {allowed}, got {value!r}")


def make_layout(cfg, length, scale=0):
    if cfg.band_boundaries is not None:
        layout = custom_bands(length, cfg.band_boundaries[scale])
        if layout.n_bands != cfg.n_bands:
            raise ConfigurationError(
                f"scale {scale}: {layout.n_bands} custom bands but n_bands={cfg.n_bands}"
            )
        return layout
    return uniform_bands(length, cfg.n_bands)


@dataclass
class Modulation:
    """Per-band modulation; leading axis is the batch (or 1 when shared)."""

    kernel: Tensor  # [B, M, r], rows on the simplex
    gain: Tensor  # [B, M], |g| < 1
    phase_offset: Tensor  # [B, M] (FBAM) or additive bias (TSAM)


class ModulationNetwork:
    """Descriptor projection, band interaction and the three output heads.

    Head output layers start at zero, so a fresh network yields ``g = 0``,
    ``beta = 0`` and a uniform kernel.
    """

    def __init__(self, scope, cfg, rng, offset_scale=math.pi):
        d, m, r = cfg.token_dim, cfg.n_bands, cfg.kernel_size
        self.cfg = cfg
        self.offset_scale = offset_scale
        self.tokens = scope.add("tokens", rng.normal(0.0, 0.02, size=(m, d)))
        self.proj_desc = Dense(scope, "proj_desc", cfg.n_descriptors, d, rng)
        self.proj_token = Dense(scope, "proj_token", d, d, rng)
        self.w_q = Dense(scope, "w_q", d, d, rng, bias=False)
        self.w_k = Dense(scope, "w_k", d, d, rng, bias=False)
        self.w_v = Dense(scope, "w_v", d, d, rng, bias=False)
        self.head_kernel = MLP(scope, "head_kernel", d, d, r, rng, zero_output=True)
        self.head_gain = MLP(scope, "head_gain", d, d, 1, rng, zero_output=True)
        self.head_phase = MLP(scope, "head_phase", d, d, 1, rng, zero_output=True)
        if cfg.static_modulation:
            self.static_kernel = scope.add("static_kernel", np.zeros((m, r)))
            self.static_gain = scope.add("static_gain", np.zeros(m))
            self.static_phase = scope.add("static_phase", np.zeros(m))

    def interact(self, descriptors):
        """Band-aware representations ``[B, M, d]`` from descriptors ``[B, M, n]``."""
        ctx = self.proj_desc(descriptors)
        if self.cfg.band_interaction == "cross_attention":
            q = self.w_q(self.proj_token(self.tokens))  # [M, d]
        else:
            q = self.w_q(ctx)
        k, v = self.w_k(ctx), self.w_v(ctx)
        scores = matmul(q, swapaxes(k, -1, -2)) * (1.0 / math.sqrt(self.cfg.token_dim))
        return matmul(softmax(scores, axis=-1), v)

    def __call__(self, descriptors):
        cfg = self.cfg
        if descriptors.shape[-2] != cfg.n_bands:
            raise DimensionError(f"got descriptors for {descriptors.shape[-2]} bands, expected {cfg.n_bands}")
        if descriptors.shape[-1] != cfg.n_descriptors:
            raise DimensionError(
                f"descriptor width {descriptors.shape[-1]} != {cfg.n_descriptors} ({cfg.descriptor_subset})"
            )
        if cfg.static_modulation:
            kernel = softmax(self.static_kernel, axis=-1).reshape((1, cfg.n_bands, cfg.kernel_size))
            gain = tanh(self.static_gain).reshape((1, cfg.n_bands))
            offset = (tanh(self.static_phase) * self.offset_scale).reshape((1, cfg.n_bands))
            return Modulation(kernel, gain, offset)
        o = self.interact(descriptors)
        kernel = softmax(self.head_kernel(o), axis=-1)
        gain = tanh(self.head_gain(o))
        offset = tanh(self.head_phase(o)) * self.offset_scale
        shape = gain.shape[:-1]
        return Modulation(kernel, gain.reshape(shape), offset.reshape(shape))


class FbamParams:
    """Learnable state of one alignment block."""

    def __init__(self, scope, cfg, rng):
        self.net = ModulationNetwork(scope, cfg, rng)
        self.dc_gain = self.dc_offset = None
        if cfg.dc_learnable:
            self.dc_gain = scope.add("dc_gain", np.zeros(1))
            self.dc_offset = scope.add("dc_offset", np.zeros(1))


def derive_modulation(descriptors, params, cfg=None):
    net = params.net if isinstance(params, FbamParams) else params
    return net(descriptors)


def _per_bin(values, owner):
    # [B, M] or [B, M, r] -> per-bin along the band axis
    return take(values, owner, axis=1)


def segment_conv_update(values, local_boundaries, owner, kernel, gain, residual, shared):
    """Residual, kernel-smoothing update applied independently inside each segment.

    ``values`` is ``[B, D, K]``; ``kernel`` ``[B|1, M, r]``; ``gain`` ``[B|1, M]``.
    """
    if shared:
        kernel = mean(kernel, axis=0, keepdims=True)
    r = kernel.shape[-1]
    taps = swapaxes(_per_bin(kernel, owner), 1, 2)  # [B, r, K]
    taps = taps.reshape((taps.shape[0], 1, r, taps.shape[-1]))
    smoothed = conv1d_same(values, taps, boundaries=local_boundaries)
    if not residual:
        return smoothed
    g = _per_bin(gain, owner)
    g = g.reshape((g.shape[0], 1, g.shape[-1]))
    return values + mul(g, smoothed - values)


def apply_magnitude(magnitude, layout, kernel, gain, cfg):
    """Band-wise residual magnitude smoothing, clamped at zero."""
    updated = segment_conv_update(
        magnitude,
        layout.local_boundaries,
        layout.band_of_bin,
        kernel,
        gain,
        residual=cfg.magnitude_residual,
        shared=cfg.mode == "batch_shared",
    )
    return maximum(updated, 0.0)


def apply_phase(phase, layout, offset, eps=PHASE_EPS):
    """Rotate each band's unit phases by its offset and renormalise.

    ``phase`` is a ComplexTensor ``[B, D, K]``; ``offset`` is ``[B|1, M]``.
    The Nyquist bin (even lengths) is never rotated so the signal stays real.
    """
    beta = _per_bin(offset, layout.band_of_bin)
    if layout.nyquist_present:
        keep = np.ones(layout.n_bins)
        keep[-1] = 0.0
        beta = beta * keep
    beta = beta.reshape((beta.shape[0], 1, beta.shape[-1]))
    rotated = cmul(phase, ComplexTensor(cos(beta), sin(beta)))
    norm = complex_abs(rotated.re, rotated.im) + eps
    return ComplexTensor(div(rotated.re, norm), div(rotated.im, norm))


def fbam_forward(x, params, cfg, layout=None, return_modulation=False):
    """Align ``x[B, T, D]`` in the Fourier domain; output has the same shape."""
    if x.ndim != 3:
        raise DimensionError(f"fbam expects [B, T, D], got {x.shape}")
    length = x.shape[1]
    if length < 2:
        raise DimensionError(f"fbam needs T >= 2, got {length}")
    if layout is None:
        layout = make_layout(cfg, length)
    elif layout.length != length:
        raise DimensionError(f"layout built for length {layout.length}, input has {length}")

    spectrum = rfft(swapaxes(x, 1, 2), axis=-1)  # [B, D, K+1]
    polar = to_polar(spectrum)
    descriptors = band_statistics(polar, layout, cfg.descriptor_subset)
    mod = derive_modulation(descriptors, params, cfg)

    magnitude, phase, dc = polar.magnitude, polar.phase, polar.dc
    if cfg.modulate in ("magnitude", "both"):
        magnitude = apply_magnitude(magnitude, layout, mod.kernel, mod.gain, cfg)
    if cfg.modulate in ("phase", "both"):
        phase = apply_phase(phase, layout, mod.phase_offset)
    if cfg.dc_learnable:
        dc = ComplexTensor(dc.re * (params.dc_gain + 1.0) + params.dc_offset, dc.im * (params.dc_gain + 1.0))

    aligned = from_polar(PolarSpectrum(dc, magnitude, phase))
    out = swapaxes(irfft(aligned, length, axis=-1), 1, 2)
    return (out, mod) if return_modulation else out


# -- Fourier-subspace view ----------------------------------------------

@dataclass(frozen=True)
class SubspaceAlignment:
    modulator: complex
    aligned: complex
    matrix: np.ndarray  # r * R(delta), acting on [re, im]
    vector: np.ndarray  # matrix @ [re(z), im(z)]


def rotation_scaling(r, delta):
    c, s = math.cos(delta), math.sin(delta)
    return r * np.array([[c, -s], [s, c]])


def subspace_align_demo(z, r=1.0, delta=0.0, target=None):
    """Complex modulation ``u z`` and its equivalent 2x2 real action.

    With ``target`` set, ``u = target / z`` is used instead of ``r e^{j delta}``,
    which maps ``z`` exactly onto the target.
    """
    z = complex(z)
    if target is not None:
        if z == 0:
            raise DegenerateBinError("cannot align a zero coefficient onto a target")
        u = complex(target) / z
        r, delta = abs(u), math.atan2(u.imag, u.real)
    else:
        u = r * complex(math.cos(delta), math.sin(delta))
    matrix = rotation_scaling(r, delta)
    vector = matrix @ np.array([z.real, z.imag])
    return SubspaceAlignment(u, u * z, matrix, vector)
