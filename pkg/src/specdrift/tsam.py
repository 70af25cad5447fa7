"""Time-domain counterpart of FBAM, used as a controlled comparison.

Identical descriptor/attention/head machinery, but the statistics, kernel
smoothing and gain act on uniform temporal segments of the raw features. No
Fourier transform is involved. The phase head has no meaning here; its output
is used as an additive per-segment bias instead.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ConfigurationError, DimensionError
from .fbam import FbamConfig, ModulationNetwork, segment_conv_update
from .numcore import abs_, swapaxes, take
from .spectral import balanced_boundaries, band_index, segment_statistics


@dataclass
class TsamConfig(FbamConfig):
    """Same hyperparameters as :class:`FbamConfig`; ``n_bands`` counts segments."""


class TsamParams:
    def __init__(self, scope, cfg, rng):
        self.net = ModulationNetwork(scope, cfg, rng, offset_scale=1.0)


def segment_boundaries(length, n_segments):
    if n_segments > length:
        raise ConfigurationError(f"cannot cut {length} steps into {n_segments} segments")
    return balanced_boundaries(length, n_segments)


def tsam_forward(x, params, cfg, return_modulation=False):
    """Segment-wise residual smoothing of ``x[B, T, D]`` along time."""
    if x.ndim != 3:
        raise DimensionError(f"tsam expects [B, T, D], got {x.shape}")
    bounds = segment_boundaries(x.shape[1], cfg.n_bands)
    owner = band_index(bounds)
    series = swapaxes(x, 1, 2)  # [B, D, T]
    descriptors = segment_statistics(abs_(series), bounds, cfg.descriptor_subset)
    mod = params.net(descriptors)
    updated = segment_conv_update(
        series,
        bounds,
        owner,
        mod.kernel,
        mod.gain,
        residual=cfg.magnitude_residual,
        shared=cfg.mode == "batch_shared",
    )
    bias = take(mod.phase_offset, owner, axis=1)
    updated = updated + bias.reshape((bias.shape[0], 1, bias.shape[-1]))
    out = swapaxes(updated, 1, 2)
    return (out, mod) if return_modulation else out
