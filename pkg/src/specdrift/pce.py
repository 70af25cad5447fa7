"""Pyramid convolutional embedding: token + position embedding, then stride-2 stacks.

Stack ``j`` (j = 1, 2, 3) applies ``j`` blocks of conv(k=3, stride=2) -> layer
norm -> GELU, so the three outputs have lengths ``T//2``, ``T//4`` and ``T//8``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConfigurationError, DimensionError
from .numcore import Tensor, gelu, layer_norm, matmul, swapaxes
from .params import Affine, Dense

N_SCALES = 3
_AUG_PATTERN = re.compile(r"^(jitter|scale|drop|none|identity)([0-9]*\.?[0-9]+)?$")


@dataclass(frozen=True)
class Augmentation:
    kind: str  # "jitter" | "scale" | "drop" | "identity"
    strength: float = 0.0

    @classmethod
    def parse(cls, spec):
        match = _AUG_PATTERN.match(spec.strip().lower())
        if match is None:
            raise ConfigurationError(f"unrecognised augmentation {spec!r}")
        kind, value = match.groups()
        if kind in ("none", "identity"):
            return cls("identity")
        if value is None:
            raise ConfigurationError(f"augmentation {spec!r} needs a numeric strength suffix")
        strength = float(value)
        if kind == "drop" and not 0.0 <= strength <= 1.0:
            raise ConfigurationError(f"drop rate must lie in [0, 1], got {strength}")
        return cls(kind, strength)

    def __call__(self, x, rng):
        if self.kind == "identity" or self.strength == 0.0:
            return x
        if self.kind == "jitter":
            return x + Tensor(rng.normal(0.0, self.strength, size=x.shape))
        if self.kind == "scale":
            factor = 1.0 + rng.normal(0.0, self.strength, size=(x.shape[0], 1, x.shape[2]))
            return x * Tensor(factor)
        if self.strength >= 1.0:
            return x * 0.0
        keep = rng.random(x.shape) >= self.strength
        return x * Tensor(keep / (1.0 - self.strength))


def parse_pool(specs):
    pool = [Augmentation.parse(s) for s in specs]
    return pool or [Augmentation("identity")]


def sinusoidal_table(length, dim):
    pos = np.arange(length)[:, None]
    freq = np.exp(-math.log(10000.0) * (np.arange(0, dim, 2) / dim))
    table = np.zeros((length, dim))
    table[:, 0::2] = np.sin(pos * freq)
    table[:, 1::2] = np.cos(pos * freq[: dim // 2])
    return table


@lru_cache(maxsize=64)
def _stride2_selector(length):
    # rows grouped by tap: window for output i is [2i-1, 2i, 2i+1], left edge replicated
    n_out = length // 2
    sel = np.zeros((3 * n_out, length))
    for i in range(n_out):
        for j, t in enumerate((2 * i - 1, 2 * i, 2 * i + 1)):
            sel[j * n_out + i, max(t, 0)] = 1.0
    sel.setflags(write=False)
    return sel


class ConvBlock:
    def __init__(self, scope, dim, rng):
        self.conv = Dense(scope, "conv", 3 * dim, dim, rng)
        self.norm = Affine(scope, "norm", dim)

    def __call__(self, x):
        b, length, d = x.shape
        n_out = length // 2
        taps = matmul(Tensor(_stride2_selector(length)), x)  # [B, 3*n_out, D]
        taps = swapaxes(taps.reshape((b, 3, n_out, d)), 1, 2).reshape((b, n_out, 3 * d))
        return gelu(self.norm(layer_norm(self.conv(taps))))


class PceParams:
    def __init__(self, scope, n_channels, dim, rng):
        self.dim = dim
        self.embed = Dense(scope, "embed", n_channels, dim, rng)
        self.stacks = [
            [ConvBlock(scope.scope(f"stack{j}.block{k}"), dim, rng) for k in range(j + 1)]
            for j in range(N_SCALES)
        ]


def pce_forward(x, params, aug_pool=None, rng=None, training=False):
    """Return ``[X1, X2, X3]`` with shapes ``[B, T//2**j, D]`` for j = 1, 2, 3."""
    if x.ndim != 3:
        raise DimensionError(f"pce expects [B, T, C], got {x.shape}")
    length = x.shape[1]
    if length < 8:
        raise ConfigurationError(f"pyramid embedding needs T >= 8, got {length}")
    embedded = params.embed(x) + Tensor(sinusoidal_table(length, params.dim))
    pool = parse_pool(aug_pool or [])
    if training and rng is None:
        raise ConfigurationError("training-mode augmentation needs an explicit rng")
    outputs = []
    for stack in params.stacks:
        h = embedded
        for block in stack:
            h = block(h)
        if training:
            h = pool[rng.integers(len(pool))](h, rng)
        outputs.append(h)
    return outputs


def scale_lengths(length):
    return [length // 2 ** (j + 1) for j in range(N_SCALES)]

