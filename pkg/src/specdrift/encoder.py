"""Hybrid multi-scale encoder: pyramid embedding, attention/alignment stacks, SCLN, classifier."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .errors import ConfigurationError, DimensionError
from .fbam import FbamConfig, FbamParams, fbam_forward, make_layout
from .numcore import Tensor, concat, layer_norm, matmul, mean, softmax, swapaxes
from .params import MLP, Affine, Dense, ParameterStore
from .pce import PceParams, parse_pool, pce_forward, scale_lengths
from .scln import SclnParams, scln_forward
from .tsam import TsamParams, tsam_forward

ALIGN_MODULES = ("fbam", "tsam", "none")
INTERLEAVE = ("attn_align", "align_attn")


@dataclass
class EncoderConfig:
    n_channels: int
    num_classes: int
    seq_len: int
    n_layers: int = 6
    dim: int = 128
    ffn_dim: int = 256
    n_heads: int = 4
    align_module: str = "fbam"
    interleave: str = "attn_align"
    scln_alpha: float = 0.1
    aug_pool: list = field(default_factory=lambda: ["scale0.1", "drop0.25"])
    fbam: FbamConfig = field(default_factory=FbamConfig)

    def __post_init__(self):
        if isinstance(self.fbam, dict):
            self.fbam = FbamConfig(**self.fbam)
        if self.align_module not in ALIGN_MODULES:
            raise ConfigurationError(f"align_module must be one of {ALIGN_MODULES}, got {self.align_module!r}")
        if self.interleave not in INTERLEAVE:
            raise ConfigurationError(f"interleave must be one of {INTERLEAVE}, got {self.interleave!r}")
        if self.n_layers < 2 or self.n_layers % 2:
            raise ConfigurationError(f"n_layers must be a positive even number, got {self.n_layers}")
        if self.dim % self.n_heads:
            raise ConfigurationError(f"dim {self.dim} is not divisible by n_heads {self.n_heads}")
        if self.seq_len < 8:
            raise ConfigurationError(f"seq_len must be >= 8, got {self.seq_len}")
        if not 0.0 <= self.scln_alpha <= 1.0:
            raise ConfigurationError(f"scln_alpha must lie in [0, 1], got {self.scln_alpha}")
        if self.num_classes < 2:
            raise ConfigurationError("num_classes must be >= 2")
        parse_pool(self.aug_pool)

    @property
    def n_pairs(self):
        return self.n_layers // 2

    def to_dict(self):
        return asdict(self)


@dataclass
class ModelOutput:
    logits: Tensor  # [B, num_classes]
    embedding: Tensor  # pooled h_out, [B, D]
    sequence: Tensor  # h_out before pooling, [B, T/2 + T/4 + T/8, D]
    scale_features: list  # per-scale encoder outputs before concatenation


class AttentionBlock:
    """Pre-norm multi-head self-attention followed by a GELU feed-forward layer."""

    def __init__(self, scope, cfg, rng):
        d = cfg.dim
        self.n_heads = cfg.n_heads
        self.norm1 = Affine(scope, "norm1", d)
        self.qkv = Dense(scope, "qkv", d, 3 * d, rng)
        self.proj = Dense(scope, "proj", d, d, rng)
        self.norm2 = Affine(scope, "norm2", d)
        self.ffn = MLP(scope, "ffn", d, cfg.ffn_dim, d, rng)

    def __call__(self, x):
        b, length, d = x.shape
        h, dh = self.n_heads, d // self.n_heads
        qkv = self.qkv(self.norm1(layer_norm(x)))
        qkv = qkv.reshape((b, length, 3, h, dh)).transpose((2, 0, 3, 1, 4))  # [3, B, H, L, dh]
        q, k, v = qkv[0], qkv[1], qkv[2]
        attn = softmax(matmul(q, swapaxes(k, -1, -2)) * (1.0 / math.sqrt(dh)), axis=-1)
        ctx = swapaxes(matmul(attn, v), 1, 2).reshape((b, length, d))
        x = x + self.proj(ctx)
        return x + self.ffn(self.norm2(layer_norm(x)))


class AlignedEncoder:
    """Parameters and forward pass of the full classifier.

    Alignment blocks draw their initial weights from a generator separate
    from the backbone's, so models that differ only in ``align_module`` share
    identical backbone weights for a given seed.
    """

    def __init__(self, cfg, seed=0):
        self.cfg = cfg
        self.store = ParameterStore()
        rng = np.random.default_rng([seed, 0])
        align_rng = np.random.default_rng([seed, 1])
        self.lengths = scale_lengths(cfg.seq_len)
        self.align_cfgs = [self._scale_cfg(n) for n in self.lengths]
        self.layouts = [make_layout(c, n, j) if cfg.align_module == "fbam" else None
                        for j, (c, n) in enumerate(zip(self.align_cfgs, self.lengths))]
        self.pce = PceParams(self.store.scope("pce"), cfg.n_channels, cfg.dim, rng)
        self.scales = []
        for j in range(len(self.lengths)):
            pairs = []
            for i in range(cfg.n_pairs):
                attn = AttentionBlock(self.store.scope(f"scale{j}.attn{i}"), cfg, rng)
                align = None
                scope = self.store.scope(f"scale{j}.align{i}")
                if cfg.align_module == "fbam":
                    align = FbamParams(scope, self.align_cfgs[j], align_rng)
                elif cfg.align_module == "tsam":
                    align = TsamParams(scope, self.align_cfgs[j], align_rng)
                pairs.append((attn, align))
            self.scales.append(pairs)
        self.scln = SclnParams(self.store.scope("scln"), cfg.dim, rng)
        self.head = MLP(self.store.scope("classifier"), "mlp", cfg.dim, cfg.dim, cfg.num_classes, rng)

    def _scale_cfg(self, length):
        # short scales cannot hold n_bands bands (or segments); cap the count there
        fbam = self.cfg.fbam
        capacity = length // 2 if self.cfg.align_module == "fbam" else length
        if fbam.band_boundaries is None and fbam.n_bands > capacity:
            return replace(fbam, n_bands=capacity)
        return fbam

    def _align(self, x, params, j):
        if params is None:
            return x
        if self.cfg.align_module == "fbam":
            return fbam_forward(x, params, self.align_cfgs[j], layout=self.layouts[j])
        return tsam_forward(x, params, self.align_cfgs[j])

    def forward(self, x, training=False, rng=None):
        return encoder_forward(x, self, training=training, rng=rng)

    __call__ = forward


def encoder_forward(x, model, training=False, rng=None):
    """Run the model on ``x[B, T, C]`` (numpy array or tensor)."""
    cfg = model.cfg
    x = x if isinstance(x, Tensor) else Tensor(x)
    if x.ndim != 3 or x.shape[1] != cfg.seq_len or x.shape[2] != cfg.n_channels:
        raise DimensionError(f"expected [B, {cfg.seq_len}, {cfg.n_channels}], got {x.shape}")
    scales = pce_forward(x, model.pce, cfg.aug_pool, rng=rng, training=training)
    outputs = []
    for j, (h, pairs) in enumerate(zip(scales, model.scales)):
        for attn, align in pairs:
            if cfg.interleave == "attn_align":
                h = model._align(attn(h), align, j)
            else:
                h = attn(model._align(h, align, j))
        outputs.append(h)
    sequence = scln_forward(concat(outputs, axis=1), model.scln, cfg.scln_alpha)
    embedding = mean(sequence, axis=1)
    return ModelOutput(model.head(embedding), embedding, sequence, outputs)
