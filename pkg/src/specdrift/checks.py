"""Ready-made finite-difference gradient checks for each differentiable block."""

from __future__ import annotations

import numpy as np

from .encoder import AlignedEncoder, EncoderConfig
from .errors import ConfigurationError
from .fbam import FbamConfig, FbamParams, fbam_forward
from .numcore import Tensor, cross_entropy, grad_check, sum_
from .params import ParameterStore
from .scln import SclnParams, scln_forward
from .tsam import TsamParams, tsam_forward

MODULES = ("fbam", "tsam", "scln", "encoder")
TOLERANCE = {"fbam": 1e-4, "tsam": 1e-4, "scln": 1e-4, "encoder": 1e-3}


def perturb(store, rng, scale=0.05):
    """Move every parameter off its initial value so no head sits at exactly zero.

    The scale is kept small so tanh/softmax heads stay out of saturation, where
    gradients vanish and finite differences measure only roundoff.
    """
    for _, p in store.items():
        p.data += rng.normal(0.0, scale, size=p.shape)


def _block_case(module, rng):
    store = ParameterStore()
    if module == "scln":
        params = SclnParams(store.scope("scln"), 6, rng)
        perturb(store, rng, 0.2)
        x = Tensor(rng.normal(size=(3, 10, 6)), requires_grad=True)
        return store, x, lambda: scln_forward(x, params, 0.5)
    cfg = FbamConfig(n_bands=3, token_dim=8)
    cls, fwd = (FbamParams, fbam_forward) if module == "fbam" else (TsamParams, tsam_forward)
    params = cls(store.scope(module), cfg, rng)
    perturb(store, rng)
    x = Tensor(rng.normal(size=(2, 16, 4)), requires_grad=True)
    return store, x, lambda: fwd(x, params, cfg)


def run_gradcheck(module, seed=0, max_coords=None):
    """Return the :class:`GradCheckReport` for ``module`` (fbam, tsam, scln or encoder)."""
    if module not in MODULES:
        raise ConfigurationError(f"module must be one of {MODULES}, got {module!r}")
    if max_coords is None:
        max_coords = 10 if module == "encoder" else 40
    rng = np.random.default_rng(seed)
    if module == "encoder":
        cfg = EncoderConfig(
            n_channels=2, num_classes=3, seq_len=16, dim=8, ffn_dim=16, n_layers=2, n_heads=2,
            aug_pool=[], fbam=FbamConfig(n_bands=2, token_dim=8),
        )
        model = AlignedEncoder(cfg, seed=seed)
        perturb(model.store, rng)
        x = rng.normal(size=(4, 16, 2))
        y = rng.integers(0, 3, size=4)
        params = dict(model.store.items())
        return grad_check(lambda: cross_entropy(model(x).logits, y), params, tol=TOLERANCE[module], max_coords=max_coords, seed=seed)
    store, x, forward = _block_case(module, rng)
    weights = Tensor(rng.normal(size=x.shape))
    params = dict(store.items())
    params["input"] = x
    return grad_check(lambda: sum_(forward() * weights), params, tol=TOLERANCE[module], max_coords=max_coords, seed=seed)
