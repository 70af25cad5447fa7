"""Sample-conditional layer normalisation.

``out = (1 - alpha) * LN(h) + alpha * (gamma * LN(h) + beta)`` where
``[gamma - 1, beta]`` come from an MLP applied to the gradient-blocked
temporal mean of ``h``. ``alpha`` is a fixed hyperparameter.
"""

from __future__ import annotations

from .errors import ConfigurationError
from .numcore import layer_norm, mean, stopgrad
from .params import MLP


class SclnParams:
    def __init__(self, scope, dim, rng):
        self.dim = dim
        # gamma = 1 + raw and raw starts at zero, so the block starts as plain LN
        self.mlp = MLP(scope, "mlp", dim, dim, 2 * dim, rng, zero_output=True)


def conditioning(h, params):
    """``(gamma, beta)``, each ``[B, 1, D]``, from the detached temporal mean of ``h``."""
    summary = stopgrad(mean(h, axis=1))
    raw = params.mlp(summary)
    d = params.dim
    gamma = raw[:, :d] + 1.0
    beta = raw[:, d:]
    return gamma.reshape((h.shape[0], 1, d)), beta.reshape((h.shape[0], 1, d))


def scln_forward(h, params, alpha):
    if not 0.0 <= alpha <= 1.0:
        raise ConfigurationError(f"alpha must lie in [0, 1], got {alpha}")
    normed = layer_norm(h, axis=-1)
    if alpha == 0.0:
        return normed
    gamma, beta = conditioning(h, params)
    return normed * (1.0 - alpha) + (normed * gamma + beta) * alpha
