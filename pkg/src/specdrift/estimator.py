"""scikit-learn style wrappers around the encoder and the band descriptors."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.multiclass import unique_labels
from sklearn.utils.validation import check_array, check_is_fitted

from .dataset import TimeSeriesBatch, split_by_subject
from .encoder import EncoderConfig
from .errors import DimensionError, ValidationError
from .fbam import FbamConfig
from .spectral import band_statistics, to_polar, uniform_bands
from .numcore import Tensor, rfft, swapaxes
from .trainer import TrainConfig, embed, fit, predict_proba


def check_series(X, n_channels=None, length=None):
    """Validate a ``[N, T, C]`` float array; a 2-D input is read as one channel."""
    X = check_array(X, allow_nd=True, ensure_2d=False, dtype=np.float64)
    if X.ndim == 2:
        X = X[:, :, None]
    if X.ndim != 3:
        raise DimensionError(f"expected [N, T, C], got shape {X.shape}")
    if length is not None and X.shape[1] != length:
        raise DimensionError(f"expected length {length}, got {X.shape[1]}")
    if n_channels is not None and X.shape[2] != n_channels:
        raise DimensionError(f"expected {n_channels} channels, got {X.shape[2]}")
    return X


def check_series_labels(X, y):
    X = check_series(X)
    y = np.asarray(y)
    if y.ndim != 1 or len(y) != len(X):
        raise ValidationError(f"y must be 1-D with {len(X)} entries, got shape {y.shape}")
    return X, y


class AlignedEncoderClassifier(ClassifierMixin, BaseEstimator):
    """Frequency-band-aligned transformer classifier for ``[N, T, C]`` series.

    ``fit`` accepts subject ids as ``groups``; a ``validation_fraction`` of
    the subjects is then held out for early stopping. Without groups the
    validation samples are drawn at random.
    """

    def __init__(
        self,
        align_module="fbam",
        n_layers=6,
        dim=128,
        ffn_dim=256,
        n_heads=4,
        n_bands=6,
        kernel_size=3,
        token_dim=64,
        scln_alpha=0.1,
        aug_pool=("scale0.1", "drop0.25"),
        lr=1e-4,
        max_epochs=100,
        patience=10,
        batch_size=32,
        validation_fraction=0.2,
        random_state=41,
    ):
        self.align_module = align_module
        self.n_layers = n_layers
        self.dim = dim
        self.ffn_dim = ffn_dim
        self.n_heads = n_heads
        self.n_bands = n_bands
        self.kernel_size = kernel_size
        self.token_dim = token_dim
        self.scln_alpha = scln_alpha
        self.aug_pool = aug_pool
        self.lr = lr
        self.max_epochs = max_epochs
        self.patience = patience
        self.batch_size = batch_size
        self.validation_fraction = validation_fraction
        self.random_state = random_state

    def _configs(self, X):
        fbam = FbamConfig(n_bands=self.n_bands, kernel_size=self.kernel_size, token_dim=self.token_dim)
        enc = EncoderConfig(
            n_channels=X.shape[2],
            num_classes=len(self.classes_),
            seq_len=X.shape[1],
            n_layers=self.n_layers,
            dim=self.dim,
            ffn_dim=self.ffn_dim,
            n_heads=self.n_heads,
            align_module=self.align_module,
            scln_alpha=self.scln_alpha,
            aug_pool=list(self.aug_pool),
            fbam=fbam,
        )
        train = TrainConfig(lr=self.lr, max_epochs=self.max_epochs, patience=self.patience, batch_size=self.batch_size)
        return enc, train

    def fit(self, X, y, groups=None):
        X, y = check_series_labels(X, y)
        self.classes_ = unique_labels(y)
        if len(self.classes_) < 2:
            raise ValidationError("need at least two classes")
        codes = np.searchsorted(self.classes_, y)
        ratios = (1.0 - self.validation_fraction, self.validation_fraction, 0.0)
        if groups is None:
            subjects = np.zeros(len(X), dtype=np.int64)
            plan = split_by_subject(subjects, ratios=ratios, seed=self.random_state, mode="subject_dependent")
        else:
            _, subjects = np.unique(np.asarray(groups), return_inverse=True)
            plan = split_by_subject(subjects, ratios=ratios, seed=self.random_state)
            if not plan.val:
                raise ValidationError("validation_fraction leaves no validation subject")
        data = TimeSeriesBatch(X, codes, subjects, len(self.classes_), int(subjects.max()) + 1)
        enc, train = self._configs(X)
        result = fit(enc, data, plan, train, seed=self.random_state)
        self.model_ = result.model
        self.train_log_ = result.log
        self.n_features_in_ = X.shape[2]
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "model_")
        X = check_series(X, self.model_.cfg.n_channels, self.model_.cfg.seq_len)
        return predict_proba(self.model_, X)

    def predict(self, X):
        return self.classes_[self.predict_proba(X).argmax(axis=1)]

    def transform(self, X):
        """Pooled embeddings ``[N, D]`` of the fitted encoder."""
        check_is_fitted(self, "model_")
        X = check_series(X, self.model_.cfg.n_channels, self.model_.cfg.seq_len)
        return embed(self.model_, X)


class BandDescriptorTransformer(TransformerMixin, BaseEstimator):
    """Per-band spectral descriptors of each sample, flattened to ``[N, M * n]``.

    Statistics are pooled over channels, as inside FBAM.
    """

    def __init__(self, n_bands=6, descriptor_subset="full"):
        self.n_bands = n_bands
        self.descriptor_subset = descriptor_subset

    def fit(self, X, y=None):
        X = check_series(X)
        self.layout_ = uniform_bands(X.shape[1], self.n_bands)
        self.n_features_in_ = X.shape[2]
        return self

    def transform(self, X):
        check_is_fitted(self, "layout_")
        X = check_series(X, self.n_features_in_, self.layout_.length)
        polar = to_polar(rfft(swapaxes(Tensor(X), 1, 2), axis=-1))
        stats = band_statistics(polar, self.layout_, self.descriptor_subset).data
        return stats.reshape(len(X), -1)
