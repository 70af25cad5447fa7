"""Classification metrics, frequency-band discriminability, silhouette and the subject probe.

All classification scores are reported in percent.
"""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass

import numpy as np
from scipy.spatial.distance import cdist
from scipy.stats import rankdata

from .errors import ConfigurationError, NumericError, ValidationError

FBD_EPS = 1e-8


# --- classification -----------------------------------------------------------


@dataclass
class MetricsReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    auroc: float
    auprc: float

    def to_dict(self):
        return asdict(self)


def _as_scores(y_true, scores, num_classes):
    y_true = np.asarray(y_true, dtype=np.int64).ravel()
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim == 1:
        scores = np.stack([1.0 - scores, scores], axis=1)
    if scores.ndim != 2:
        raise ValidationError(f"scores must be [N] or [N, K], got shape {scores.shape}")
    if len(y_true) != len(scores):
        raise ValidationError(f"{len(y_true)} labels but {len(scores)} score rows")
    if not np.all(np.isfinite(scores)):
        raise ValidationError("scores contain non-finite values")
    k = scores.shape[1] if num_classes is None else num_classes
    if scores.shape[1] != k:
        raise ValidationError(f"scores have {scores.shape[1]} columns, expected {k}")
    if len(y_true) and (y_true.min() < 0 or y_true.max() >= k):
        raise ValidationError("labels must lie in [0, K)")
    return y_true, scores, k


def per_class_prf(y_true, y_pred, num_classes):
    """Per-class precision, recall and F1 as fractions; empty denominators give 0."""
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    p, r, f = (np.zeros(num_classes) for _ in range(3))
    for k in range(num_classes):
        tp = np.sum((y_pred == k) & (y_true == k))
        n_pred, n_true = np.sum(y_pred == k), np.sum(y_true == k)
        p[k] = tp / n_pred if n_pred else 0.0
        r[k] = tp / n_true if n_true else 0.0
        f[k] = 2 * p[k] * r[k] / (p[k] + r[k]) if p[k] + r[k] > 0 else 0.0
    return p, r, f


def macro_f1(y_true, y_pred, num_classes=None):
    if num_classes is None:
        num_classes = int(max(np.max(y_true, initial=0), np.max(y_pred, initial=0))) + 1
    return 100.0 * float(per_class_prf(y_true, y_pred, num_classes)[2].mean())


def binary_auroc(positive, score):
    """Mann-Whitney estimate of P(score_pos > score_neg), ties counted half. NaN if undefined."""
    positive = np.asarray(positive, dtype=bool)
    n_pos = positive.sum()
    n_neg = len(positive) - n_pos
    if n_pos == 0 or n_neg == 0:
        return float("nan")
    ranks = rankdata(score)
    return (ranks[positive].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def average_precision(positive, score):
    """Area under the precision-recall step curve, thresholds at distinct scores."""
    positive = np.asarray(positive, dtype=bool)
    n_pos = positive.sum()
    if n_pos == 0:
        return float("nan")
    order = np.argsort(-np.asarray(score), kind="mergesort")
    s, hits = np.asarray(score)[order], positive[order]
    last = np.r_[np.flatnonzero(np.diff(s) != 0), len(s) - 1]  # end of each tie group
    tp = np.cumsum(hits)[last]
    precision = tp / (last + 1)
    recall = tp / n_pos
    return float(np.sum(np.diff(np.r_[0.0, recall]) * precision))


def classification_metrics(y_true, scores, num_classes=None):
    """Accuracy, macro precision/recall/F1, macro one-vs-rest AUROC and AUPRC.

    ``scores`` is ``[N, K]`` (any monotone class scores, e.g. probabilities) or
    ``[N]`` holding the positive-class score of a binary task. Predictions are
    the row argmax. A class without positives (or, for AUROC, without
    negatives) contributes 0 to the macro averages. With two classes AUROC and
    AUPRC refer to class 1 only, the usual binary convention.
    """
    y_true, scores, k = _as_scores(y_true, scores, num_classes)
    if len(y_true) == 0:
        raise ValidationError("cannot score an empty set")
    y_pred = scores.argmax(axis=1)
    p, r, f = per_class_prf(y_true, y_pred, k)
    classes = [1] if k == 2 else range(k)
    auroc = [binary_auroc(y_true == c, scores[:, c]) for c in classes]
    auprc = [average_precision(y_true == c, scores[:, c]) for c in classes]
    return MetricsReport(
        accuracy=100.0 * float(np.mean(y_pred == y_true)),
        precision=100.0 * float(p.mean()),
        recall=100.0 * float(r.mean()),
        f1=100.0 * float(f.mean()),
        auroc=100.0 * float(np.mean(np.nan_to_num(auroc, nan=0.0))),
        auprc=100.0 * float(np.mean(np.nan_to_num(auprc, nan=0.0))),
    )


# --- frequency-band discriminability --------------------------------------------


@dataclass
class FbdReport:
    edges: np.ndarray  # DFT-bin edges of the FBD bins, length n_bins + 1
    intra: np.ndarray
    inter: np.ndarray
    fbd: np.ndarray
    band_fbd: float
    band_range: tuple

    def to_dict(self):
        return {
            "edges": self.edges.tolist(),
            "intra": self.intra.tolist(),
            "inter": self.inter.tolist(),
            "fbd": self.fbd.tolist(),
            "band_fbd": float(self.band_fbd),
            "band_range": list(self.band_range),
        }

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("bin,lo,hi,intra,inter,fbd\n")
            for b in range(len(self.fbd)):
                fh.write(f"{b},{self.edges[b]},{self.edges[b + 1]},{self.intra[b]!r},{self.inter[b]!r},{self.fbd[b]!r}\n")


def band_powers(signals, bin_width):
    """Per-trial band power ``[N, n_bins]``: channel-mean of ``|DFT|^2`` summed over each bin."""
    signals = np.asarray(signals, dtype=np.float64)
    if signals.ndim != 3:
        raise ValidationError(f"expected [N, T, D], got shape {signals.shape}")
    psd = np.abs(np.fft.rfft(signals, axis=1)) ** 2 / signals.shape[1]  # [N, F, D]
    psd = psd.mean(axis=2)
    n_freq = psd.shape[1]
    edges = np.arange(0, n_freq + bin_width, bin_width)
    edges[-1] = min(edges[-1], n_freq)
    edges = np.unique(edges)
    power = np.add.reduceat(psd, edges[:-1], axis=1)
    return power, edges


def fbd_from_powers(power, y, s, eps=FBD_EPS):
    """``(intra, inter)`` from per-trial band powers ``[N, n_bins]``."""
    y, s = np.asarray(y), np.asarray(s)
    intra_terms, means = [], []
    for label in np.unique(y):
        subjects = np.unique(s[y == label])
        cell = np.stack([power[(y == label) & (s == subj)].mean(axis=0) for subj in subjects])
        means.append(cell.mean(axis=0))
        if len(subjects) < 2:
            warnings.warn(f"class {label} has a single subject; excluded from Intra", stacklevel=3)
            continue
        intra_terms.append(cell.std(axis=0))
    if not intra_terms:
        raise ValidationError("no class has two or more subjects; Intra is undefined")
    means = np.stack(means)
    return np.mean(intra_terms, axis=0), means.max(axis=0) - means.min(axis=0)


def fbd(data, y, s, bin_width=1, fs=None, bin_hz=None, band_range=None, eps=FBD_EPS):
    """Frequency-band discriminability of signals or temporal embeddings ``[N, T, D]``.

    Bins are ``bin_width`` DFT bins wide, or ``bin_hz`` wide when the sampling
    rate ``fs`` is given. ``band_range=(lo, hi)`` selects FBD bins ``lo..hi-1``
    for the band-level average (all bins by default).
    """
    data = np.asarray(data, dtype=np.float64)
    if len(data) != len(y) or len(data) != len(s):
        raise ValidationError("data, y and s must have the same length")
    if bin_hz is not None:
        if fs is None:
            raise ConfigurationError("bin_hz needs the sampling rate fs")
        bin_width = max(1, int(round(bin_hz * data.shape[1] / fs)))
    if bin_width < 1:
        raise ConfigurationError("bin_width must be >= 1")
    power, edges = band_powers(data, int(bin_width))
    intra, inter = fbd_from_powers(power, y, s, eps)
    values = inter / (intra + eps)
    lo, hi = band_range if band_range is not None else (0, len(values))
    if not 0 <= lo < hi <= len(values):
        raise ConfigurationError(f"band_range {band_range} outside [0, {len(values)}]")
    return FbdReport(edges, intra, inter, values, float(values[lo:hi].mean()), (lo, hi))


def fourier_discrepancy(coords, y):
    """Squared-distance intra/inter discrepancies per frequency bin.

    ``coords`` is ``[N, F, P]``: P real Fourier coordinates per bin (cosine and
    sine coefficients, possibly for several channels). Intra is the mean
    squared distance to the class mean, Inter the mean squared distance between
    distinct class means.
    """
    y = np.asarray(y)
    labels = np.unique(y)
    if len(labels) < 2:
        raise ValidationError("need at least two classes")
    mu = np.stack([coords[y == c].mean(axis=0) for c in labels])  # [K, F, P]
    intra = np.mean(np.sum((coords - mu[np.searchsorted(labels, y)]) ** 2, axis=-1), axis=0)
    diff = mu[:, None] - mu[None, :]
    pair = np.sum(diff**2, axis=-1)  # [K, K, F]
    k = len(labels)
    inter = pair.sum(axis=(0, 1)) / (k * (k - 1))
    return intra, inter


def fourier_coordinates(signals):
    spec = np.fft.rfft(np.asarray(signals, dtype=np.float64), axis=1)  # [N, F, C]
    return np.concatenate([spec.real, spec.imag], axis=-1)


def fbd_corollary_check(signals, y, alpha, beta, tol=0.05):
    """Contract intra-class spread by ``alpha`` and expand class separation by ``beta``.

    Works on the real Fourier coordinates of ``signals [N, T, C]``. Each
    sample is rebuilt as ``grand + sqrt(beta) (mu_y - grand) + sqrt(alpha) (a - mu_y)``,
    which scales every bin's squared intra discrepancy by ``alpha`` and its
    squared inter discrepancy by ``beta``. Returns the smallest per-bin ratio
    ``FBD' / FBD`` over bins where both discrepancies are positive, after
    checking that it is at least ``beta / alpha * (1 - tol)``.
    """
    if not 0.0 < alpha <= 1.0 or beta < 1.0:
        raise ConfigurationError(f"need 0 < alpha <= 1 and beta >= 1, got {alpha}, {beta}")
    y = np.asarray(y)
    coords = fourier_coordinates(signals)
    intra, inter = fourier_discrepancy(coords, y)
    scale = max(intra.max(), inter.max(), 1e-300)
    valid = (intra > 1e-12 * scale) & (inter > 1e-12 * scale)
    if not valid.any():
        raise ValidationError("degenerate base set: no bin has both intra and inter discrepancy")
    labels = np.unique(y)
    mu = np.stack([coords[y == c].mean(axis=0) for c in labels])
    grand = mu.mean(axis=0)
    own = mu[np.searchsorted(labels, y)]
    moved = grand + np.sqrt(beta) * (own - grand) + np.sqrt(alpha) * (coords - own)
    intra2, inter2 = fourier_discrepancy(moved, y)
    ratio = float(np.min((inter2[valid] / intra2[valid]) / (inter[valid] / intra[valid])))
    if ratio < beta / alpha * (1.0 - tol):
        raise NumericError(f"FBD ratio {ratio:.4f} below the bound {beta / alpha:.4f}")
    return ratio


# --- representation diagnostics ---------------------------------------------------


def silhouette(embeddings, labels):
    """Mean silhouette with Euclidean distance; singleton clusters score 0."""
    x = np.asarray(embeddings, dtype=np.float64)
    labels = np.asarray(labels)
    uniq = np.unique(labels)
    if len(uniq) < 2:
        raise ValidationError("silhouette needs at least two labels")
    dist = cdist(x, x)
    members = [labels == u for u in uniq]
    sizes = np.array([m.sum() for m in members])
    sums = np.stack([dist[:, m].sum(axis=1) for m in members], axis=1)  # [N, K]
    own = np.searchsorted(uniq, labels)
    n = np.arange(len(x))
    a = sums[n, own] / np.maximum(sizes[own] - 1, 1)
    other = sums / sizes
    other[n, own] = np.inf
    b = other.min(axis=1)
    denom = np.maximum(a, b)
    score = np.where((sizes[own] > 1) & (denom > 0), (b - a) / np.where(denom > 0, denom, 1.0), 0.0)
    return float(score.mean())


def subject_probe(embeddings, subjects, test_size=0.3, seed=0, hidden=64, max_iter=500):
    """Macro-F1 (percent) of a one-hidden-layer MLP predicting subject identity.

    Embeddings are frozen, standardised, and split per sample (stratified by
    subject). Subjects with fewer than two samples are dropped with a warning.
    """
    from sklearn.model_selection import train_test_split
    from sklearn.neural_network import MLPClassifier
    from sklearn.preprocessing import StandardScaler

    x = np.asarray(embeddings, dtype=np.float64)
    s = np.asarray(subjects)
    if x.ndim != 2 or len(x) != len(s):
        raise ValidationError("embeddings must be [N, D] with one subject id per row")
    ids, counts = np.unique(s, return_counts=True)
    rare = ids[counts < 2]
    if len(rare):
        warnings.warn(f"subjects {rare.tolist()} have fewer than two samples; excluded", stacklevel=2)
        keep = ~np.isin(s, rare)
        x, s = x[keep], s[keep]
        ids = ids[counts >= 2]
    if len(ids) < 2:
        raise ValidationError("the probe needs at least two subjects")
    target = np.searchsorted(ids, s)
    x_tr, x_te, y_tr, y_te = train_test_split(x, target, test_size=test_size, random_state=seed, stratify=target)
    scaler = StandardScaler().fit(x_tr)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        probe = MLPClassifier(hidden_layer_sizes=(hidden,), max_iter=max_iter, random_state=seed)
        probe.fit(scaler.transform(x_tr), y_tr)
    return macro_f1(y_te, probe.predict(scaler.transform(x_te)), num_classes=len(ids))
