import itertools

import numpy as np
import pytest
from sklearn.metrics import average_precision_score, f1_score, roc_auc_score
from sklearn.metrics import silhouette_score

from specdrift.errors import ConfigurationError, NumericError, ValidationError
from specdrift.metrics import (
    average_precision,
    band_powers,
    binary_auroc,
    classification_metrics,
    fbd,
    fbd_corollary_check,
    fbd_from_powers,
    fourier_coordinates,
    fourier_discrepancy,
    macro_f1,
    silhouette,
    subject_probe,
)


def pair_auroc(positive, score):
    pos, neg = score[positive], score[~positive]
    wins = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p, n in itertools.product(pos, neg))
    return wins / (len(pos) * len(neg))


def brute_macro_f1(y, pred, k):
    out = []
    for c in range(k):
        tp = sum(1 for a, b in zip(y, pred) if a == c and b == c)
        fp = sum(1 for a, b in zip(y, pred) if a != c and b == c)
        fn = sum(1 for a, b in zip(y, pred) if a == c and b != c)
        out.append(0.0 if tp == 0 else 2 * tp / (2 * tp + fp + fn))
    return 100 * sum(out) / k


class TestClassification:
    def test_fuzz_oracles(self):
        rng = np.random.default_rng(12345)
        for _ in range(1000):
            n = int(rng.integers(2, 13))
            k = int(rng.integers(2, 5))
            y = rng.integers(0, k, size=n)
            scores = rng.integers(0, 4, size=(n, k)).astype(float)  # coarse, so ties are common
            pred = scores.argmax(axis=1)
            assert macro_f1(y, pred, k) == pytest.approx(brute_macro_f1(y, pred, k), abs=1e-9)
            pos = y == 0
            if 0 < pos.sum() < n:
                assert binary_auroc(pos, scores[:, 0]) == pytest.approx(pair_auroc(pos, scores[:, 0]), abs=1e-12)

    def test_sklearn_oracle(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            n = int(rng.integers(4, 40))
            y = rng.integers(0, 2, size=n)
            if y.min() == y.max():
                continue
            s = np.round(rng.random(n), 1)
            assert binary_auroc(y == 1, s) == pytest.approx(roc_auc_score(y, s))
            assert average_precision(y == 1, s) == pytest.approx(average_precision_score(y, s))
            pred = (s > 0.5).astype(int)
            assert macro_f1(y, pred, 2) == pytest.approx(100 * f1_score(y, pred, average="macro", zero_division=0))

    def test_perfect(self):
        r = classification_metrics([0, 1, 1, 0], np.array([[0.9, 0.1], [0.2, 0.8], [0.3, 0.7], [0.6, 0.4]]))
        assert (r.accuracy, r.f1, r.auroc, r.auprc) == (100.0, 100.0, 100.0, 100.0)

    def test_binary_vector_scores(self):
        a = classification_metrics([0, 1, 1, 0], np.array([0.1, 0.8, 0.4, 0.6]))
        assert a.auroc == pytest.approx(75.0)
        assert a.accuracy == 50.0

    def test_absent_class_counts_zero(self):
        scores = np.eye(3)[[0, 1, 1]]
        r = classification_metrics([0, 1, 1], scores, 3)
        assert r.f1 == pytest.approx(200.0 / 3)

    def test_errors(self):
        with pytest.raises(ValidationError):
            classification_metrics([0, 1], np.ones((3, 2)))
        with pytest.raises(ValidationError):
            classification_metrics([0, 5], np.ones((2, 2)))
        with pytest.raises(ValidationError):
            classification_metrics([0, 1], np.array([[0, np.nan], [1, 0]]))


class TestFbd:
    def test_hand_example(self):
        power = np.array([[1.0], [3.0], [5.0], [7.0]])
        intra, inter = fbd_from_powers(power, [0, 0, 1, 1], [0, 1, 2, 3])
        assert intra[0] == pytest.approx(1.0) and inter[0] == pytest.approx(4.0)

    def test_single_subject_classes(self):
        with pytest.raises(ValidationError), pytest.warns(UserWarning):
            fbd_from_powers(np.ones((2, 1)), [0, 1], [0, 1])
        with pytest.warns(UserWarning):
            fbd_from_powers(np.arange(3.0)[:, None], [0, 0, 1], [0, 1, 2])

    def test_band_power_oracle(self):
        x = np.random.default_rng(0).normal(size=(3, 16, 2))
        power, edges = band_powers(x, 2)
        t = np.arange(16)
        for n in range(3):
            psd = [np.mean([abs(np.sum(x[n, :, c] * np.exp(-2j * np.pi * f * t / 16))) ** 2 / 16 for c in range(2)])
                   for f in range(9)]
            ref = [sum(psd[lo:hi]) for lo, hi in zip(edges[:-1], edges[1:])]
            np.testing.assert_allclose(power[n], ref)
        assert edges.tolist() == [0, 2, 4, 6, 8, 9]

    def test_fbd_report(self):
        rng = np.random.default_rng(1)
        t = np.arange(64)
        x, y, s = [], [], []
        for subj in range(6):
            k = subj % 2
            for _ in range(5):
                x.append(np.sin(2 * np.pi * (4 + 4 * k) * t / 64)[:, None] + 0.1 * rng.normal(size=(64, 1)))
                y.append(k)
                s.append(subj)
        rep = fbd(np.array(x), y, s, fs=64.0, bin_hz=2.0, band_range=(0, 8))
        assert len(rep.fbd) == len(rep.edges) - 1
        assert np.argmax(rep.inter) in (2, 4)
        with pytest.raises(ConfigurationError):
            fbd(np.array(x), y, s, bin_hz=2.0)

    @pytest.mark.parametrize("alpha, beta, bound", [(0.25, 1.0, 1.9), (0.5, 2.0, 3.8)])
    def test_corollary(self, alpha, beta, bound):
        rng = np.random.default_rng(2)
        x = rng.normal(size=(40, 32, 2))
        y = np.repeat([0, 1], 20)
        x[y == 1] += np.sin(2 * np.pi * 3 * np.arange(32) / 32)[:, None]
        assert fbd_corollary_check(x, y, alpha, beta) >= bound

    def test_corollary_exact_scaling(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=(30, 16, 1))
        y = np.repeat([0, 1, 2], 10)
        intra, inter = fourier_discrepancy(fourier_coordinates(x), y)
        assert fbd_corollary_check(x, y, 0.3, 1.5) == pytest.approx(5.0, rel=1e-9)
        assert np.all(intra >= 0) and np.all(inter >= 0)

    def test_corollary_arguments(self):
        with pytest.raises(ConfigurationError):
            fbd_corollary_check(np.ones((4, 8, 1)), [0, 0, 1, 1], 1.5, 1.0)
        with pytest.raises(ValidationError):
            fbd_corollary_check(np.ones((4, 8, 1)), [0, 0, 1, 1], 0.5, 1.0)

    def test_corollary_tolerance_is_enforced(self):
        with pytest.raises(NumericError):
            rng = np.random.default_rng(4)
            fbd_corollary_check(rng.normal(size=(10, 8, 1)), np.repeat([0, 1], 5), 0.5, 1.0, tol=-0.1)


class TestDiagnostics:
    def test_silhouette_matches_sklearn(self):
        rng = np.random.default_rng(5)
        x = rng.normal(size=(40, 3))
        labels = rng.integers(0, 4, size=40)
        assert silhouette(x, labels) == pytest.approx(silhouette_score(x, labels))

    def test_silhouette_singleton(self):
        x = np.array([[0.0], [0.1], [5.0]])
        assert silhouette(x, [0, 0, 1]) == pytest.approx(silhouette_score(x, [0, 0, 1]))

    def test_probe_one_hot(self):
        s = np.repeat(np.arange(8), 30)
        assert subject_probe(np.eye(8)[s], s) == pytest.approx(100.0)

    def test_probe_noise_is_chance(self):
        s = np.repeat(np.arange(8), 50)
        scores = [subject_probe(np.random.default_rng(seed).normal(size=(400, 16)), s, seed=seed, max_iter=200)
                  for seed in range(3)]
        assert abs(np.mean(scores) - 12.5) <= 5.0

    def test_probe_constant(self):
        s = np.repeat(np.arange(4), [10, 10, 10, 13])
        score = subject_probe(np.zeros((43, 3)), s)
        # every test sample gets one label; F1 of that class is 2p/(1+p), the rest 0
        from sklearn.model_selection import train_test_split

        _, _, _, y_te = train_test_split(np.zeros(43), s, test_size=0.3, random_state=0, stratify=s)
        majority_share = np.mean(y_te == 3)
        assert score == pytest.approx(100 * (2 * majority_share / (1 + majority_share)) / 4)

    def test_probe_drops_rare(self):
        s = np.array([0] * 10 + [1] * 10 + [2])
        with pytest.warns(UserWarning):
            subject_probe(np.eye(3)[s], s)
