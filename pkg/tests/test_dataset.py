import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from specdrift.dataset import (
    DriftSpec,
    SplitPlan,
    TimeSeriesBatch,
    generate,
    read_bts,
    split_by_subject,
    subject_drift,
    write_bts,
)
from specdrift.errors import ConfigurationError, FormatError, ValidationError

SMALL = dict(num_subjects=3, samples_per_subject=6, length=32, n_channels=2, peaks=[[3], [5]], amplitudes=[[1.0], [1.0]])


class TestGenerate:
    def test_shapes_and_labels(self):
        data = generate(DriftSpec(**SMALL), seed=0)
        assert data.X.shape == (18, 32, 2)
        assert np.bincount(data.s).tolist() == [6, 6, 6]
        assert np.bincount(data.y).tolist() == [9, 9]

    def test_deterministic(self):
        a, b = generate(DriftSpec(**SMALL), 3), generate(DriftSpec(**SMALL), 3)
        np.testing.assert_array_equal(a.X, b.X)
        assert not np.array_equal(a.X, generate(DriftSpec(**SMALL), 4).X)

    def test_subject_streams_independent(self):
        # adding subjects must not change the earlier ones
        a = generate(DriftSpec(**SMALL), 1)
        b = generate(DriftSpec(**{**SMALL, "num_subjects": 5}), 1)
        np.testing.assert_array_equal(a.X, b.X[:18])

    def test_zero_drift_is_identical(self):
        spec = DriftSpec(**{**SMALL, "sigma_gain": 0.0, "theta": 0.0, "sigma_noise": 0.0, "phase_jitter": 0.0})
        data = generate(spec, 0)
        for k in range(2):
            block = data.X[data.y == k]
            np.testing.assert_allclose(block, np.broadcast_to(block[0], block.shape), atol=1e-12)

    def test_default_peaks(self):
        spec = DriftSpec(num_subjects=3, samples_per_subject=40)
        data = generate(spec, 0)
        for k, peaks in enumerate(spec.peaks):
            psd = (np.abs(np.fft.rfft(data.X[data.y == k], axis=1)) ** 2).mean(axis=(0, 2))
            top = sorted(np.argsort(psd)[-2:].tolist())
            assert top == sorted(peaks)

    def test_drift_is_per_subject(self):
        spec = DriftSpec(**SMALL)
        g0, p0 = subject_drift(spec, 0, 0)
        g1, _ = subject_drift(spec, 0, 1)
        assert g0.shape == (spec.n_bands,) and not np.allclose(g0, g1)
        assert np.all(np.abs(p0) <= spec.theta)

    def test_drift_scales_band_amplitude(self):
        spec = DriftSpec(**{**SMALL, "theta": 0.0, "sigma_noise": 0.0, "phase_jitter": 0.0, "n_bands": 1, "channel_lag": 0.0})
        data = generate(spec, 5)
        for subject in range(3):
            gain, _ = subject_drift(spec, 5, subject)
            x = data.X[(data.s == subject) & (data.y == 0)][0, :, 0]
            assert np.abs(x).max() == pytest.approx(gain[0], rel=1e-9)

    @pytest.mark.parametrize("kwargs", [
        {"peaks": [[3]], "amplitudes": [[1.0]]}, {"peaks": [[40], [5]]}, {"theta": 4.0}, {"sigma_gain": -1.0},
        {"length": 2}, {"peaks": [[3, 4], [5]], "amplitudes": [[1.0], [1.0]]},
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(ConfigurationError):
            DriftSpec(**{**SMALL, **kwargs})

    def test_batch_validation(self):
        with pytest.raises(ValidationError):
            TimeSeriesBatch(np.ones((2, 4, 1)), np.array([0, 2]), np.array([0, 0]), 2, 1)
        with pytest.raises(ValidationError):
            TimeSeriesBatch(np.ones((2, 4)), np.array([0, 1]), np.array([0, 0]), 2, 1)


class TestSplits:
    def test_sixty_twenty_twenty(self):
        plan = split_by_subject(range(10), ratios=(0.6, 0.2, 0.2), seed=0)
        assert (len(plan.train), len(plan.val), len(plan.test)) == (6, 2, 2)

    def test_remainder_goes_to_train(self):
        plan = split_by_subject(range(7), ratios=(0.6, 0.2, 0.2), seed=0)
        assert (len(plan.train), len(plan.val), len(plan.test)) == (5, 1, 1)

    def test_missing_subject(self):
        with pytest.raises(ValidationError):
            split_by_subject([1, 2, 3], explicit=({1, 2}, {3}, {4}))

    def test_overlap_rejected(self):
        with pytest.raises(ValidationError):
            SplitPlan((1, 2), (2,), (3,))

    @settings(max_examples=200, deadline=None)
    @given(st.integers(3, 60), st.integers(0, 10**6), st.floats(0.05, 0.4), st.floats(0.05, 0.4))
    def test_disjoint_and_covering(self, n, seed, val, test):
        plan = split_by_subject(range(n), ratios=(1 - val - test, val, test), seed=seed)
        parts = [set(plan.train), set(plan.val), set(plan.test)]
        assert not (parts[0] & parts[1] or parts[0] & parts[2] or parts[1] & parts[2])
        assert parts[0] | parts[1] | parts[2] == set(range(n))

    def test_samples_follow_subjects(self):
        data = generate(DriftSpec(**{**SMALL, "num_subjects": 5}), 0)
        plan = split_by_subject(data.s, explicit=([0, 1, 2], [3], [4]))
        idx = plan.indices(data)
        assert set(data.s[idx["train"]]) == {0, 1, 2}
        assert set(data.s[idx["test"]]) == {4}
        assert sum(len(v) for v in idx.values()) == len(data)

    def test_subject_dependent(self):
        data = generate(DriftSpec(**SMALL), 0)
        plan = split_by_subject(data.s, ratios=(0.5, 0.25, 0.25), seed=1, mode="subject_dependent")
        idx = plan.indices(data)
        assert [len(idx[k]) for k in ("train", "val", "test")] == [12, 3, 3]
        assert set(data.s[idx["test"]]) == {0, 1, 2}
        assert not set(idx["train"]) & set(idx["test"])

    def test_round_trip_dict(self):
        plan = split_by_subject(range(10), ratios=(0.6, 0.2, 0.2), seed=2)
        assert SplitPlan.from_dict(plan.to_dict()) == plan
        with pytest.raises(ConfigurationError):
            SplitPlan.from_dict({**plan.to_dict(), "bogus": 1})

    @pytest.mark.parametrize("kwargs", [{}, {"ratios": (0.5, 0.5)}, {"ratios": (0.5, 0.3, 0.3)}])
    def test_bad_arguments(self, kwargs):
        with pytest.raises(ConfigurationError):
            split_by_subject(range(5), **kwargs)


class TestBtsd:
    def test_round_trip(self, tmp_path):
        data = generate(DriftSpec(**SMALL), 0)
        path = tmp_path / "d.btsd"
        write_bts(path, data)
        back = read_bts(path)
        np.testing.assert_allclose(back.X, data.X.astype(np.float32))
        np.testing.assert_array_equal(back.y, data.y)
        np.testing.assert_array_equal(back.s, data.s)
        assert (back.num_classes, back.num_subjects) == (2, 3)

    def test_layout(self, tmp_path):
        data = TimeSeriesBatch(np.arange(6.0).reshape(1, 3, 2), np.array([1]), np.array([4]), 2, 5)
        path = tmp_path / "d.btsd"
        write_bts(path, data)
        raw = path.read_bytes()
        assert struct.unpack(">I", raw[:4])[0] == 0x42545344
        assert struct.unpack("<6I", raw[4:28]) == (1, 1, 3, 2, 2, 5)
        assert np.frombuffer(raw[28:52], "<f4").tolist() == [0, 1, 2, 3, 4, 5]
        assert struct.unpack("<HH", raw[52:]) == (1, 4)

    def corrupt(self, tmp_path, edit):
        data = generate(DriftSpec(**SMALL), 0)
        path = tmp_path / "d.btsd"
        write_bts(path, data)
        raw = bytearray(path.read_bytes())
        raw = edit(raw)
        path.write_bytes(bytes(raw))
        with pytest.raises(FormatError) as info:
            read_bts(path)
        return info.value.offset

    def test_bad_magic(self, tmp_path):
        assert self.corrupt(tmp_path, lambda r: b"XXXX" + r[4:]) == 0

    def test_bad_version(self, tmp_path):
        assert self.corrupt(tmp_path, lambda r: r[:4] + struct.pack("<I", 9) + r[8:]) == 4

    def test_short_header(self, tmp_path):
        assert self.corrupt(tmp_path, lambda r: r[:10]) == 10

    def test_truncated(self, tmp_path):
        record = 32 * 2 * 4 + 4
        assert self.corrupt(tmp_path, lambda r: r[:28 + 2 * record + 5]) == 28 + 2 * record

    def test_trailing(self, tmp_path):
        assert self.corrupt(tmp_path, lambda r: r + b"\0") == 28 + 18 * (32 * 2 * 4 + 4)

    def test_label_out_of_range(self, tmp_path):
        record = 32 * 2 * 4 + 4

        def edit(r):
            r[28 + record + 256:28 + record + 258] = struct.pack("<H", 7)
            return r

        assert self.corrupt(tmp_path, edit) == 28 + record + 256
