"""Synthetic spectral-drift data, subject-disjoint splits and the BTSD file format.

Each class owns a spectral template (a few peaks per channel). A subject
multiplies every frequency band of that template by a gain and rotates it by
a phase, both drawn once per subject. Samples then get a small per-peak phase
jitter and white Gaussian noise.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigurationError, FormatError, ValidationError
from .spectral import uniform_bands

BTSD_MAGIC = b"BTSD"  # 0x42545344 read as a big-endian u32
BTSD_VERSION = 1
_HEADER = struct.Struct("<4s6I")


@dataclass
class DriftSpec:
    num_classes: int = 2
    num_subjects: int = 8
    peaks: list = field(default_factory=lambda: [[5, 10], [7, 14]])  # bins, per class
    amplitudes: list = field(default_factory=lambda: [[1.0, 0.6], [1.0, 0.6]])
    sigma_gain: float = 0.6
    theta: float = 1.0
    sigma_noise: float = 0.3
    length: int = 128
    n_channels: int = 4
    samples_per_subject: int = 200
    phase_jitter: float = 0.3  # per-sample, per-peak half-width in radians
    channel_lag: float = 2.0  # delay in samples between consecutive channels
    n_bands: int = 6  # bands over which subject drift is drawn

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.num_classes < 1 or self.num_subjects < 1:
            raise ConfigurationError("num_classes and num_subjects must be >= 1")
        if len(self.peaks) != self.num_classes or len(self.amplitudes) != self.num_classes:
            raise ConfigurationError("peaks and amplitudes need one entry per class")
        half = self.length // 2
        for bins, amps in zip(self.peaks, self.amplitudes):
            if len(bins) != len(amps):
                raise ConfigurationError("each peak needs exactly one amplitude")
            for b in bins:
                if not 1 <= int(b) < half:
                    raise ConfigurationError(f"peak bin {b} must lie in [1, {half})")
        if self.sigma_gain < 0 or self.sigma_noise < 0:
            raise ConfigurationError("sigma_gain and sigma_noise must be non-negative")
        if not 0.0 <= self.theta <= math.pi:
            raise ConfigurationError(f"theta must lie in [0, pi], got {self.theta}")
        if not 0.0 <= self.phase_jitter <= math.pi:
            raise ConfigurationError(f"phase_jitter must lie in [0, pi], got {self.phase_jitter}")
        if self.samples_per_subject < 1 or self.n_channels < 1:
            raise ConfigurationError("samples_per_subject and n_channels must be >= 1")
        if self.length < 4:
            raise ConfigurationError("length must be >= 4")
        uniform_bands(self.length, self.n_bands)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            return cls(**json.load(fh))


@dataclass
class TimeSeriesBatch:
    X: np.ndarray  # [N, T, C] float64
    y: np.ndarray  # [N] class ids
    s: np.ndarray  # [N] subject ids
    num_classes: int
    num_subjects: int

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.int64)
        self.s = np.asarray(self.s, dtype=np.int64)
        if self.X.ndim != 3:
            raise ValidationError(f"X must be [N, T, C], got shape {self.X.shape}")
        n = len(self.X)
        if self.y.shape != (n,) or self.s.shape != (n,):
            raise ValidationError("y and s must have one entry per sample")
        if n and (self.y.min() < 0 or self.y.max() >= self.num_classes):
            raise ValidationError("class id out of range")
        if n and (self.s.min() < 0 or self.s.max() >= self.num_subjects):
            raise ValidationError("subject id out of range")

    def __len__(self):
        return len(self.X)

    def subset(self, index):
        return TimeSeriesBatch(self.X[index], self.y[index], self.s[index], self.num_classes, self.num_subjects)

    def for_subjects(self, subjects):
        return self.subset(np.isin(self.s, sorted(subjects)))


def _template(spec):
    """Complex half-spectrum per class, ``[K, T//2+1, C]``."""
    half = spec.length // 2 + 1
    lag = spec.channel_lag * np.arange(spec.n_channels)
    out = np.zeros((spec.num_classes, half, spec.n_channels), dtype=np.complex128)
    for k, (bins, amps) in enumerate(zip(spec.peaks, spec.amplitudes)):
        for b, a in zip(bins, amps):
            # scale so the time-domain sinusoid has amplitude ``a``
            out[k, int(b)] += a * spec.length / 2 * np.exp(-2j * np.pi * b * lag / spec.length)
    return out


def subject_drift(spec, seed, subject):
    """Per-band (gain, phase) for one subject, from the stream ``(seed, subject)``."""
    rng = np.random.default_rng([seed, subject, 0])
    gain = rng.lognormal(0.0, spec.sigma_gain, size=spec.n_bands) if spec.sigma_gain > 0 else np.ones(spec.n_bands)
    phase = rng.uniform(-spec.theta, spec.theta, size=spec.n_bands)
    return gain, phase


def generate(spec, seed=0):
    """Draw a :class:`TimeSeriesBatch` of ``num_subjects * samples_per_subject`` samples.

    Labels alternate within each subject so every subject sees all classes.
    Deterministic in ``seed``; each subject uses its own generator stream.
    """
    spec.validate()
    template = _template(spec)
    layout = uniform_bands(spec.length, spec.n_bands)
    owner = np.zeros(spec.length // 2 + 1, dtype=int)
    owner[1:] = layout.band_of_bin  # DC keeps band 0's value but the template has no DC
    peak_mask = np.abs(template) > 0
    n = spec.samples_per_subject
    xs, ys, ss = [], [], []
    for subject in range(spec.num_subjects):
        gain, phase = subject_drift(spec, seed, subject)
        drift = gain[owner] * np.exp(1j * phase[owner])
        drift[0] = 1.0
        rng = np.random.default_rng([seed, subject, 1])
        labels = np.arange(n) % spec.num_classes
        spectra = template[labels] * drift[None, :, None]
        jitter = rng.uniform(-spec.phase_jitter, spec.phase_jitter, size=(n, spectra.shape[1], 1))
        spectra = np.where(peak_mask[labels], spectra * np.exp(1j * jitter), 0.0)
        signal = np.fft.irfft(spectra, n=spec.length, axis=1)
        signal += rng.normal(0.0, spec.sigma_noise, size=signal.shape) if spec.sigma_noise > 0 else 0.0
        xs.append(signal)
        ys.append(labels)
        ss.append(np.full(n, subject))
    return TimeSeriesBatch(np.concatenate(xs), np.concatenate(ys), np.concatenate(ss), spec.num_classes, spec.num_subjects)


# --- splits -----------------------------------------------------------------


@dataclass
class SplitPlan:
    train: tuple
    val: tuple
    test: tuple
    mode: str = "cross_subject"
    sample_seed: int | None = None  # subject_dependent mode: seed of the sample-level split
    ratios: tuple | None = None

    def __post_init__(self):
        self.train, self.val, self.test = (tuple(sorted(int(v) for v in part)) for part in (self.train, self.val, self.test))
        if self.mode not in ("cross_subject", "subject_dependent"):
            raise ConfigurationError(f"unknown split mode {self.mode!r}")
        if self.mode == "cross_subject":
            check_disjoint(self)

    def indices(self, batch):
        """Sample indices ``{"train", "val", "test"}`` of ``batch`` under this plan."""
        if self.mode == "cross_subject":
            return {name: np.flatnonzero(np.isin(batch.s, getattr(self, name))) for name in ("train", "val", "test")}
        rng = np.random.default_rng(self.sample_seed)
        out = {"train": [], "val": [], "test": []}
        for subject in self.train:
            idx = rng.permutation(np.flatnonzero(batch.s == subject))
            n_val, n_test = (_floor(len(idx) * r) for r in self.ratios[1:])
            out["val"].append(idx[:n_val])
            out["test"].append(idx[n_val:n_val + n_test])
            out["train"].append(idx[n_val + n_test:])
        return {k: np.sort(np.concatenate(v)) if v else np.zeros(0, int) for k, v in out.items()}

    def to_dict(self):
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, data):
        unknown = set(data) - {"train", "val", "test", "mode", "sample_seed", "ratios"}
        if unknown:
            raise ConfigurationError(f"unknown split plan keys: {sorted(unknown)}")
        data = dict(data)
        if data.get("ratios") is not None:
            data["ratios"] = tuple(data["ratios"])
        return cls(**data)


def check_disjoint(plan):
    parts = {"train": set(plan.train), "val": set(plan.val), "test": set(plan.test)}
    for a, b in (("train", "val"), ("train", "test"), ("val", "test")):
        common = parts[a] & parts[b]
        if common:
            raise ValidationError(f"subjects {sorted(common)} appear in both {a} and {b}")


def _floor(x):
    return int(math.floor(x + 1e-9))


def split_by_subject(subject_ids, ratios=None, explicit=None, seed=0, mode="cross_subject"):
    """Partition subjects into train/val/test.

    ``ratios=(train, val, test)`` shuffles the subjects with ``seed`` and
    gives val and test ``floor(ratio * n)`` subjects each; the remainder goes
    to train. ``explicit=(train, val, test)`` takes the sets as given after
    checking that they are disjoint and that every id occurs in
    ``subject_ids``. In ``subject_dependent`` mode all subjects are used and
    the samples of each are split by ``ratios`` instead.
    """
    present = sorted(set(int(v) for v in np.asarray(subject_ids).ravel()))
    if (ratios is None) == (explicit is None):
        raise ConfigurationError("give exactly one of ratios or explicit")
    if explicit is not None:
        if mode != "cross_subject":
            raise ConfigurationError("explicit subject sets only apply to cross_subject mode")
        train, val, test = (set(int(v) for v in part) for part in explicit)
        plan = SplitPlan(train, val, test)
        missing = (train | val | test) - set(present)
        if missing:
            raise ValidationError(f"subjects {sorted(missing)} are not present in the data")
        return plan
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or min(ratios) < 0 or abs(sum(ratios) - 1.0) > 1e-9:
        raise ConfigurationError(f"ratios must be three non-negative numbers summing to 1, got {ratios}")
    if mode == "subject_dependent":
        return SplitPlan(present, (), (), mode=mode, sample_seed=seed, ratios=ratios)
    order = [present[i] for i in np.random.default_rng(seed).permutation(len(present))]
    n_val, n_test = _floor(len(order) * ratios[1]), _floor(len(order) * ratios[2])
    return SplitPlan(order[n_val + n_test:], order[:n_val], order[n_val:n_val + n_test], mode=mode, ratios=ratios)


# --- BTSD file format ---------------------------------------------------------


def _record_dtype(length, n_channels):
    return np.dtype([("x", "<f4", (length, n_channels)), ("y", "<u2"), ("s", "<u2")])


def write_bts(path, batch):
    n, length, channels = batch.X.shape
    if batch.num_classes > 0xFFFF or batch.num_subjects > 0xFFFF:
        raise ValidationError("BTSD stores labels and subjects as u16")
    records = np.zeros(n, dtype=_record_dtype(length, channels))
    records["x"] = batch.X
    records["y"] = batch.y
    records["s"] = batch.s
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(BTSD_MAGIC, BTSD_VERSION, n, length, channels, batch.num_classes, batch.num_subjects))
        fh.write(records.tobytes())


def read_bts(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise FormatError(f"header needs {_HEADER.size} bytes, file has {len(raw)}", offset=len(raw))
    magic, version, n, length, channels, num_classes, num_subjects = _HEADER.unpack_from(raw)
    if magic != BTSD_MAGIC:
        raise FormatError(f"bad magic {magic!r}", offset=0)
    if version != BTSD_VERSION:
        raise FormatError(f"unsupported version {version}", offset=4)
    dtype = _record_dtype(length, channels)
    expected = _HEADER.size + n * dtype.itemsize
    if len(raw) < expected:
        complete = (len(raw) - _HEADER.size) // dtype.itemsize
        offset = _HEADER.size + complete * dtype.itemsize
        raise FormatError(f"truncated: record {complete} of {n} is incomplete", offset=offset)
    if len(raw) > expected:
        raise FormatError(f"{len(raw) - expected} trailing bytes after the last record", offset=expected)
    records = np.frombuffer(raw, dtype=dtype, count=n, offset=_HEADER.size)
    for name, limit in (("y", num_classes), ("s", num_subjects)):
        bad = np.flatnonzero(records[name] >= limit)
        if bad.size:
            field_offset = dtype.fields[name][1]
            raise FormatError(f"{name} value {records[name][bad[0]]} out of range", offset=_HEADER.size + bad[0] * dtype.itemsize + field_offset)
    X = records["x"].astype(np.float64).reshape(n, length, channels)
    return TimeSeriesBatch(X, records["y"].astype(np.int64), records["s"].astype(np.int64), num_classes, num_subjects)
