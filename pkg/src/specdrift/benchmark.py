"""Cross-subject comparison of alignment modules on synthetic spectral-drift data.

For every seed a fresh dataset is drawn, subjects are split 8/2/2, and one
encoder per alignment module is trained on identical data. Besides test
macro-F1 the run records FBD of the learned temporal features on the
held-out subjects and a subject-identity probe on pooled embeddings.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .dataset import DriftSpec, generate, split_by_subject
from .encoder import EncoderConfig
from .errors import ConfigurationError
from .metrics import fbd, subject_probe
from .trainer import TrainConfig, embed, evaluate_model, fit


@dataclass
class BenchmarkConfig:
    # weak peaks keep the task off the 100% ceiling; drift and noise stay at their defaults
    spec: dict = field(default_factory=lambda: {"amplitudes": [[0.07, 0.05], [0.07, 0.05]]})
    seeds: list = field(default_factory=lambda: [41, 42, 43, 44, 45])
    aligns: list = field(default_factory=lambda: ["none", "fbam", "tsam"])
    subjects: tuple = (8, 2, 2)  # train, val, test
    # a desk-scale encoder: one attention/alignment pair per scale, width 16
    encoder: dict = field(default_factory=lambda: {"n_layers": 2, "dim": 16, "ffn_dim": 32, "n_heads": 2})
    train: dict = field(default_factory=lambda: {"lr": 1e-3, "max_epochs": 6, "patience": 6, "batch_size": 64})
    fbd_range: tuple | None = None  # FBD bins of the first-scale features; default: template peaks

    def drift_spec(self):
        spec = DriftSpec(**{"num_subjects": sum(self.subjects), **self.spec})
        if spec.num_subjects != sum(self.subjects):
            raise ConfigurationError("num_subjects must equal the train/val/test subject total")
        return spec

    def band_range(self, spec):
        if self.fbd_range is not None:
            return tuple(self.fbd_range)
        # first-scale features have T/2 steps, so bin b keeps its index up to T/4
        peaks = [int(b) for bins in spec.peaks for b in bins]
        n_bins = spec.length // 4 + 1
        return (min(max(min(peaks) - 1, 0), n_bins - 1), min(max(peaks) + 2, n_bins))

    def to_dict(self):
        return asdict(self)


@dataclass
class BenchmarkResult:
    f1: dict  # align -> per-seed test macro-F1
    fbd: dict  # align -> per-seed band FBD of first-scale features, held-out subjects
    probe: dict  # align -> per-seed subject-probe macro-F1
    epochs: dict  # align -> per-seed best epoch
    wall_time: float

    def mean(self, what):
        return {a: float(np.mean(v)) for a, v in getattr(self, what).items()}

    def to_dict(self):
        out = asdict(self)
        out["means"] = {k: self.mean(k) for k in ("f1", "fbd", "probe")}
        return out


def first_scale(model, X, batch_size=256):
    """Normalised temporal features of the first pyramid scale, ``[N, T/2, D]``."""
    seq = embed(model, X, batch_size, sequence=True)
    return seq[:, : model.cfg.seq_len // 2]


def run_benchmark(cfg, verbose=False):
    spec = cfg.drift_spec()
    lo, hi = cfg.band_range(spec)
    n_train, n_val, _ = cfg.subjects
    keys = ("f1", "fbd", "probe", "epochs")
    acc = {k: {a: [] for a in cfg.aligns} for k in keys}
    start = time.perf_counter()
    for seed in cfg.seeds:
        data = generate(spec, seed)
        order = np.random.default_rng([seed, 4]).permutation(spec.num_subjects)
        plan = split_by_subject(data.s, explicit=(order[:n_train], order[n_train:n_train + n_val], order[n_train + n_val:]))
        parts = plan.indices(data)
        test = data.subset(parts["test"])
        held = data.subset(np.concatenate([parts["val"], parts["test"]]))
        train_cfg = TrainConfig(**cfg.train)
        for align in cfg.aligns:
            enc = EncoderConfig(
                n_channels=spec.n_channels, num_classes=spec.num_classes, seq_len=spec.length,
                **{**cfg.encoder, "align_module": align},
            )
            result = fit(enc, data, plan, train_cfg, seed)
            model = result.model
            acc["f1"][align].append(evaluate_model(model, test).f1)
            acc["fbd"][align].append(fbd(first_scale(model, held.X), held.y, held.s, band_range=(lo, hi)).band_fbd)
            acc["probe"][align].append(subject_probe(embed(model, data.X), data.s, seed=seed))
            acc["epochs"][align].append(result.log.best_epoch)
            if verbose:
                print(
                    f"seed {seed} {align:5s} f1 {acc['f1'][align][-1]:6.2f} fbd {acc['fbd'][align][-1]:.3f} "
                    f"probe {acc['probe'][align][-1]:6.2f} epoch {result.log.best_epoch}",
                    flush=True,
                )
    return BenchmarkResult(*(acc[k] for k in keys), wall_time=time.perf_counter() - start)
