"""Adam, mini-batch training with early stopping on validation macro-F1, evaluation."""

from __future__ import annotations

import csv
import json
import os
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .encoder import AlignedEncoder, EncoderConfig
from .errors import ConfigurationError, NumericError
from .metrics import classification_metrics
from .numcore import backward, cross_entropy
from .params import load_checkpoint, save_checkpoint


@dataclass
class TrainConfig:
    lr: float = 1e-4
    max_epochs: int = 100
    patience: int = 10
    batch_size: int = 32
    seeds: list = field(default_factory=lambda: [41, 42, 43, 44, 45])
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    eval_batch_size: int = 256

    def __post_init__(self):
        if self.lr <= 0:
            raise ConfigurationError(f"lr must be positive, got {self.lr}")
        if self.max_epochs < 1 or self.batch_size < 1 or self.eval_batch_size < 1:
            raise ConfigurationError("max_epochs and batch sizes must be >= 1")
        if self.patience < 0:
            raise ConfigurationError(f"patience must be >= 0, got {self.patience}")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1 and self.eps > 0):
            raise ConfigurationError("Adam needs betas in [0, 1) and eps > 0")

    def to_dict(self):
        return asdict(self)


class AdamState:
    def __init__(self):
        self.m = {}
        self.v = {}
        self.t = 0


def adam_step(params, grads, state, t, cfg):
    """One bias-corrected Adam update of the arrays in ``params`` (in place).

    ``params`` and ``grads`` map names to arrays; missing gradients count as
    zero. Raises :class:`NumericError` before touching anything if a gradient
    is non-finite.
    """
    if t < 1:
        raise ConfigurationError(f"Adam step counter starts at 1, got {t}")
    for name, g in grads.items():
        if g is not None and not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient for parameter {name!r} at step {t}")
    c1 = 1.0 - cfg.beta1**t
    c2 = 1.0 - cfg.beta2**t
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(p)
        m = state.m.get(name, np.zeros_like(p))
        v = state.v.get(name, np.zeros_like(p))
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * g
        v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g
        state.m[name], state.v[name] = m, v
        p -= cfg.lr * (m / c1) / (np.sqrt(v / c2) + cfg.eps)
    state.t = t
    return params, state


@dataclass
class TrainLog:
    epochs: list = field(default_factory=list)  # dicts: epoch, train_loss, val_* metrics
    best_epoch: int = 0
    best_val_f1: float = float("-inf")
    wall_time: float = 0.0

    def to_csv(self, path):
        if not self.epochs:
            return
        keys = list(self.epochs[0])
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=keys)
            writer.writeheader()
            for row in self.epochs:
                writer.writerow({k: repr(float(v)) if isinstance(v, (float, np.floating)) else v for k, v in row.items()})

    def to_dict(self):
        return asdict(self)


@dataclass
class FitResult:
    model: AlignedEncoder
    log: TrainLog
    checkpoint: str | None = None


def predict_proba(model, X, batch_size=256):
    out = []
    for start in range(0, len(X), batch_size):
        logits = model(X[start:start + batch_size]).logits.data
        out.append(softmax_np(logits))
    return np.concatenate(out) if out else np.zeros((0, model.cfg.num_classes))


def softmax_np(logits):
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def embed(model, X, batch_size=256, sequence=False):
    """Pooled embeddings ``[N, D]``, or the SCLN output sequence when ``sequence``."""
    out = []
    for start in range(0, len(X), batch_size):
        res = model(X[start:start + batch_size])
        out.append(res.sequence.data if sequence else res.embedding.data)
    return np.concatenate(out)


def evaluate_model(model, batch, batch_size=256):
    if len(batch) == 0:
        raise ConfigurationError("cannot evaluate on an empty split")
    return classification_metrics(batch.y, predict_proba(model, batch.X, batch_size), model.cfg.num_classes)


def fit(model_cfg, data, plan, train_cfg, seed, out_dir=None, verbose=False):
    """Train a fresh model; returns the best-validation model and its log.

    Stops once ``max(patience, 1)`` consecutive epochs bring no strict
    improvement of validation macro-F1, so ``patience=0`` stops at the first
    non-improving epoch. Given ``out_dir`` the best checkpoint and the epoch
    log CSV are written there.
    """
    parts = plan.indices(data)
    train, val = data.subset(parts["train"]), data.subset(parts["val"])
    if len(train) == 0 or len(val) == 0:
        raise ConfigurationError("train and validation splits must both be non-empty")
    model = AlignedEncoder(model_cfg, seed=seed)
    store = model.store
    shuffle_rng = np.random.default_rng([seed, 2])
    aug_rng = np.random.default_rng([seed, 3])
    state = AdamState()
    log = TrainLog()
    best_state = store.state_dict()
    stale = 0
    start = time.perf_counter()
    for epoch in range(1, train_cfg.max_epochs + 1):
        order = shuffle_rng.permutation(len(train))
        losses = []
        for lo in range(0, len(order), train_cfg.batch_size):
            idx = order[lo:lo + train_cfg.batch_size]
            store.zero_grad()
            out = model(train.X[idx], training=True, rng=aug_rng)
            loss = cross_entropy(out.logits, train.y[idx])
            backward(loss)
            params = {name: p.data for name, p in store.items()}
            grads = {name: p.grad for name, p in store.items()}
            adam_step(params, grads, state, state.t + 1, train_cfg)
            losses.append(float(loss.data))
        report = evaluate_model(model, val, train_cfg.eval_batch_size)
        row = {"epoch": epoch, "train_loss": float(np.mean(losses))}
        row.update({f"val_{k}": float(v) for k, v in report.to_dict().items()})
        log.epochs.append(row)
        if verbose:
            print(f"epoch {epoch:3d} loss {row['train_loss']:.4f} val_f1 {report.f1:.2f}", flush=True)
        if report.f1 > log.best_val_f1:
            log.best_val_f1, log.best_epoch = report.f1, epoch
            best_state = store.state_dict()
            stale = 0
        else:
            stale += 1
            if stale >= max(train_cfg.patience, 1):
                break
    log.wall_time = time.perf_counter() - start
    store.load_state_dict(best_state)
    checkpoint = None
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        checkpoint = os.path.join(out_dir, f"model_seed{seed}.ckpt")
        save_checkpoint(checkpoint, store, checkpoint_metadata(model_cfg, train_cfg, seed, log))
        log.to_csv(os.path.join(out_dir, f"log_seed{seed}.csv"))
    return FitResult(model, log, checkpoint)


def checkpoint_metadata(model_cfg, train_cfg, seed, log):
    return {
        "encoder": model_cfg.to_dict(),
        "train": train_cfg.to_dict(),
        "seed": seed,
        "best_epoch": log.best_epoch,
        "best_val_f1": log.best_val_f1,
    }


def load_model(path):
    """Rebuild a :class:`AlignedEncoder` from a checkpoint written by :func:`fit`."""
    arrays, metadata = load_checkpoint(path)
    cfg = EncoderConfig(**metadata["encoder"])
    model = AlignedEncoder(cfg, seed=metadata.get("seed", 0))
    model.store.load_state_dict(arrays)
    return model, metadata


def evaluate(checkpoint, batch):
    model, _ = load_model(checkpoint)
    return evaluate_model(model, batch)


def save_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
