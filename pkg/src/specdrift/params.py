"""Named parameter registry and the small dense building blocks used by every model part."""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, FormatError
from .numcore import Tensor, gelu, linear


class ParameterStore:
    """Flat, insertion-ordered mapping of unique names to learnable tensors."""

    def __init__(self):
        self._params = {}

    def add(self, name, value):
        if name in self._params:
            raise ConfigurationError(f"duplicate parameter name {name!r}")
        tensor = Tensor(value, requires_grad=True)
        self._params[name] = tensor
        return tensor

    def scope(self, prefix):
        return _Scope(self, prefix)

    def __getitem__(self, name):
        return self._params[name]

    def __contains__(self, name):
        return name in self._params

    def __len__(self):
        return len(self._params)

    def __iter__(self):
        return iter(self._params)

    def items(self):
        return self._params.items()

    def zero_grad(self):
        for p in self._params.values():
            p.grad = None

    def num_parameters(self):
        return sum(p.size for p in self._params.values())

    def state_dict(self):
        return {name: p.data.copy() for name, p in self._params.items()}

    def load_state_dict(self, state):
        missing = set(self._params) - set(state)
        unexpected = set(state) - set(self._params)
        if missing or unexpected:
            raise ConfigurationError(
                f"state mismatch: missing={sorted(missing)} unexpected={sorted(unexpected)}"
            )
        for name, p in self._params.items():
            value = np.asarray(state[name], dtype=np.float64)
            if value.shape != p.shape:
                raise ConfigurationError(f"{name}: shape {value.shape} != {p.shape}")
            p.data[...] = value


class _Scope:
    def __init__(self, store, prefix):
        self.store = store
        self.prefix = prefix

    def add(self, name, value):
        return self.store.add(f"{self.prefix}.{name}", value)

    def scope(self, prefix):
        return _Scope(self.store, f"{self.prefix}.{prefix}")


# -- checkpoints --------------------------------------------------------
# Binary payload: concatenated little-endian float64 arrays. The JSON index
# beside it records name/shape/offset for each array plus free-form metadata.

def save_checkpoint(path, store, metadata=None):
    path = Path(path)
    index = {"format": "specdrift-checkpoint", "version": 1, "arrays": [], "metadata": metadata or {}}
    offset = 0
    with open(path, "wb") as fh:
        for name, p in store.items():
            raw = np.ascontiguousarray(p.data, dtype="<f8").tobytes()
            fh.write(raw)
            index["arrays"].append({"name": name, "shape": list(p.shape), "offset": offset})
            offset += len(raw)
    index_path(path).write_text(json.dumps(index, indent=2, sort_keys=True))


def index_path(path):
    path = Path(path)
    return path.with_name(path.name + ".json")


def load_checkpoint(path):
    """Return ``(state, metadata)`` from a checkpoint written by :func:`save_checkpoint`."""
    path = Path(path)
    try:
        index = json.loads(index_path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"unreadable checkpoint index for {path}: {exc}") from None
    blob = path.read_bytes()
    state = {}
    for entry in index["arrays"]:
        count = int(np.prod(entry["shape"], dtype=np.int64))
        start, stop = entry["offset"], entry["offset"] + 8 * count
        if stop > len(blob):
            raise FormatError(f"checkpoint truncated while reading {entry['name']!r}", offset=len(blob))
        state[entry["name"]] = np.frombuffer(blob[start:stop], dtype="<f8").reshape(entry["shape"]).copy()
    return state, index.get("metadata", {})


# -- dense blocks -------------------------------------------------------

def uniform_init(rng, fan_in, shape):
    bound = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Dense:
    """Affine map ``x @ W + b``. ``zero=True`` starts both at zero."""

    def __init__(self, scope, name, fan_in, fan_out, rng, zero=False, bias=True):
        sub = scope.scope(name)
        w = np.zeros((fan_in, fan_out)) if zero else uniform_init(rng, fan_in, (fan_in, fan_out))
        self.weight = sub.add("weight", w)
        self.bias = None
        if bias:
            b = np.zeros(fan_out) if zero else uniform_init(rng, fan_in, (fan_out,))
            self.bias = sub.add("bias", b)

    def __call__(self, x):
        return linear(x, self.weight, self.bias)


class MLP:
    """One hidden GELU layer; the output layer may be zero-initialised."""

    def __init__(self, scope, name, fan_in, hidden, fan_out, rng, zero_output=False):
        sub = scope.scope(name)
        self.hidden = Dense(sub, "hidden", fan_in, hidden, rng)
        self.out = Dense(sub, "out", hidden, fan_out, rng, zero=zero_output)

    def __call__(self, x):
        return self.out(gelu(self.hidden(x)))


class Affine:
    """Per-feature scale and shift (the learnable part of a layer norm)."""

    def __init__(self, scope, name, dim):
        sub = scope.scope(name)
        self.scale = sub.add("scale", np.ones(dim))
        self.shift = sub.add("shift", np.zeros(dim))

    def __call__(self, x):
        return x * self.scale + self.shift
