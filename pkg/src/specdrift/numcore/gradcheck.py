"""Central finite-difference verification of analytic gradients."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import NumericError
from .tensor import frozen_stopgrad


@dataclass
class GradCheckReport:
    tol: float
    errors: dict = field(default_factory=dict)  # name -> max relative error

    @property
    def max_rel_err(self):
        return max(self.errors.values(), default=0.0)

    @property
    def passed(self):
        return self.max_rel_err < self.tol

    def summary(self):
        verdict = "PASS" if self.passed else "FAIL"
        op = "<" if self.passed else ">="
        return f"{verdict} max_rel_err={self.max_rel_err:.3e} ({op}{self.tol:g})"


def _evaluate(f):
    value = f()
    out = float(np.asarray(value.data).reshape(-1)[0])
    if not np.isfinite(out):
        raise NumericError("grad_check: objective is not finite")
    return value, out


def grad_check(f, params, h=1e-5, tol=1e-4, max_coords=None, seed=0, floor=1e-6):
    """Compare backprop gradients of scalar ``f()`` against central differences.

    ``params`` maps names to leaf tensors (or is a list of them) that ``f``
    closes over. Each parameter's error is the largest coordinate discrepancy
    relative to that parameter's largest gradient magnitude (never below
    ``floor``). Stop-gradient outputs are held at their base-point values
    while perturbing, matching the derivative the tape computes.
    ``max_coords`` caps how many coordinates per parameter are probed, chosen
    with a seeded generator.
    """
    if not isinstance(params, dict):
        params = {f"p{i}": p for i, p in enumerate(params)}
    for p in params.values():
        p.grad = None
    with frozen_stopgrad() as trace:
        value, _ = _evaluate(f)
        value.backward()
        trace.rewind()
        return _compare(f, params, trace, h, tol, max_coords, seed, floor)


def _compare(f, params, trace, h, tol, max_coords, seed, floor):
    rng = np.random.default_rng(seed)
    report = GradCheckReport(tol=tol)
    for name, p in params.items():
        analytic = np.zeros_like(p.data) if p.grad is None else p.grad
        flat = p.data.reshape(-1)
        coords = np.arange(flat.size)
        if max_coords is not None and flat.size > max_coords:
            coords = np.sort(rng.choice(flat.size, size=max_coords, replace=False))
        numeric = np.empty(coords.size)
        for n, i in enumerate(coords):
            orig = flat[i]
            flat[i] = orig + h
            trace.rewind()
            _, up = _evaluate(f)
            flat[i] = orig - h
            trace.rewind()
            _, down = _evaluate(f)
            flat[i] = orig
            numeric[n] = (up - down) / (2.0 * h)
        a = analytic.reshape(-1)[coords]
        scale = max(np.abs(a).max(initial=0.0), np.abs(numeric).max(initial=0.0), floor)
        report.errors[name] = float(np.abs(a - numeric).max(initial=0.0) / scale)
    return report
