"""Minimal float64 tensor engine: reverse-mode autodiff plus a real FFT pair."""

from .fft import ComplexTensor, cconcat, cmul, irfft, rfft
from .functional import (
    conv1d_same,
    cross_entropy,
    gelu,
    layer_norm,
    linear,
    log_softmax,
    shift_operators,
    softmax,
)
from .gradcheck import GradCheckReport, grad_check
from .tensor import (
    Tensor,
    abs_,
    add,
    as_tensor,
    backward,
    build_tape,
    concat,
    cos,
    div,
    exp,
    frozen_stopgrad,
    getitem,
    log,
    matmul,
    max_,
    maximum,
    mean,
    mul,
    neg,
    power,
    reshape,
    sin,
    sqrt,
    stack,
    stopgrad,
    sub,
    sum_,
    swapaxes,
    take,
    tanh,
    transpose,
    variance,
)

__all__ = [
    "ComplexTensor", "GradCheckReport", "Tensor", "abs_", "add", "as_tensor",
    "backward", "build_tape", "cconcat", "cmul", "concat", "cos", "conv1d_same",
    "cross_entropy", "div", "exp", "frozen_stopgrad", "gelu", "getitem", "grad_check", "irfft",
    "layer_norm", "linear", "log", "log_softmax", "matmul", "max_", "maximum",
    "mean", "mul", "neg", "power", "reshape", "rfft", "shift_operators", "sin",
    "softmax", "sqrt", "stack", "stopgrad", "sub", "sum_", "swapaxes", "take", "tanh",
    "transpose", "variance",
]
