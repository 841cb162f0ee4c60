"""Reverse-mode differentiation core, optimizer, and recurrent primitives."""

from .gradcheck import grad_check
from .gru import GruParams, bigru_encode, gru_cell
from .layers import Affine, TanhMlp, uniform_param, zero_param
from .optim import AdamState, adam_step, clip_global_norm
from .tensor import (
    Array,
    Tape,
    TapeRecord,
    Tensor,
    active_tape,
    add,
    as_tensor,
    backward,
    clip,
    concat,
    cross_entropy,
    dot,
    exp,
    log,
    lookup,
    matmul,
    mean,
    mul,
    ones,
    scale,
    set_finite_checks,
    sigmoid,
    slice_,
    softmax,
    softplus,
    stack,
    sub,
    sum_,
    tanh,
    zeros,
)

__all__ = [
    "Affine",
    "AdamState",
    "Array",
    "GruParams",
    "TanhMlp",
    "Tape",
    "TapeRecord",
    "Tensor",
    "active_tape",
    "adam_step",
    "add",
    "as_tensor",
    "backward",
    "bigru_encode",
    "clip",
    "clip_global_norm",
    "concat",
    "cross_entropy",
    "dot",
    "exp",
    "grad_check",
    "gru_cell",
    "log",
    "lookup",
    "matmul",
    "mean",
    "mul",
    "ones",
    "scale",
    "set_finite_checks",
    "sigmoid",
    "slice_",
    "softmax",
    "softplus",
    "stack",
    "sub",
    "sum_",
    "tanh",
    "uniform_param",
    "zero_param",
    "zeros",
]
