from .gradcheck import numerical_gradient, relative_error
from .tensor import (
    Tape,
    Tensor,
    abs,
    add,
    as_tensor,
    backward,
    complex_matmul,
    concat,
    div,
    leaky_relu,
    log,
    matmul,
    mean,
    mul,
    relu,
    reshape,
    sigmoid,
    sqrt,
    square,
    sub,
    sum,
    take,
    tanh,
    transpose,
)

__all__ = [
    "Tape",
    "Tensor",
    "abs",
    "add",
    "as_tensor",
    "backward",
    "complex_matmul",
    "concat",
    "div",
    "leaky_relu",
    "log",
    "matmul",
    "mean",
    "mul",
    "relu",
    "reshape",
    "sigmoid",
    "sqrt",
    "square",
    "sub",
    "sum",
    "take",
    "tanh",
    "transpose",
    "numerical_gradient",
    "relative_error",
]
