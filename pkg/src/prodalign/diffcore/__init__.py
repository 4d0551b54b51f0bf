from .tensor import (
    ShapeError,
    Tensor,
    ZeroNormError,
    add,
    concat,
    constant,
    cosine_sim,
    embedding,
    exp,
    l2_normalize,
    layer_norm,
    log,
    logsumexp,
    matmul,
    mean,
    mean_pool,
    mul,
    neg,
    parameter,
    relu,
    reshape,
    rowsel,
    scale,
    shift,
    sigmoid,
    softmax,
    softplus,
    stack_rows,
    sub,
    tsum,
    transpose,
)
from .gradcheck import NonFiniteLossError, grad_check
from .optim import SGD

__all__ = [
    "ShapeError",
    "Tensor",
    "ZeroNormError",
    "add",
    "concat",
    "constant",
    "cosine_sim",
    "embedding",
    "exp",
    "l2_normalize",
    "layer_norm",
    "log",
    "logsumexp",
    "matmul",
    "mean",
    "mean_pool",
    "mul",
    "neg",
    "parameter",
    "relu",
    "reshape",
    "rowsel",
    "scale",
    "shift",
    "sigmoid",
    "softmax",
    "softplus",
    "stack_rows",
    "sub",
    "tsum",
    "transpose",
    "NonFiniteLossError",
    "grad_check",
    "SGD",
]
