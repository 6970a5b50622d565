"""Self-contained float64 autodiff kernel: tensors, tape, NN blocks, Adam."""

from .nn import (
    bilstm_encode,
    init_bilstm,
    init_mlp,
    mlp_apply,
    mlp_layer_count,
    uniform_init,
)
from .optim import adam_step
from .params import ParamStore
from .tensor import (
    L2_GUARD,
    Tape,
    Tensor,
    add,
    add_n,
    affine,
    backward,
    concat,
    concat_cols,
    dot,
    edge_transfer,
    exp,
    l2_normalize,
    l2_normalize_rows,
    log,
    lstm_step,
    matmul,
    maximum,
    minimum,
    mul,
    neg,
    norm_cap,
    pick,
    relu,
    row,
    sigmoid,
    slice1,
    softmax,
    stack_cols,
    stack_rows,
    sub,
    sum_all,
    tanh,
)

__all__ = [
    "L2_GUARD",
    "ParamStore",
    "Tape",
    "Tensor",
    "adam_step",
    "add",
    "add_n",
    "affine",
    "backward",
    "bilstm_encode",
    "concat",
    "concat_cols",
    "dot",
    "edge_transfer",
    "exp",
    "init_bilstm",
    "init_mlp",
    "l2_normalize",
    "l2_normalize_rows",
    "log",
    "lstm_step",
    "matmul",
    "maximum",
    "minimum",
    "mlp_apply",
    "mlp_layer_count",
    "mul",
    "neg",
    "norm_cap",
    "pick",
    "relu",
    "row",
    "sigmoid",
    "slice1",
    "softmax",
    "stack_cols",
    "stack_rows",
    "sub",
    "sum_all",
    "tanh",
    "uniform_init",
]
