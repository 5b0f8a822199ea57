from deskvoice.numcore.tensor import (
    ComputationGraph,
    Tensor,
    absolute,
    backward,
    concat,
    cross_entropy,
    exp,
    grad_enabled,
    log,
    log_softmax,
    matmul,
    mean,
    no_grad,
    pad_time,
    sigmoid,
    silu,
    softmax,
    sqrt,
    sum as tsum,
    tanh,
    tensor,
)
from deskvoice.numcore.layers import (
    DepthwiseCausalConv1d,
    DownsampleConv1d,
    Embedding,
    LayerNorm,
    Linear,
    Module,
    MultiHeadAttention,
    UpsampleConv1d,
)
from deskvoice.numcore.functional import (
    attention,
    conv1d_depthwise_causal,
    downsample_block,
    unfold_frames,
)
from deskvoice.numcore.gradcheck import check_gradients, finite_difference_gradient

__all__ = [
    "ComputationGraph",
    "Tensor",
    "absolute",
    "backward",
    "tensor",
    "no_grad",
    "grad_enabled",
    "concat",
    "pad_time",
    "exp",
    "log",
    "sqrt",
    "tanh",
    "sigmoid",
    "silu",
    "softmax",
    "log_softmax",
    "cross_entropy",
    "matmul",
    "mean",
    "tsum",
    "Module",
    "Linear",
    "Embedding",
    "LayerNorm",
    "DepthwiseCausalConv1d",
    "DownsampleConv1d",
    "UpsampleConv1d",
    "MultiHeadAttention",
    "attention",
    "conv1d_depthwise_causal",
    "downsample_block",
    "unfold_frames",
    "check_gradients",
    "finite_difference_gradient",
]
