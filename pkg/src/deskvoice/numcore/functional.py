"""Array-level operations: causal convolutions, attention, framing.

Internal layout is channels-last, ``[batch, time, channels]``. The public
single-example helpers (`conv1d_depthwise_causal`, `downsample_block`,
`attention`) follow the channels-first ``[channels, time]`` convention of
the layer contracts and wrap the batched kernels.
"""

from __future__ import annotations

import numpy as np

from deskvoice.errors import ConfigError, ShapeError
from deskvoice.numcore.tensor import (
    Tensor,
    _accumulate,
    _coerce,
    _make,
    _tracking,
    matmul,
    softmax,
)


# -- batched kernels (channels-last) -----------------------------------------------


def dw_causal_conv(x, kernel, dilation: int = 1) -> Tensor:
    """Depthwise causal conv: x [B, T, C], kernel [W, C] -> [B, T, C].

    Tap ``W - 1`` multiplies the current sample; earlier taps look back by
    ``dilation`` steps each, with zero left padding. Output at time t
    therefore depends on inputs at times <= t only.
    """
    x = _coerce(x)
    kernel = _coerce(kernel, like=x)
    if x.data.ndim != 3 or kernel.data.ndim != 2:
        raise ShapeError(f"dw_causal_conv expects x [B,T,C], kernel [W,C]; got {x.shape}, {kernel.shape}")
    if x.data.shape[2] != kernel.data.shape[1]:
        raise ShapeError(
            f"channel count mismatch: input has {x.data.shape[2]}, kernel has {kernel.data.shape[1]}"
        )
    if dilation < 1:
        raise ConfigError(f"dilation must be >= 1, got {dilation}")
    B, T, C = x.data.shape
    W = kernel.data.shape[0]
    pad = (W - 1) * dilation
    xp = np.pad(x.data, ((0, 0), (pad, 0), (0, 0)))
    out = np.zeros_like(x.data)
    for j in range(W):
        out += xp[:, j * dilation : j * dilation + T, :] * kernel.data[j]
    if not _tracking(x, kernel):
        return Tensor(out)

    def backward_fn(grad):
        if kernel.requires_grad:
            gk = np.empty_like(kernel.data)
            for j in range(W):
                gk[j] = (grad * xp[:, j * dilation : j * dilation + T, :]).sum(axis=(0, 1))
            _accumulate(kernel, gk)
        if x.requires_grad:
            gxp = np.zeros_like(xp)
            for j in range(W):
                gxp[:, j * dilation : j * dilation + T, :] += grad * kernel.data[j]
            _accumulate(x, gxp[:, pad:, :])

    return _make(out, (x, kernel), backward_fn, "dw_causal_conv")


def strided_causal_conv(x, weight, bias, stride: int) -> Tensor:
    """Strided causal conv: x [B, T, Cin], weight [W, Cin, Cout] -> [B, T//stride, Cout].

    Left padding of ``W - stride`` makes output frame j a function of input
    samples <= (j + 1) * stride - 1. Requires T divisible by stride and
    W >= stride.
    """
    x = _coerce(x)
    weight = _coerce(weight, like=x)
    B, T, Cin = x.data.shape
    W, wcin, Cout = weight.data.shape
    if wcin != Cin:
        raise ShapeError(f"channel count mismatch: input has {Cin}, weight expects {wcin}")
    if W < stride:
        raise ConfigError(f"kernel width {W} must be >= stride {stride}")
    if T % stride != 0:
        raise ShapeError(f"time length {T} not divisible by stride {stride}")
    F = T // stride
    pad = W - stride
    xp = np.pad(x.data, ((0, 0), (pad, 0), (0, 0)))
    windows = np.lib.stride_tricks.sliding_window_view(xp, W, axis=1)[:, ::stride]
    # windows: [B, F, Cin, W] -> [B*F, W*Cin]
    win2 = np.ascontiguousarray(windows.transpose(0, 1, 3, 2)).reshape(B * F, W * Cin)
    wmat = weight.data.reshape(W * Cin, Cout)
    out = (win2 @ wmat).reshape(B, F, Cout)
    if bias is not None:
        bias = _coerce(bias, like=x)
        out = out + bias.data
    if not _tracking(x, weight) and (bias is None or not _tracking(bias)):
        return Tensor(out)

    def backward_fn(grad):
        g2 = grad.reshape(B * F, Cout)
        if weight.requires_grad:
            _accumulate(weight, (win2.T @ g2).reshape(W, Cin, Cout))
        if bias is not None and bias.requires_grad:
            _accumulate(bias, grad.sum(axis=(0, 1)))
        if x.requires_grad:
            dwin = (g2 @ wmat.T).reshape(B, F, W, Cin)
            gxp = np.zeros_like(xp)
            for j in range(W):
                gxp[:, j : j + stride * F : stride, :] += dwin[:, :, j, :]
            _accumulate(x, gxp[:, pad:, :])

    parents = (x, weight) if bias is None else (x, weight, bias)
    return _make(out, parents, backward_fn, "strided_causal_conv")


def transposed_causal_conv(x, weight, bias, stride: int) -> Tensor:
    """Transposed strided conv: x [B, F, Cin], weight [Cin, W, Cout] -> [B, F*stride, Cout].

    Output sample t receives contributions only from frames j with
    j * stride <= t, so frames influence current-and-future samples — the
    mirror of the strided causal conv. Trailing ``W - stride`` partial sums
    are dropped to keep the length at exactly F * stride.
    """
    x = _coerce(x)
    weight = _coerce(weight, like=x)
    B, F, Cin = x.data.shape
    wcin, W, Cout = weight.data.shape
    if wcin != Cin:
        raise ShapeError(f"channel count mismatch: input has {Cin}, weight expects {wcin}")
    if W < stride:
        raise ConfigError(f"kernel width {W} must be >= stride {stride}")
    wmat = weight.data.reshape(Cin, W * Cout)
    contrib = (x.data.reshape(B * F, Cin) @ wmat).reshape(B, F, W, Cout)
    buf = np.zeros((B, F * stride + (W - stride), Cout), dtype=x.data.dtype)
    for j in range(W):
        buf[:, j : j + stride * F : stride, :] += contrib[:, :, j, :]
    out = buf[:, : F * stride, :]
    if bias is not None:
        bias = _coerce(bias, like=x)
        out = out + bias.data
    if not _tracking(x, weight) and (bias is None or not _tracking(bias)):
        return Tensor(out)

    def backward_fn(grad):
        gbuf = np.pad(grad, ((0, 0), (0, W - stride), (0, 0)))
        dcontrib = np.empty_like(contrib)
        for j in range(W):
            dcontrib[:, :, j, :] = gbuf[:, j : j + stride * F : stride, :]
        dc2 = dcontrib.reshape(B * F, W * Cout)
        if weight.requires_grad:
            _accumulate(weight, (x.data.reshape(B * F, Cin).T @ dc2).reshape(Cin, W, Cout))
        if bias is not None and bias.requires_grad:
            _accumulate(bias, grad.sum(axis=(0, 1)))
        if x.requires_grad:
            _accumulate(x, (dc2 @ wmat.T).reshape(B, F, Cin))

    parents = (x, weight) if bias is None else (x, weight, bias)
    return _make(out, parents, backward_fn, "transposed_causal_conv")


def unfold_frames(x, window: int, hop: int) -> Tensor:
    """Frame x [B, T] into overlapping windows [B, F, window], F = 1 + (T - window) // hop."""
    x = _coerce(x)
    B, T = x.data.shape
    if T < window:
        raise ShapeError(f"signal length {T} shorter than window {window}")
    F = 1 + (T - window) // hop
    idx = hop * np.arange(F)[:, None] + np.arange(window)[None, :]
    out = x.data[:, idx]
    if not _tracking(x):
        return Tensor(out)

    def backward_fn(grad):
        gx = np.zeros_like(x.data)
        np.add.at(gx, (np.arange(B)[:, None, None], idx[None, :, :]), grad)
        _accumulate(x, gx)

    return _make(out, (x,), backward_fn, "unfold")


# -- contract-shaped single-example operations ----------------------------------------


def conv1d_depthwise_causal(x, kernel, dilation: int = 1) -> Tensor:
    """Depthwise causal conv on a single example: x [C, T], kernel [C, W] -> [C, T]."""
    x = _coerce(x)
    kernel = _coerce(kernel, like=x)
    if x.data.ndim != 2 or kernel.data.ndim != 2:
        raise ShapeError(f"expected x [C,T] and kernel [C,W], got {x.shape} and {kernel.shape}")
    if x.data.shape[0] != kernel.data.shape[0]:
        raise ShapeError(
            f"channel count mismatch: input has {x.data.shape[0]} channels, kernel has {kernel.data.shape[0]}"
        )
    xt = x.transpose(1, 0).reshape(1, x.data.shape[1], x.data.shape[0])
    kt = kernel.transpose(1, 0)
    y = dw_causal_conv(xt, kt, dilation)
    return y.reshape(x.data.shape[1], x.data.shape[0]).transpose(1, 0)


def downsample_block(x, factor: int) -> Tensor:
    """Strided-causal average pooling: x [C, T] -> [C, ceil(T / factor)].

    The unweighted form of the downsampling layer: output frame j is the
    mean of input samples [j*factor, (j+1)*factor - 1] after right padding
    to a multiple of ``factor``. Learned downsampling lives in
    :class:`deskvoice.numcore.layers.DownsampleConv1d`.
    """
    x = _coerce(x)
    if factor < 1:
        raise ConfigError(f"downsample factor must be >= 1, got {factor}")
    if x.data.ndim != 2:
        raise ShapeError(f"expected x [C, T], got {x.shape}")
    C, T = x.data.shape
    out_t = -(-T // factor)
    if T % factor:
        from deskvoice.numcore.tensor import pad_time

        x = pad_time(x, 0, out_t * factor - T, axis=1)
    framed = x.reshape(C, out_t, factor)
    return framed.mean(axis=2)


def attention(q, k, v, causal_mask: bool = False) -> Tensor:
    """Scaled dot-product attention over [..., T, D] operands.

    1-D inputs are treated as a single position. With ``causal_mask`` the
    output at position i ignores keys/values at positions > i.
    """
    q = _coerce(q)
    k = _coerce(k, like=q)
    v = _coerce(v, like=q)
    squeeze = q.data.ndim == 1
    if squeeze:
        q = q.reshape(1, q.data.shape[0])
        k = k.reshape(1, k.data.shape[0])
        v = v.reshape(1, v.data.shape[0])
    if q.data.shape[-1] != k.data.shape[-1]:
        raise ShapeError(f"query/key head dimensions differ: {q.shape} vs {k.shape}")
    if k.data.shape[-2] != v.data.shape[-2]:
        raise ShapeError(f"key/value position counts differ: {k.shape} vs {v.shape}")
    d = q.data.shape[-1]
    kt = k.transpose(tuple(range(k.data.ndim - 2)) + (k.data.ndim - 1, k.data.ndim - 2))
    scores = matmul(q, kt) * (1.0 / np.sqrt(d))
    if causal_mask:
        tq, tk = q.data.shape[-2], k.data.shape[-2]
        if tq != tk:
            raise ShapeError(f"causal mask needs square scores, got {tq} queries vs {tk} keys")
        mask = np.triu(np.full((tq, tk), -1e30, dtype=scores.data.dtype), k=1)
        scores = scores + Tensor(mask)
    weights = softmax(scores, axis=-1)
    out = matmul(weights, v)
    if squeeze:
        out = out.reshape(out.data.shape[-1])
    return out
