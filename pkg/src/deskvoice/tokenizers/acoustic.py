"""Causal hierarchical codec with sigma-VAE latent sampling.

The encoder maps audio to per-frame latent means mu; sampling adds noise
``z = mu + sigma * eps`` where eps ~ N(0, 1) and sigma ~ N(0, C_sigma) is
drawn from a fixed prior rather than predicted, which keeps latent variance
from collapsing under autoregressive use. The decoder mirrors the encoder
stage for stage with transposed strided convolutions.

Offline encode/decode run the autodiff graph (under no_grad); the
``EncoderStream``/``DecoderStream`` classes run the same arithmetic
incrementally with carried convolution state for chunked processing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from deskvoice.errors import ConfigError, ShapeError
from deskvoice.iocli.wav import AudioBuffer
from deskvoice.numcore.layers import (
    DepthwiseCausalConv1d,
    DownsampleConv1d,
    LayerNorm,
    Linear,
    Module,
    UpsampleConv1d,
)
from deskvoice.numcore.tensor import Tensor, no_grad, silu
from deskvoice.tokenizers.config import AcousticTokenizerConfig


class ConvBlock(Module):
    """Transformer block with the attention sublayer swapped for a depthwise
    causal convolution: pre-norm, conv + residual, then a 4x pointwise FFN."""

    def __init__(self, channels: int, width: int, rng, dtype=np.float32):
        self.norm_conv = LayerNorm(channels, dtype=dtype)
        self.conv = DepthwiseCausalConv1d(channels, width, rng, dtype=dtype)
        self.norm_ffn = LayerNorm(channels, dtype=dtype)
        self.ffn_in = Linear(channels, 4 * channels, rng, dtype=dtype)
        self.ffn_out = Linear(4 * channels, channels, rng, dtype=dtype)

    def forward(self, x: Tensor) -> Tensor:
        x = x + silu(self.conv(self.norm_conv(x)))
        return x + self.ffn_out(silu(self.ffn_in(self.norm_ffn(x))))


class HierarchicalEncoder(Module):
    """Stages of conv blocks with strided-causal downsampling between them."""

    def __init__(self, config: AcousticTokenizerConfig, out_dim: int, rng, dtype=np.float32):
        ch = config.stage_channels
        self.in_proj = Linear(1, ch[0], rng, dtype=dtype)
        self.stages = [
            [ConvBlock(c, config.conv_width, rng, dtype) for _ in range(config.blocks_per_stage)]
            for c in ch
        ]
        self.downsamples = [
            DownsampleConv1d(ch[i], ch[i + 1], f, rng, dtype=dtype)
            for i, f in enumerate(config.downsample_factors)
        ]
        self.out_norm = LayerNorm(ch[-1], dtype=dtype)
        self.out_proj = Linear(ch[-1], out_dim, rng, dtype=dtype)

    def forward(self, x: Tensor) -> Tensor:
        """x: [B, T] with T a multiple of the hop -> [B, F, out_dim]."""
        b, t = x.shape
        h = self.in_proj(x.reshape(b, t, 1))
        for i, stage in enumerate(self.stages):
            for block in stage:
                h = block(h)
            if i < len(self.downsamples):
                h = self.downsamples[i](h)
        return self.out_proj(self.out_norm(h))


class HierarchicalDecoder(Module):
    """Mirror of the encoder: upsampling replaces downsampling, stages reversed."""

    def __init__(self, config: AcousticTokenizerConfig, in_dim: int, rng, dtype=np.float32):
        ch = config.stage_channels
        self.in_proj = Linear(in_dim, ch[-1], rng, dtype=dtype)
        self.stages = [
            [ConvBlock(c, config.conv_width, rng, dtype) for _ in range(config.blocks_per_stage)]
            for c in reversed(ch)
        ]
        self.upsamples = [
            UpsampleConv1d(ch[i + 1], ch[i], f, rng, dtype=dtype)
            for i, f in reversed(list(enumerate(config.downsample_factors)))
        ]
        self.out_norm = LayerNorm(ch[0], dtype=dtype)
        self.out_proj = Linear(ch[0], 1, rng, dtype=dtype)

    def forward(self, z: Tensor) -> Tensor:
        """z: [B, F, in_dim] -> [B, F * hop]."""
        h = self.in_proj(z)
        for i, stage in enumerate(self.stages):
            for block in stage:
                h = block(h)
            if i < len(self.upsamples):
                h = self.upsamples[i](h)
        y = self.out_proj(self.out_norm(h))
        b, t, _ = y.shape
        return y.reshape(b, t)


# -- sigma-VAE sampling ---------------------------------------------------------


@dataclass(frozen=True)
class NoiseDraw:
    """A recorded reparameterization draw: regenerate from ``seed`` to verify."""

    epsilon: np.ndarray
    sigma: np.ndarray
    seed: int


def make_noise_draw(shape, sigma_scale: float, seed: int) -> NoiseDraw:
    """eps ~ N(0, 1) and sigma ~ N(0, sigma_scale), reproducible from seed."""
    rng = np.random.default_rng(seed)
    eps = rng.standard_normal(shape)
    sigma = np.sqrt(sigma_scale) * rng.standard_normal(shape)
    return NoiseDraw(eps.astype(np.float32), sigma.astype(np.float32), seed)


def sample_latent(mu: np.ndarray, draw: NoiseDraw) -> np.ndarray:
    """z = mu + sigma * eps, elementwise."""
    mu = np.asarray(mu)
    if mu.shape != draw.epsilon.shape or mu.shape != draw.sigma.shape:
        raise ShapeError(
            f"latent/draw dimension mismatch: mu {mu.shape}, eps {draw.epsilon.shape}, sigma {draw.sigma.shape}"
        )
    return mu + draw.sigma * draw.epsilon


def sample_latent_batch(mu: Tensor, sigma_scale: float, rng: np.random.Generator) -> Tensor:
    """Training-path sampling: gradient flows through mu, noise is constant."""
    eps = rng.standard_normal(mu.shape)
    sigma = np.sqrt(sigma_scale) * rng.standard_normal(mu.shape)
    return mu + Tensor((sigma * eps).astype(mu.data.dtype))


@dataclass
class LatentFrame:
    """One autoregressive step's worth of features."""

    mu: np.ndarray
    z: np.ndarray
    semantic: np.ndarray


# -- offline tokenizer -----------------------------------------------------------


class AcousticTokenizer(Module):
    def __init__(self, config: AcousticTokenizerConfig, rng, dtype=np.float32):
        self.encoder = HierarchicalEncoder(config, config.latent_dim, rng, dtype)
        self.decoder = HierarchicalDecoder(config, config.latent_dim, rng, dtype)
        self.config = config
        self.dtype = dtype

    def _check_rate(self, audio: AudioBuffer) -> None:
        if audio.sample_rate != self.config.sample_rate:
            raise ConfigError(
                f"audio sample rate {audio.sample_rate} does not match tokenizer "
                f"sample rate {self.config.sample_rate}"
            )

    def pad_to_hop(self, samples: np.ndarray) -> np.ndarray:
        hop = self.config.hop
        remainder = len(samples) % hop
        if remainder:
            samples = np.pad(samples, (0, hop - remainder))
        return samples

    def encode(self, audio: AudioBuffer) -> np.ndarray:
        """Audio -> per-frame latent means [F, latent_dim]; F = ceil(T / hop)."""
        self._check_rate(audio)
        if len(audio) == 0:
            return np.zeros((0, self.config.latent_dim), dtype=self.dtype)
        x = self.pad_to_hop(audio.samples.astype(self.dtype))
        with no_grad():
            mu = self.encoder(Tensor(x[None, :]))
        return mu.numpy()[0]

    def decode(self, z_frames: np.ndarray) -> AudioBuffer:
        """Latents [F, latent_dim] -> audio of exactly F * hop samples."""
        z_frames = np.asarray(z_frames, dtype=self.dtype)
        if z_frames.ndim != 2 or (len(z_frames) and z_frames.shape[1] != self.config.latent_dim):
            raise ShapeError(
                f"expected z [F, {self.config.latent_dim}], got {z_frames.shape}"
            )
        if len(z_frames) == 0:
            return AudioBuffer(np.zeros(0, dtype=np.float32), self.config.sample_rate)
        with no_grad():
            y = self.decoder(Tensor(z_frames[None]))
        return AudioBuffer(np.clip(y.numpy()[0], -1.0, 1.0), self.config.sample_rate)

    def encode_stream(self) -> "EncoderStream":
        return EncoderStream(self.encoder, self.config)

    def decode_stream(self) -> "DecoderStream":
        return DecoderStream(self.decoder, self.config)


# -- streaming (chunked, stateful) -------------------------------------------------


def _ln_np(x: np.ndarray, layer: LayerNorm) -> np.ndarray:
    mu = x.mean(axis=-1, keepdims=True)
    centered = x - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    return centered / np.sqrt(var + layer.eps) * layer.gain.data + layer.shift.data


def _silu_np(x: np.ndarray) -> np.ndarray:
    return x / (1.0 + np.exp(-x))


def _linear_np(x: np.ndarray, layer: Linear) -> np.ndarray:
    y = x @ layer.weight.data
    if layer.bias is not None:
        y = y + layer.bias.data
    return y


class _BlockStream:
    def __init__(self, block: ConvBlock):
        self.block = block
        width, channels = block.conv.kernel.shape
        self.context = (width - 1) * block.conv.dilation
        self.state = np.zeros((self.context, channels), dtype=block.conv.kernel.data.dtype)

    def step(self, x: np.ndarray) -> np.ndarray:
        block = self.block
        h = _ln_np(x, block.norm_conv)
        xin = np.concatenate([self.state, h], axis=0)
        if self.context:
            self.state = xin[-self.context :].copy()
        width = block.conv.kernel.shape[0]
        d = block.conv.dilation
        t = len(x)
        y = np.zeros_like(h)
        for j in range(width):
            y += xin[j * d : j * d + t] * block.conv.kernel.data[j]
        x = x + _silu_np(y + block.conv.bias.data)
        h2 = _ln_np(x, block.norm_ffn)
        return x + _linear_np(_silu_np(_linear_np(h2, block.ffn_in)), block.ffn_out)


class _DownsampleStream:
    def __init__(self, layer: DownsampleConv1d):
        self.layer = layer
        width, c_in, _ = layer.weight.shape
        self.context = width - layer.factor
        self.state = np.zeros((self.context, c_in), dtype=layer.weight.data.dtype)

    def step(self, x: np.ndarray) -> np.ndarray:
        layer = self.layer
        s = layer.factor
        width, c_in, c_out = layer.weight.shape
        xin = np.concatenate([self.state, x], axis=0)
        if self.context:
            self.state = xin[-self.context :].copy()
        f = len(x) // s
        windows = np.lib.stride_tricks.sliding_window_view(xin, width, axis=0)[::s]
        win2 = np.ascontiguousarray(windows.transpose(0, 2, 1)).reshape(f, width * c_in)
        return win2 @ layer.weight.data.reshape(width * c_in, c_out) + layer.bias.data


class _UpsampleStream:
    def __init__(self, layer: UpsampleConv1d):
        self.layer = layer
        c_in, width, c_out = layer.weight.shape
        self.carry = np.zeros((width - layer.factor, c_out), dtype=layer.weight.data.dtype)

    def step(self, z: np.ndarray) -> np.ndarray:
        layer = self.layer
        s = layer.factor
        c_in, width, c_out = layer.weight.shape
        f = len(z)
        contrib = (z @ layer.weight.data.reshape(c_in, width * c_out)).reshape(f, width, c_out)
        buf = np.zeros((f * s + (width - s), c_out), dtype=z.dtype)
        buf[: width - s] += self.carry
        for j in range(width):
            buf[j : j + s * f : s] += contrib[:, j, :]
        self.carry = buf[f * s :].copy()
        return buf[: f * s] + layer.bias.data


class EncoderStream:
    """Chunked encoding with carried convolution state.

    Arbitrary chunk sizes are buffered internally; complete frames are
    emitted as soon as a full hop of samples is available. ``flush`` zero
    pads any trailing partial frame, matching the offline right padding.
    """

    def __init__(self, encoder: HierarchicalEncoder, config: AcousticTokenizerConfig):
        self.encoder = encoder
        self.config = config
        self.buffer = np.zeros(0, dtype=np.float32)
        self.blocks = [[_BlockStream(b) for b in stage] for stage in encoder.stages]
        self.downs = [_DownsampleStream(d) for d in encoder.downsamples]

    def _process(self, samples: np.ndarray) -> np.ndarray:
        h = _linear_np(samples[:, None].astype(self.encoder.in_proj.weight.data.dtype), self.encoder.in_proj)
        for i, stage in enumerate(self.blocks):
            for block in stage:
                h = block.step(h)
            if i < len(self.downs):
                h = self.downs[i].step(h)
        return _linear_np(_ln_np(h, self.encoder.out_norm), self.encoder.out_proj)

    def push(self, samples: np.ndarray) -> np.ndarray:
        self.buffer = np.concatenate([self.buffer, np.asarray(samples, dtype=np.float32)])
        hop = self.config.hop
        whole = (len(self.buffer) // hop) * hop
        if whole == 0:
            return np.zeros((0, self.encoder.out_proj.weight.shape[1]), dtype=np.float32)
        chunk, self.buffer = self.buffer[:whole], self.buffer[whole:]
        return self._process(chunk)

    def flush(self) -> np.ndarray:
        if len(self.buffer) == 0:
            return np.zeros((0, self.encoder.out_proj.weight.shape[1]), dtype=np.float32)
        hop = self.config.hop
        chunk = np.pad(self.buffer, (0, hop - len(self.buffer)))
        self.buffer = np.zeros(0, dtype=np.float32)
        return self._process(chunk)


class DecoderStream:
    """Chunked decoding: push latent frames, receive hop samples per frame."""

    def __init__(self, decoder: HierarchicalDecoder, config: AcousticTokenizerConfig):
        self.decoder = decoder
        self.config = config
        self.blocks = [[_BlockStream(b) for b in stage] for stage in decoder.stages]
        self.ups = [_UpsampleStream(u) for u in decoder.upsamples]

    def push(self, z_frames: np.ndarray) -> np.ndarray:
        z_frames = np.asarray(z_frames, dtype=self.decoder.in_proj.weight.data.dtype)
        if z_frames.ndim != 2:
            raise ShapeError(f"expected z [F, latent_dim], got {z_frames.shape}")
        if len(z_frames) == 0:
            return np.zeros(0, dtype=np.float32)
        h = _linear_np(z_frames, self.decoder.in_proj)
        for i, stage in enumerate(self.blocks):
            for block in stage:
                h = block.step(h)
            if i < len(self.ups):
                h = self.ups[i].step(h)
        y = _linear_np(_ln_np(h, self.decoder.out_norm), self.decoder.out_proj)
        return np.clip(y[:, 0], -1.0, 1.0).astype(np.float32)
