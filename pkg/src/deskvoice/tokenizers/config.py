"""Tokenizer configuration and the compression arithmetic it implies."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

from deskvoice.errors import ConfigError


@dataclass(frozen=True)
class AcousticTokenizerConfig:
    """Geometry of the hierarchical causal codec.

    ``stage_channels`` has one entry per stage; a downsampling layer sits
    between consecutive stages, so there is always exactly one more stage
    than there are downsampling factors. The frame rate is exact:
    sample_rate / product(downsample_factors).
    """

    sample_rate: int
    stage_channels: tuple[int, ...]
    downsample_factors: tuple[int, ...]
    latent_dim: int
    sigma_scale: float = 0.01  # variance of the sigma prior
    semantic_dim: int = 16
    conv_width: int = 4
    blocks_per_stage: int = 1

    def __post_init__(self):
        object.__setattr__(self, "stage_channels", tuple(int(c) for c in self.stage_channels))
        object.__setattr__(self, "downsample_factors", tuple(int(f) for f in self.downsample_factors))
        if len(self.stage_channels) != len(self.downsample_factors) + 1:
            raise ConfigError(
                f"{len(self.stage_channels)} stages require exactly "
                f"{len(self.stage_channels) - 1} downsampling factors, got {len(self.downsample_factors)}"
            )
        if any(f < 1 for f in self.downsample_factors):
            raise ConfigError(f"downsampling factors must be >= 1, got {self.downsample_factors}")
        if self.sample_rate < 1 or self.latent_dim < 1:
            raise ConfigError("sample_rate and latent_dim must be positive")
        if self.sigma_scale < 0:
            raise ConfigError(f"sigma_scale must be nonnegative, got {self.sigma_scale}")

    @property
    def hop(self) -> int:
        """Samples per latent frame: the product of all downsampling factors."""
        return math.prod(self.downsample_factors)

    @property
    def frame_rate(self) -> Fraction:
        """Frames per second, exact. product(factors) * frame_rate == sample_rate."""
        return Fraction(self.sample_rate, self.hop)

    def frame_count(self, n_samples: int) -> int:
        return -(-n_samples // self.hop)

    def to_flat(self, prefix: str = "tokenizer.") -> dict:
        return {
            f"{prefix}sample_rate": self.sample_rate,
            f"{prefix}stage_channels": list(self.stage_channels),
            f"{prefix}downsample_factors": list(self.downsample_factors),
            f"{prefix}latent_dim": self.latent_dim,
            f"{prefix}sigma_scale": self.sigma_scale,
            f"{prefix}semantic_dim": self.semantic_dim,
            f"{prefix}conv_width": self.conv_width,
            f"{prefix}blocks_per_stage": self.blocks_per_stage,
        }

    @classmethod
    def from_flat(cls, flat: dict, prefix: str = "tokenizer.") -> "AcousticTokenizerConfig":
        def need(key):
            full = f"{prefix}{key}"
            if full not in flat:
                raise ConfigError(f"missing config key {full!r}")
            return flat[full]

        return cls(
            sample_rate=int(need("sample_rate")),
            stage_channels=tuple(need("stage_channels")),
            downsample_factors=tuple(need("downsample_factors")),
            latent_dim=int(need("latent_dim")),
            sigma_scale=float(need("sigma_scale")),
            semantic_dim=int(need("semantic_dim")),
            conv_width=int(need("conv_width")),
            blocks_per_stage=int(need("blocks_per_stage")),
        )


def full_scale_acoustic_config() -> AcousticTokenizerConfig:
    """The 24 kHz geometry: 7 stages, 6 downsampling layers, 3200x compression."""
    return AcousticTokenizerConfig(
        sample_rate=24000,
        stage_channels=(16, 32, 64, 128, 256, 384, 512),
        downsample_factors=(5, 5, 4, 4, 4, 2),
        latent_dim=64,
        semantic_dim=64,
    )


def desk_acoustic_config(
    latent_dim: int = 16,
    stage_channels: tuple[int, ...] = (16, 24, 32, 48, 64),
    blocks_per_stage: int = 1,
) -> AcousticTokenizerConfig:
    """8 kHz desk geometry: 5 stages, 4 downsampling layers, 320x -> 25 Hz."""
    return AcousticTokenizerConfig(
        sample_rate=8000,
        stage_channels=stage_channels,
        downsample_factors=(4, 4, 4, 5),
        latent_dim=latent_dim,
        semantic_dim=latent_dim,
        blocks_per_stage=blocks_per_stage,
    )
