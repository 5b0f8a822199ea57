from deskvoice.diffusion.schedule import NoiseSchedule, forward_noising
from deskvoice.diffusion.head import (
    DiffusionHead,
    DiffusionHeadConfig,
    diffusion_loss,
    timestep_embedding,
)
from deskvoice.diffusion.sampler import GuidanceConfig, cfg_predict, sample, select_timesteps

__all__ = [
    "NoiseSchedule",
    "forward_noising",
    "DiffusionHead",
    "DiffusionHeadConfig",
    "diffusion_loss",
    "timestep_embedding",
    "GuidanceConfig",
    "cfg_predict",
    "sample",
    "select_timesteps",
]
