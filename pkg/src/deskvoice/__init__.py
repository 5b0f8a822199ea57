"""Desk-scale multi-speaker text-to-speech built on next-token diffusion.

The package is organized as five layers:

* :mod:`deskvoice.numcore` -- dense tensors with reverse-mode autodiff and
  the causal layers everything else is built from.
* :mod:`deskvoice.tokenizers` -- the acoustic sigma-VAE codec and the
  deterministic semantic encoder with its ASR proxy head.
* :mod:`deskvoice.sequencer` -- interleaved speaker/script context assembly
  and a small causal transformer.
* :mod:`deskvoice.diffusion` -- noise schedule, token-level diffusion head,
  classifier-free guidance, and a few-step ODE sampler.
* :mod:`deskvoice.pipeline` -- training loops and the autoregressive
  synthesis loop.
* :mod:`deskvoice.iocli` -- WAV I/O, the synthetic corpus, checkpoints,
  metrics, reports, and the command line.
"""

__version__ = "0.1.0"

from deskvoice.errors import (
    CapacityError,
    ConfigError,
    ContractError,
    DataError,
    DeskvoiceError,
    FormatError,
    ShapeError,
)

__all__ = [
    "CapacityError",
    "ConfigError",
    "ContractError",
    "DataError",
    "DeskvoiceError",
    "FormatError",
    "ShapeError",
]
