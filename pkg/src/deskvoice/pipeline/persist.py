"""Save/load of the three trained components through the checkpoint container.

The tokenizer config travels inside each checkpoint and is cross-checked on
load when the caller already has one. The semantic checkpoint carries the
ASR proxy decoder under the ``asr.`` prefix as a separate group; synthesis
loads only the encoder group.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from deskvoice.errors import ConfigError
from deskvoice.iocli.checkpoint import load_checkpoint, save_checkpoint
from deskvoice.diffusion.head import DiffusionHeadConfig
from deskvoice.pipeline.tts import TtsModel
from deskvoice.sequencer.model import SequenceModelConfig
from deskvoice.tokenizers.acoustic import AcousticTokenizer
from deskvoice.tokenizers.config import AcousticTokenizerConfig
from deskvoice.tokenizers.semantic import AsrProxyDecoder, SemanticTokenizer


def _check_config(found: AcousticTokenizerConfig, expected: AcousticTokenizerConfig | None, path) -> None:
    if expected is not None and found != expected:
        raise ConfigError(f"checkpoint {path} was trained with a different tokenizer config")


def save_acoustic(path: str | Path, model: AcousticTokenizer) -> None:
    save_checkpoint(path, {"kind": "acoustic", **model.config.to_flat()}, model.state())


def load_acoustic(path: str | Path, expected: AcousticTokenizerConfig | None = None) -> AcousticTokenizer:
    flat, tensors = load_checkpoint(path)
    if flat.get("kind") != "acoustic":
        raise ConfigError(f"{path} is not an acoustic tokenizer checkpoint")
    config = AcousticTokenizerConfig.from_flat(flat)
    _check_config(config, expected, path)
    model = AcousticTokenizer(config, np.random.default_rng(0))
    model.load_state(tensors)
    return model


def save_semantic(path: str | Path, model: SemanticTokenizer, decoder: AsrProxyDecoder | None = None) -> None:
    tensors = dict(model.state())
    if decoder is not None:
        tensors.update({f"asr.{k}": v for k, v in decoder.state().items()})
    save_checkpoint(path, {"kind": "semantic", **model.config.to_flat()}, tensors)


def load_semantic(
    path: str | Path,
    expected: AcousticTokenizerConfig | None = None,
    with_asr: bool = False,
) -> SemanticTokenizer | tuple[SemanticTokenizer, AsrProxyDecoder]:
    flat, tensors = load_checkpoint(path)
    if flat.get("kind") != "semantic":
        raise ConfigError(f"{path} is not a semantic tokenizer checkpoint")
    config = AcousticTokenizerConfig.from_flat(flat)
    _check_config(config, expected, path)
    model = SemanticTokenizer(config, np.random.default_rng(0))
    model.load_state({k: v for k, v in tensors.items() if not k.startswith("asr.")})
    if not with_asr:
        return model
    decoder = AsrProxyDecoder(config.semantic_dim, np.random.default_rng(0))
    decoder.load_state({k[len("asr.") :]: v for k, v in tensors.items() if k.startswith("asr.")})
    return model, decoder


def save_tts(path: str | Path, model: TtsModel) -> None:
    tensors = dict(model.state())
    tensors["stats.z_mean"] = model.z_mean
    tensors["stats.z_std"] = model.z_std
    config = {"kind": "tts", **model.seq_config.to_flat(), **model.head_config.to_flat()}
    save_checkpoint(path, config, tensors)


def load_tts(path: str | Path) -> TtsModel:
    flat, tensors = load_checkpoint(path)
    if flat.get("kind") != "tts":
        raise ConfigError(f"{path} is not a TTS checkpoint")
    seq_config = SequenceModelConfig.from_flat(flat)
    head_config = DiffusionHeadConfig.from_flat(flat)
    model = TtsModel(seq_config, head_config, np.random.default_rng(0))
    z_mean = tensors.pop("stats.z_mean")
    z_std = tensors.pop("stats.z_std")
    model.load_state(tensors)
    model.set_latent_stats(z_mean, z_std)
    return model
