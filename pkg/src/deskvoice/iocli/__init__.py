from deskvoice.iocli.wav import AudioBuffer, wav_read, wav_write
from deskvoice.iocli.config import format_config, parse_config, read_config, write_config
from deskvoice.iocli.checkpoint import load_checkpoint, save_checkpoint
from deskvoice.iocli.corpus import (
    Corpus,
    CorpusSample,
    SyntheticSpeakerSpec,
    default_speakers,
    generate_corpus,
    load_corpus,
    render_phones,
    save_corpus,
)
from deskvoice.iocli.metrics import NearestCentroidSpeakerClassifier, eval_metrics, speaker_features

__all__ = [
    "AudioBuffer",
    "wav_read",
    "wav_write",
    "parse_config",
    "format_config",
    "read_config",
    "write_config",
    "save_checkpoint",
    "load_checkpoint",
    "Corpus",
    "CorpusSample",
    "SyntheticSpeakerSpec",
    "default_speakers",
    "generate_corpus",
    "load_corpus",
    "save_corpus",
    "render_phones",
    "NearestCentroidSpeakerClassifier",
    "eval_metrics",
    "speaker_features",
]
