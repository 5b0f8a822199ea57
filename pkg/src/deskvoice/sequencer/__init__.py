from deskvoice.sequencer import vocab
from deskvoice.sequencer.context import (
    ContextPosition,
    ContextSequence,
    ScriptTurn,
    VoicePrompt,
    build_context,
    parse_script,
)
from deskvoice.sequencer.model import SequenceModel, SequenceModelConfig

__all__ = [
    "vocab",
    "ContextPosition",
    "ContextSequence",
    "ScriptTurn",
    "VoicePrompt",
    "build_context",
    "parse_script",
    "SequenceModel",
    "SequenceModelConfig",
]
