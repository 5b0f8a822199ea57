from deskvoice.pipeline.optim import AdamW, cosine_lr, global_grad_norm
from deskvoice.pipeline.pretrain import (
    acoustic_heldout_snr,
    pretrain_acoustic,
    pretrain_semantic,
    pretrain_tokenizers,
    semantic_probe_accuracy,
)
from deskvoice.pipeline.tts import (
    Conversation,
    CurriculumSchedule,
    TtsModel,
    encode_conversations,
    make_conversations,
    train_tts,
)
from deskvoice.pipeline.synthesis import StopPolicy, SynthesisSession, synthesize

__all__ = [
    "AdamW",
    "cosine_lr",
    "global_grad_norm",
    "pretrain_acoustic",
    "pretrain_semantic",
    "pretrain_tokenizers",
    "acoustic_heldout_snr",
    "semantic_probe_accuracy",
    "Conversation",
    "CurriculumSchedule",
    "TtsModel",
    "make_conversations",
    "encode_conversations",
    "train_tts",
    "StopPolicy",
    "SynthesisSession",
    "synthesize",
]
