from deskvoice.tokenizers.config import (
    AcousticTokenizerConfig,
    desk_acoustic_config,
    full_scale_acoustic_config,
)
from deskvoice.tokenizers.acoustic import (
    AcousticTokenizer,
    DecoderStream,
    EncoderStream,
    LatentFrame,
    NoiseDraw,
    make_noise_draw,
    sample_latent,
    sample_latent_batch,
)
from deskvoice.tokenizers.semantic import AsrProxyDecoder, SemanticTokenizer, asr_proxy_step
from deskvoice.tokenizers.losses import multi_resolution_stft_loss, reconstruction_loss, stft_magnitude

__all__ = [
    "AcousticTokenizerConfig",
    "desk_acoustic_config",
    "full_scale_acoustic_config",
    "AcousticTokenizer",
    "EncoderStream",
    "DecoderStream",
    "LatentFrame",
    "NoiseDraw",
    "make_noise_draw",
    "sample_latent",
    "sample_latent_batch",
    "SemanticTokenizer",
    "AsrProxyDecoder",
    "asr_proxy_step",
    "reconstruction_loss",
    "multi_resolution_stft_loss",
    "stft_magnitude",
]
