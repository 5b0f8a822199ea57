"""Autoregressive synthesis: one latent frame per step through the diffusion
head, decoded to audio incrementally and fed back as hybrid context.

Per generated frame: the previous position's hidden state conditions the
sampler; the sampled latent is decoded to one hop of audio by the streaming
acoustic decoder; that audio chunk runs through the streaming semantic
encoder; the (sampled z, semantic) pair is embedded and appended to the
context. A learned stop classifier with a 3-frame debounce ends each
turn's segment, advancing to the next turn's tag (or finishing).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from deskvoice.errors import DataError
from deskvoice.iocli.wav import AudioBuffer
from deskvoice.numcore.layers import KVCache
from deskvoice.numcore.tensor import Tensor, no_grad
from deskvoice.diffusion.sampler import GuidanceConfig, sample
from deskvoice.diffusion.schedule import NoiseSchedule
from deskvoice.pipeline.tts import TtsModel
from deskvoice.sequencer import vocab
from deskvoice.sequencer.context import ScriptTurn, VoicePrompt, build_context
from deskvoice.tokenizers.acoustic import AcousticTokenizer, LatentFrame
from deskvoice.tokenizers.semantic import SemanticTokenizer


@dataclass
class StopPolicy:
    """Fire after ``patience`` consecutive stop probabilities above threshold."""

    threshold: float = 0.5
    patience: int = 3
    streak: int = 0

    def update(self, probability: float) -> bool:
        if probability > self.threshold:
            self.streak += 1
        else:
            self.streak = 0
        if self.streak >= self.patience:
            self.streak = 0
            return True
        return False

    def reset(self) -> None:
        self.streak = 0


@dataclass
class TurnTrace:
    speaker_id: int
    frame_start: int  # index into the generated frame list
    frame_count: int


@dataclass
class SynthesisSession:
    prompts: dict[int, AudioBuffer]
    script: list[ScriptTurn]
    acoustic: AcousticTokenizer
    semantic: SemanticTokenizer
    model: TtsModel
    schedule: NoiseSchedule
    guidance: GuidanceConfig = field(default_factory=GuidanceConfig)
    seed: int = 0
    stop_policy: StopPolicy = field(default_factory=StopPolicy)
    frames: list[LatentFrame] = field(default_factory=list)
    turn_traces: list[TurnTrace] = field(default_factory=list)
    truncated: bool = False
    speech_to_text_ratio: float = 0.0


def synthesize(session: SynthesisSession, max_frames: int = 400) -> AudioBuffer:
    """Run the session's script through the model; returns concatenated audio.

    The output always contains frame_count * hop samples. If ``max_frames``
    is reached before the stop head ends the final turn, the session is
    flagged ``truncated``.
    """
    if not session.script:
        raise DataError("synthesis needs a nonempty script")
    rng = np.random.default_rng(session.seed)
    model = session.model
    sigma_scale = session.acoustic.config.sigma_scale

    prompts = []
    for spk in sorted(session.prompts):
        mu = session.acoustic.encode(session.prompts[spk])
        sig = np.sqrt(sigma_scale) * rng.standard_normal(mu.shape)
        z = (mu + sig * rng.standard_normal(mu.shape)).astype(np.float32)
        prompts.append(VoicePrompt(spk, z))
    ctx = build_context(prompts, session.script)

    dec_stream = session.acoustic.decode_stream()
    sem_stream = session.semantic.encode_stream()
    cache = KVCache()
    audio_chunks: list[np.ndarray] = []
    session.frames.clear()
    session.turn_traces.clear()
    session.truncated = False

    with no_grad():
        emb = model.sequencer.embed_context(ctx)
        t0 = emb.shape[0]
        model.sequencer.forward(emb.reshape(1, t0, emb.shape[1]), cache=cache, start_pos=0)
        pos = t0

        done = False
        for turn in session.script:
            tag = np.array([vocab.speaker_tag_id(turn.speaker_id)])
            tag_emb = model.sequencer.text_embed(tag)
            h = model.sequencer.forward(
                tag_emb.reshape(1, 1, tag_emb.shape[-1]), cache=cache, start_pos=pos
            )
            pos += 1
            h_cur = h.numpy()[0, 0]
            session.stop_policy.reset()
            trace = TurnTrace(turn.speaker_id, len(session.frames), 0)

            while True:
                z_norm = sample(model.head, h_cur, session.guidance, rng, session.schedule)
                z = model.denormalize_z(z_norm.astype(np.float32))
                chunk = dec_stream.push(z[None, :])
                semantic = sem_stream.push(chunk)[0]
                session.frames.append(LatentFrame(mu=z.copy(), z=z, semantic=semantic))
                audio_chunks.append(chunk)
                trace.frame_count += 1

                frame_emb = model.sequencer.embed_hybrid(z, semantic)
                h = model.sequencer.forward(
                    frame_emb.reshape(1, 1, frame_emb.shape[-1]), cache=cache, start_pos=pos
                )
                pos += 1
                h_cur = h.numpy()[0, 0]

                stop_p = 1.0 / (1.0 + np.exp(-float(model.stop_head(Tensor(h_cur[None])).numpy())))
                if session.stop_policy.update(stop_p):
                    break
                if len(session.frames) >= max_frames:
                    session.truncated = True
                    done = True
                    break
            session.turn_traces.append(trace)
            if done:
                break

    total_tokens = sum(len(t.text_tokens) for t in session.script)
    session.speech_to_text_ratio = len(session.frames) / max(1, total_tokens)
    samples = np.concatenate(audio_chunks) if audio_chunks else np.zeros(0, dtype=np.float32)
    return AudioBuffer(samples, session.acoustic.config.sample_rate)
