"""Word-level time alignment of text to segment audio.

The reference aligner partitions the segment duration proportionally to
per-token weights (character counts by default). A real forced aligner can
be plugged in through the AlignerEngine seam.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from typing import Optional, Sequence

from .model import (
    AudioClip,
    ChannelId,
    Segment,
    Transcript,
    Utterance,
    WordTiming,
    validate_transcript,
)


class AlignerContractViolation(RuntimeError):
    pass


class AlignerEngine(ABC):
    """Assigns one time span per token within the segment bounds."""

    engine_id: str = "aligner"

    @abstractmethod
    def align(self, segment: Segment, clip: Optional[AudioClip], tokens: Sequence[str]) -> list[WordTiming]:
        ...


def proportional_align(
    segment: Segment,
    tokens: Sequence[str],
    weights: Optional[Sequence[float]] = None,
) -> list[WordTiming]:
    """Partition the segment duration across tokens proportionally to weights.

    Boundaries are contiguous, the first starts at the segment start and the
    last ends at the segment end; scaling all weights by a constant leaves
    the boundaries unchanged.
    """
    if not tokens:
        raise ValueError("nothing to align")
    if weights is None:
        weights = [max(1, len(t)) for t in tokens]
    if len(weights) != len(tokens):
        raise ValueError("weights must match tokens")
    if any(w <= 0 for w in weights):
        raise ValueError("weights must be positive")

    duration = segment.end_s - segment.start_s
    total = 0.0
    cumulative = []
    for w in weights:
        total += w
        cumulative.append(total)

    bounds = [segment.start_s]
    for c in cumulative[:-1]:
        bounds.append(segment.start_s + duration * (c / total))
    bounds.append(segment.end_s)
    return [
        WordTiming(tok, bounds[i], bounds[i + 1]) for i, tok in enumerate(tokens)
    ]


class ProportionalAligner(AlignerEngine):
    engine_id = "proportional"

    def align(self, segment: Segment, clip: Optional[AudioClip], tokens: Sequence[str]) -> list[WordTiming]:
        return proportional_align(segment, tokens)


def _check_engine_output(segment: Segment, tokens: Sequence[str], words: Sequence[WordTiming]) -> None:
    if len(words) != len(tokens):
        raise AlignerContractViolation("aligner contract violation: word count mismatch")
    prev_end = None
    eps = 1e-9
    for w in words:
        if not w.timed or not w.start_s < w.end_s:
            raise AlignerContractViolation("aligner contract violation: non-monotonic timing")
        if w.start_s < segment.start_s - eps or w.end_s > segment.end_s + eps:
            raise AlignerContractViolation("aligner contract violation: timing outside segment")
        if prev_end is not None and w.start_s < prev_end - eps:
            raise AlignerContractViolation("aligner contract violation: overlapping words")
        prev_end = w.end_s


def align_transcript(
    transcript: Transcript,
    segments: Sequence[Segment],
    clips: dict[str, AudioClip] | AudioClip | None,
    engine: AlignerEngine,
) -> Transcript:
    """Fill in missing word timings; engine-supplied timings are kept.

    Each utterance must reference exactly one known segment. The result
    passes transcript validation with timings required.
    """
    by_id = {s.segment_id: s for s in segments}
    aligned: list[Utterance] = []
    for utt in transcript.utterances:
        if utt.words and all(w.timed for w in utt.words):
            aligned.append(utt)
            continue
        if not utt.words:
            aligned.append(utt)
            continue
        if utt.segment_id is None or utt.segment_id not in by_id:
            raise ValueError(f"utterance has no known segment: {utt.segment_id!r}")
        segment = by_id[utt.segment_id]
        clip = None
        if isinstance(clips, AudioClip):
            clip = clips
        elif isinstance(clips, dict):
            clip = clips.get(str(segment.channel))
        tokens = utt.tokens
        words = engine.align(segment, clip, tokens)
        _check_engine_output(segment, tokens, words)
        aligned.append(
            Utterance(tuple(words), utt.language, utt.speaker, utt.segment_id)
        )

    result = Transcript(
        channel=transcript.channel,
        language=transcript.language,
        utterances=tuple(aligned),
        engine_id=transcript.engine_id,
        duplicate_of_floor=transcript.duplicate_of_floor,
    )
    report = validate_transcript(result, require_timings=True)
    if not report.ok:
        raise AlignerContractViolation(
            "aligner contract violation: " + "; ".join(report.violations)
        )
    return result
