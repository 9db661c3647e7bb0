"""Voice activity detection, 1-20 s decoding segmentation, corpus
segmentation strategies, and audio augmentation helpers.

The reference VAD is frame-energy based so the whole pipeline stays
deterministic and testable without models; an engine seam can substitute an
external VAD upstream of split_segments.
"""

from __future__ import annotations

import wave
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .model import AudioClip, ChannelId, Segment, SpeechRegion, WordTiming, segment_key


@dataclass(frozen=True)
class VadConfig:
    frame_ms: int = 30
    energy_threshold_dbfs: float = -45.0
    hangover_frames: int = 5
    min_region_s: float = 0.25

    def __post_init__(self) -> None:
        if self.frame_ms not in (10, 20, 30):
            raise ValueError("frame_ms must be one of 10, 20, 30")
        if not np.isfinite(self.energy_threshold_dbfs):
            raise ValueError("energy threshold must be finite")


@dataclass(frozen=True)
class SegmentationPolicy:
    min_s: float = 1.0
    max_s: float = 20.0
    merge_gap_s: float = 0.5
    frame_ms: int = 30  # analysis frame for the lowest-energy split search


@dataclass(frozen=True)
class CorpusStrategy:
    kind: str  # "linguistic" | "length" | "hybrid"
    target_len_s: float = 10.0

    def __post_init__(self) -> None:
        if self.kind not in ("linguistic", "length", "hybrid"):
            raise ValueError(f"unknown corpus strategy {self.kind!r}")


@dataclass(frozen=True)
class CorpusSegment:
    """A training-corpus slice carrying the words it covers.

    Unlike decoding segments these are not bound to the 1-20 s window; a
    short sentence is a legitimate linguistic segment.
    """

    start_s: float
    end_s: float
    words: tuple[WordTiming, ...]


def frame_energies_dbfs(clip: AudioClip, frame_ms: int) -> np.ndarray:
    """Per-frame RMS energy in dBFS.

    The final partial frame is zero-padded to the full frame length so that
    appending trailing silence never changes existing frame energies.
    """
    frame_len = clip.sample_rate_hz * frame_ms // 1000
    n = len(clip.samples)
    if n == 0:
        return np.zeros(0)
    n_frames = -(-n // frame_len)
    x = clip.samples.astype(np.float64) / 32768.0
    padded = np.zeros(n_frames * frame_len)
    padded[:n] = x
    frames = padded.reshape(n_frames, frame_len)
    rms = np.sqrt(np.mean(frames * frames, axis=1))
    with np.errstate(divide="ignore"):
        return 20.0 * np.log10(rms)


def detect_speech_regions(clip: AudioClip, cfg: VadConfig = VadConfig()) -> list[SpeechRegion]:
    """Energy-gated VAD: frames at or above the threshold are speech, and
    gaps of up to hangover_frames non-speech frames are bridged. Regions end
    at the last speech frame; sub-minimum regions are removed."""
    energies = frame_energies_dbfs(clip, cfg.frame_ms)
    if len(energies) == 0:
        return []
    frame_s = cfg.frame_ms / 1000.0
    speech = energies >= cfg.energy_threshold_dbfs

    regions: list[SpeechRegion] = []
    start_frame: Optional[int] = None
    last_speech: Optional[int] = None
    for i, is_speech in enumerate(speech):
        if is_speech:
            if start_frame is None:
                start_frame = i
            last_speech = i
        elif start_frame is not None and i - last_speech > cfg.hangover_frames:
            regions.append(_region(start_frame, last_speech, frame_s, clip.duration_s))
            start_frame = None
            last_speech = None
    if start_frame is not None:
        regions.append(_region(start_frame, last_speech, frame_s, clip.duration_s))

    return [r for r in regions if r.duration_s >= cfg.min_region_s]


def _region(first: int, last: int, frame_s: float, duration_s: float) -> SpeechRegion:
    return SpeechRegion(first * frame_s, min((last + 1) * frame_s, duration_s))


def split_segments(
    regions: Sequence[SpeechRegion],
    clip: AudioClip,
    policy: SegmentationPolicy = SegmentationPolicy(),
    channel: ChannelId | None = None,
    meeting_id: str = "meeting",
) -> list[Segment]:
    """Cut speech regions into decoding segments of min_s to max_s seconds.

    Sub-minimum regions merge into a neighbor when the silence gap is at
    most merge_gap_s (otherwise they are dropped); oversize regions split
    recursively at the lowest-energy internal frame, at the region midpoint
    on exact energy ties.
    """
    from .model import FLOOR

    channel = channel or FLOOR
    merged = _merge_short_regions(regions, policy)
    spans: list[tuple[float, float]] = []
    for region in merged:
        spans.extend(_split_span(region.start_s, region.end_s, clip, policy))
    return [Segment.create(meeting_id, channel, a, b) for a, b in spans]


def _merge_short_regions(
    regions: Sequence[SpeechRegion], policy: SegmentationPolicy
) -> list[SpeechRegion]:
    merged: list[SpeechRegion] = []
    for region in regions:
        if merged:
            prev = merged[-1]
            gap = region.start_s - prev.end_s
            short = region.duration_s < policy.min_s or prev.duration_s < policy.min_s
            if short and gap <= policy.merge_gap_s:
                merged[-1] = SpeechRegion(prev.start_s, region.end_s)
                continue
        merged.append(region)
    return [r for r in merged if r.duration_s >= policy.min_s]


def _split_span(
    start: float, end: float, clip: AudioClip, policy: SegmentationPolicy
) -> list[tuple[float, float]]:
    if end - start <= policy.max_s:
        return [(start, end)]
    cut = _split_point(start, end, clip, policy)
    return _split_span(start, cut, clip, policy) + _split_span(cut, end, clip, policy)


def _split_point(start: float, end: float, clip: AudioClip, policy: SegmentationPolicy) -> float:
    """Lowest-energy internal frame center; exact region midpoint on ties."""
    midpoint = (start + end) / 2.0
    lo, hi = start + policy.min_s, end - policy.min_s
    frame_s = policy.frame_ms / 1000.0
    piece = clip.slice_seconds(start, end)
    energies = frame_energies_dbfs(piece, policy.frame_ms)

    best_cut = None
    best_energy = np.inf
    tie = False
    for k, e in enumerate(energies):
        center = start + (k + 0.5) * frame_s
        if not (lo <= center <= hi):
            continue
        if e < best_energy:
            best_cut, best_energy, tie = center, e, False
        elif e == best_energy:
            tie = True
    if best_cut is None:
        return min(max(midpoint, lo), hi)
    if tie:
        return min(max(midpoint, lo), hi)
    return best_cut


def corpus_segment(
    words: Sequence[WordTiming],
    sentence_ends: Sequence[int],
    strategy: CorpusStrategy,
) -> list[CorpusSegment]:
    """Cut a word-aligned passage into training segments.

    linguistic: one segment per sentence; length: greedy word-boundary cuts
    nearest an even grid of target_len_s; hybrid: sentence spans, with any
    oversize span re-cut by the length rule. Every cut is at a word boundary
    and the word multiset is preserved exactly.
    """
    words = tuple(words)
    if not words:
        return []
    _check_words(words, sentence_ends, strategy.kind)

    if strategy.kind == "length":
        return _length_segments(words, strategy.target_len_s)

    sentences: list[tuple[WordTiming, ...]] = []
    prev = 0
    for e in sentence_ends:
        sentences.append(words[prev : e + 1])
        prev = e + 1

    out: list[CorpusSegment] = []
    for sent in sentences:
        seg = _segment_of(sent)
        if strategy.kind == "hybrid" and seg.end_s - seg.start_s > 20.0:
            out.extend(_length_segments(sent, strategy.target_len_s, max_s=20.0))
        else:
            out.append(seg)
    return out


def _check_words(words: Sequence[WordTiming], sentence_ends: Sequence[int], kind: str) -> None:
    for a, b in zip(words, words[1:]):
        if not (a.timed and b.timed) or b.start_s < a.end_s:
            raise ValueError("words must carry monotonic, non-overlapping timings")
    if kind in ("linguistic", "hybrid"):
        ends = list(sentence_ends)
        if ends != sorted(set(ends)) or not ends or ends[-1] != len(words) - 1:
            raise ValueError("sentence_ends must be strictly increasing and end at the last word")


def _segment_of(words: Sequence[WordTiming]) -> CorpusSegment:
    return CorpusSegment(words[0].start_s, words[-1].end_s, tuple(words))


def _length_segments(
    words: Sequence[WordTiming], target_len_s: float, max_s: Optional[float] = None
) -> list[CorpusSegment]:
    total = words[-1].end_s - words[0].start_s
    k = max(1, round(total / target_len_s))
    if max_s is not None:
        k = max(k, int(np.ceil(total / max_s)))
    if k == 1 or len(words) == 1:
        return [_segment_of(words)]

    # candidate cut after word j sits at words[j].end_s
    origin = words[0].start_s
    cuts: list[int] = []
    prev = -1
    for i in range(1, k):
        ideal = origin + i * total / k
        best_j, best_d = None, None
        for j in range(prev + 1, len(words) - 1):
            d = abs(words[j].end_s - ideal)
            if best_d is None or d < best_d:
                best_j, best_d = j, d
        if best_j is None:
            break
        cuts.append(best_j)
        prev = best_j

    segments: list[CorpusSegment] = []
    lo = 0
    for j in cuts:
        segments.append(_segment_of(words[lo : j + 1]))
        lo = j + 1
    segments.append(_segment_of(words[lo:]))
    return segments


def speed_perturb(clip: AudioClip, factor: float) -> AudioClip:
    """Resample by linear interpolation so duration becomes duration/factor."""
    if not 0.8 <= factor <= 1.2:
        raise ValueError(f"speed factor {factor} outside [0.8, 1.2]")
    n = len(clip.samples)
    if factor == 1.0 or n == 0:
        return AudioClip(clip.sample_rate_hz, clip.samples.copy())
    n_out = int(round(n / factor))
    positions = np.arange(n_out) * factor
    resampled = np.interp(positions, np.arange(n), clip.samples.astype(np.float64))
    return AudioClip(clip.sample_rate_hz, np.clip(np.rint(resampled), -32768, 32767).astype(np.int16))


def synth_nonspeech_example(kind: str, duration_s: float, seed: int) -> tuple[AudioClip, str]:
    """Deterministic silence or tone-music clip paired with an empty reference."""
    if not 1.0 <= duration_s <= 20.0:
        raise ValueError("duration_s must be within [1, 20]")
    rate = AudioClip.CANONICAL_RATE
    n = int(round(duration_s * rate))
    if kind == "silence":
        return AudioClip(rate, np.zeros(n, dtype=np.int16)), ""
    if kind != "tone_music":
        raise ValueError(f"unknown non-speech kind {kind!r}")
    rng = np.random.default_rng(seed)
    t = np.arange(n) / rate
    signal = np.zeros(n)
    for _ in range(3):
        freq = rng.uniform(110.0, 1760.0)
        amp = rng.uniform(0.05, 0.25)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        signal += amp * np.sin(2.0 * np.pi * freq * t + phase)
    return AudioClip(rate, np.rint(signal * 32767.0 / 3.0).astype(np.int16)), ""


# --- WAV ingestion --------------------------------------------------------

def resample_linear(clip: AudioClip, target_rate: int) -> AudioClip:
    if clip.sample_rate_hz == target_rate:
        return clip
    n = len(clip.samples)
    n_out = int(round(n * target_rate / clip.sample_rate_hz))
    if n == 0 or n_out == 0:
        return AudioClip(target_rate, np.zeros(0, dtype=np.int16))
    positions = np.arange(n_out) * (clip.sample_rate_hz / target_rate)
    resampled = np.interp(positions, np.arange(n), clip.samples.astype(np.float64))
    return AudioClip(target_rate, np.clip(np.rint(resampled), -32768, 32767).astype(np.int16))


def read_wav(path: str | Path) -> AudioClip:
    """Read a PCM-16 WAV, downmixing to mono and resampling to 16 kHz."""
    with wave.open(str(path), "rb") as wf:
        if wf.getsampwidth() != 2:
            raise ValueError(f"{path}: only 16-bit PCM WAV is supported")
        rate = wf.getframerate()
        channels = wf.getnchannels()
        raw = wf.readframes(wf.getnframes())
    data = np.frombuffer(raw, dtype="<i2")
    if channels > 1:
        data = np.rint(data.reshape(-1, channels).mean(axis=1)).astype(np.int16)
    return resample_linear(AudioClip(rate, data), AudioClip.CANONICAL_RATE)


def write_wav(path: str | Path, clip: AudioClip) -> None:
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(clip.sample_rate_hz)
        wf.writeframes(clip.samples.astype("<i2").tobytes())
