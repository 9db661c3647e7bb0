"""Shared domain types and structural validation for the pipeline.

Everything here is an immutable value object; validators are pure functions
that return reports instead of raising, so invalid data can be inspected.
"""

from __future__ import annotations

import json
import unicodedata
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np


class Language(str, Enum):
    """Meeting languages. PT is a translation/floor language, never a booth."""

    AR = "AR"
    ZH = "ZH"
    EN = "EN"
    FR = "FR"
    RU = "RU"
    ES = "ES"
    PT = "PT"

    @property
    def code(self) -> str:
        return self.value


#: The six booth (interpretation) languages.
BOOTH_LANGUAGES: tuple[Language, ...] = (
    Language.AR,
    Language.ZH,
    Language.EN,
    Language.FR,
    Language.RU,
    Language.ES,
)

#: All valid translation targets (the six booth languages plus Portuguese).
TRANSLATION_TARGETS: tuple[Language, ...] = tuple(Language)

#: Language hint for the multilingual floor channel (explicit, not "EN default").
MULTILINGUAL = "MULTI"

#: Returned by language identification when no language can be determined.
UNK = "UNK"


def parse_language(code: str) -> Language:
    try:
        return Language(code.upper())
    except ValueError:
        raise ValueError(f"unknown language code: {code!r}") from None


@dataclass(frozen=True, order=True)
class ChannelId:
    """Identity of one audio channel: the floor or one interpretation booth."""

    kind: str  # "floor" | "booth"
    language: Optional[Language] = None

    def __post_init__(self) -> None:
        if self.kind not in ("floor", "booth"):
            raise ValueError(f"channel kind must be 'floor' or 'booth', got {self.kind!r}")
        if self.kind == "floor" and self.language is not None:
            raise ValueError("floor channel carries no language")
        if self.kind == "booth":
            if self.language is None:
                raise ValueError("booth channel requires a language")
            if self.language not in BOOTH_LANGUAGES:
                raise ValueError(f"{self.language.value} is not a booth language")

    @property
    def is_floor(self) -> bool:
        return self.kind == "floor"

    def __str__(self) -> str:
        if self.kind == "floor":
            return "floor"
        return f"booth-{self.language.value}"


FLOOR = ChannelId("floor")


def booth(lang: Language | str) -> ChannelId:
    if isinstance(lang, str):
        lang = parse_language(lang)
    return ChannelId("booth", lang)


def parse_channel(text: str) -> ChannelId:
    if text == "floor":
        return FLOOR
    if text.startswith("booth-"):
        return booth(text[len("booth-"):])
    raise ValueError(f"cannot parse channel id: {text!r}")


@dataclass(frozen=True)
class AgendaItem:
    label: str
    start_s: float
    end_s: Optional[float] = None


@dataclass(frozen=True)
class SpeakerTurn:
    name: str
    affiliation: str
    start_s: float
    end_s: float
    biography: Optional[str] = None
    flag_ref: Optional[str] = None


@dataclass(frozen=True)
class DocumentRef:
    code: str
    title: str


@dataclass(frozen=True)
class MeetingManifest:
    """Meeting identity plus the metadata feed: agenda, speakers, documents."""

    meeting_id: str
    title: str
    category: str = ""
    agenda: tuple[AgendaItem, ...] = ()
    speakers: tuple[SpeakerTurn, ...] = ()
    documents: tuple[DocumentRef, ...] = ()
    version: int = 0
    confidential: bool = False

    def speaker_at(self, t: float) -> Optional[SpeakerTurn]:
        """Speaker whose turn contains t, using half-open [start, end)."""
        for turn in self.speakers:
            if turn.start_s <= t < turn.end_s:
                return turn
        return None

    def agenda_at(self, t: float) -> Optional[AgendaItem]:
        """Agenda item containing t; an item without end_s runs to the next item."""
        current = None
        for i, item in enumerate(self.agenda):
            end = item.end_s
            if end is None:
                end = self.agenda[i + 1].start_s if i + 1 < len(self.agenda) else float("inf")
            if item.start_s <= t < end:
                current = item
        return current


class AudioClip:
    """Mono 16-bit PCM audio. Pipeline inputs are fixed at 16 kHz."""

    CANONICAL_RATE = 16000

    __slots__ = ("sample_rate_hz", "samples")

    def __init__(self, sample_rate_hz: int, samples) -> None:
        if sample_rate_hz <= 0:
            raise ValueError("sample rate must be positive")
        arr = np.asarray(samples, dtype=np.int16)
        if arr.ndim != 1:
            raise ValueError("audio must be mono (1-D samples)")
        arr.setflags(write=False)
        self.sample_rate_hz = int(sample_rate_hz)
        self.samples = arr

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate_hz

    def slice_seconds(self, start_s: float, end_s: float) -> "AudioClip":
        a = max(0, int(round(start_s * self.sample_rate_hz)))
        b = min(len(self.samples), int(round(end_s * self.sample_rate_hz)))
        return AudioClip(self.sample_rate_hz, self.samples[a:b])

    def __len__(self) -> int:
        return len(self.samples)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, AudioClip)
            and self.sample_rate_hz == other.sample_rate_hz
            and np.array_equal(self.samples, other.samples)
        )

    def __repr__(self) -> str:
        return f"AudioClip(rate={self.sample_rate_hz}, n={len(self.samples)}, dur={self.duration_s:.3f}s)"


@dataclass(frozen=True)
class SpeechRegion:
    start_s: float
    end_s: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.start_s < self.end_s):
            raise ValueError(f"invalid speech region [{self.start_s}, {self.end_s}]")

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s


def segment_key(meeting_id: str, channel: ChannelId, start_s: float, end_s: float) -> str:
    """Deterministic segment id: idempotent re-runs and sidecar lookups key on it."""
    return f"{meeting_id}/{channel}/{int(round(start_s * 1000))}-{int(round(end_s * 1000))}"


@dataclass(frozen=True)
class Segment:
    """A decoding slice of one channel. Decoding segments are 1-20 s long."""

    channel: ChannelId
    start_s: float
    end_s: float
    segment_id: str

    @classmethod
    def create(cls, meeting_id: str, channel: ChannelId, start_s: float, end_s: float) -> "Segment":
        return cls(channel, start_s, end_s, segment_key(meeting_id, channel, start_s, end_s))

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s


@dataclass(frozen=True)
class WordTiming:
    """One token with its time span. Timings may be absent before alignment."""

    token: str
    start_s: Optional[float] = None
    end_s: Optional[float] = None
    confidence: Optional[float] = None

    def __post_init__(self) -> None:
        if (self.start_s is None) != (self.end_s is None):
            raise ValueError("word timing must set both start_s and end_s or neither")

    @property
    def timed(self) -> bool:
        return self.start_s is not None


@dataclass(frozen=True)
class Utterance:
    words: tuple[WordTiming, ...] = ()
    language: Optional[Language] = None
    speaker: Optional[str] = None
    segment_id: Optional[str] = None

    @property
    def tokens(self) -> list[str]:
        return [w.token for w in self.words]

    @property
    def start_s(self) -> Optional[float]:
        timed = [w.start_s for w in self.words if w.timed]
        return min(timed) if timed else None

    @property
    def end_s(self) -> Optional[float]:
        timed = [w.end_s for w in self.words if w.timed]
        return max(timed) if timed else None


@dataclass(frozen=True)
class Transcript:
    """Recognized text for one channel; floor transcripts are multilingual."""

    channel: ChannelId
    language: str  # a Language code or MULTILINGUAL for the floor
    utterances: tuple[Utterance, ...] = ()
    engine_id: str = ""
    duplicate_of_floor: bool = False


@dataclass(frozen=True)
class ArtifactSentence:
    """One translated (or copied) sentence, keyed to its source utterance."""

    source_index: int
    text: str
    mode: str  # "translated" | "copied"
    start_s: Optional[float] = None
    end_s: Optional[float] = None


@dataclass(frozen=True)
class TranslationArtifact:
    source_channel: ChannelId
    source_lang: str  # Language code or MULTILINGUAL
    target_lang: Language
    sentences: tuple[ArtifactSentence, ...] = ()
    engine_id: str = ""


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, message: str) -> None:
        self.violations.append(message)

    def __bool__(self) -> bool:
        return self.ok


def validate_manifest(manifest: MeetingManifest) -> ValidationReport:
    """Report every manifest invariant violation; ok iff none."""
    report = ValidationReport()
    if not manifest.meeting_id:
        report.add("missing meeting_id")
    if not manifest.title:
        report.add("missing title")
    if manifest.version < 0:
        report.add("version must be non-negative")

    for i, item in enumerate(manifest.agenda):
        if item.start_s < 0:
            report.add(f"agenda[{i}] start before 0")
        if item.end_s is not None and item.end_s <= item.start_s:
            report.add(f"agenda[{i}] end not after start")
    for a, b in zip(manifest.agenda, manifest.agenda[1:]):
        if b.start_s < a.start_s:
            report.add("agenda not ordered by start time")
            break

    for i, turn in enumerate(manifest.speakers):
        if not turn.start_s < turn.end_s:
            report.add(f"speakers[{i}] start not before end")
    for a, b in zip(manifest.speakers, manifest.speakers[1:]):
        if b.start_s < a.start_s:
            report.add("speaker turns not ordered by start time")
            break
    for a, b in zip(manifest.speakers, manifest.speakers[1:]):
        if b.start_s < a.end_s:
            report.add(f"overlapping speaker turns: {a.name!r} and {b.name!r}")
    return report


def validate_transcript(t: Transcript, require_timings: bool = False) -> ValidationReport:
    """Check word-timing monotonicity and channel/language consistency."""
    report = ValidationReport()
    if t.channel.kind == "booth" and t.language != t.channel.language.value:
        report.add(
            f"language mismatch: booth {t.channel.language.value} transcript labeled {t.language}"
        )
    if t.channel.is_floor and t.language not in (MULTILINGUAL,) and t.language not in Language._value2member_map_:
        report.add(f"floor transcript language {t.language!r} not recognized")

    for ui, utt in enumerate(t.utterances):
        prev_end = None
        for wi, w in enumerate(utt.words):
            if w.confidence is not None and not 0.0 <= w.confidence <= 1.0:
                report.add(f"utterance {ui} word {wi} ({w.token!r}): confidence outside [0, 1]")
            if not w.timed:
                if require_timings:
                    report.add(f"utterance {ui} word {wi} ({w.token!r}) untimed")
                continue
            if not w.start_s < w.end_s:
                report.add(f"utterance {ui} word {wi} ({w.token!r}): start >= end")
                continue
            if prev_end is not None and w.start_s < prev_end:
                report.add(f"utterance {ui} word {wi} ({w.token!r}): overlaps previous word")
            prev_end = w.end_s
    return report


def validate_artifact(a: TranslationArtifact, source_utterance_count: Optional[int] = None) -> ValidationReport:
    """One sentence per source utterance; copied only on same-language pairs."""
    report = ValidationReport()
    indices = [s.source_index for s in a.sentences]
    if indices != sorted(set(indices)):
        report.add("artifact sentence indices not strictly increasing")
    if source_utterance_count is not None and indices != list(range(source_utterance_count)):
        report.add("artifact does not cover every source utterance exactly once")
    for s in a.sentences:
        if s.mode not in ("translated", "copied"):
            report.add(f"sentence {s.source_index}: unknown mode {s.mode!r}")
    if a.source_lang != MULTILINGUAL and a.source_lang == a.target_lang.value:
        # full-mode jobs never target their own language; per-sentence floor
        # artifacts use MULTILINGUAL as source_lang
        report.add("artifact source language equals target language")
    return report


# --- canonical JSON forms ------------------------------------------------

#: Serialized timestamps carry millisecond precision (media-player seek granularity).
def round_ms(t: Optional[float]) -> Optional[float]:
    return None if t is None else round(float(t), 3)


def manifest_to_dict(manifest: MeetingManifest) -> dict:
    """Canonical JSON-ready form with stable field order."""
    out: dict = {
        "meeting_id": manifest.meeting_id,
        "title": manifest.title,
        "category": manifest.category,
        "version": manifest.version,
        "agenda": [
            {"label": a.label, "start_s": round_ms(a.start_s)}
            | ({"end_s": round_ms(a.end_s)} if a.end_s is not None else {})
            for a in manifest.agenda
        ],
        "speakers": [
            {
                "name": s.name,
                "affiliation": s.affiliation,
                "start_s": round_ms(s.start_s),
                "end_s": round_ms(s.end_s),
            }
            | ({"biography": s.biography} if s.biography is not None else {})
            | ({"flag_ref": s.flag_ref} if s.flag_ref is not None else {})
            for s in manifest.speakers
        ],
        "documents": [{"code": d.code, "title": d.title} for d in manifest.documents],
    }
    if manifest.confidential:
        out["confidential"] = True
    return out


def manifest_to_json(manifest: MeetingManifest) -> str:
    return json.dumps(manifest_to_dict(manifest), ensure_ascii=False, indent=2) + "\n"


def fold_diacritics(text: str) -> str:
    """Strip combining marks after compatibility decomposition."""
    decomposed = unicodedata.normalize("NFKD", text)
    return "".join(c for c in decomposed if not unicodedata.combining(c))


def transcript_to_dict(t: Transcript) -> dict:
    return {
        "channel": str(t.channel),
        "language": t.language,
        "engine_id": t.engine_id,
        "duplicate_of_floor": t.duplicate_of_floor,
        "utterances": [
            {
                "language": u.language.value if u.language else None,
                "speaker": u.speaker,
                "segment_id": u.segment_id,
                "words": [
                    {
                        "token": w.token,
                        "start_s": w.start_s,
                        "end_s": w.end_s,
                    }
                    | ({"confidence": w.confidence} if w.confidence is not None else {})
                    for w in u.words
                ],
            }
            for u in t.utterances
        ],
    }


def transcript_from_dict(raw: dict) -> Transcript:
    utterances = tuple(
        Utterance(
            words=tuple(
                WordTiming(w["token"], w["start_s"], w["end_s"], w.get("confidence"))
                for w in u["words"]
            ),
            language=Language(u["language"]) if u.get("language") else None,
            speaker=u.get("speaker"),
            segment_id=u.get("segment_id"),
        )
        for u in raw["utterances"]
    )
    return Transcript(
        channel=parse_channel(raw["channel"]),
        language=raw["language"],
        utterances=utterances,
        engine_id=raw.get("engine_id", ""),
        duplicate_of_floor=bool(raw.get("duplicate_of_floor", False)),
    )


def artifact_to_dict(a: TranslationArtifact) -> dict:
    return {
        "source_channel": str(a.source_channel),
        "source_lang": a.source_lang,
        "target_lang": a.target_lang.value,
        "engine_id": a.engine_id,
        "sentences": [
            {
                "source_index": s.source_index,
                "text": s.text,
                "mode": s.mode,
                "start_s": s.start_s,
                "end_s": s.end_s,
            }
            for s in a.sentences
        ],
    }


def artifact_from_dict(raw: dict) -> TranslationArtifact:
    return TranslationArtifact(
        source_channel=parse_channel(raw["source_channel"]),
        source_lang=raw["source_lang"],
        target_lang=Language(raw["target_lang"]),
        sentences=tuple(
            ArtifactSentence(
                source_index=s["source_index"],
                text=s["text"],
                mode=s["mode"],
                start_s=s.get("start_s"),
                end_s=s.get("end_s"),
            )
            for s in raw["sentences"]
        ),
        engine_id=raw.get("engine_id", ""),
    )
