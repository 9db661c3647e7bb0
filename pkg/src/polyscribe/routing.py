"""Translation fan-out planning, execution, and per-language view assembly.

Routing law:
  * EN booth feeds every other language (AR, ZH, FR, RU, ES, PT) in full.
  * Every non-EN booth feeds EN in full.
  * The floor feeds EN sentence-by-sentence: EN sentences are copied
    byte-identically, everything else is translated from its detected
    language.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Optional, Sequence

from .engines import EngineError, LIDEngine, MTEngine
from .model import (
    ArtifactSentence,
    ChannelId,
    Language,
    MeetingManifest,
    Transcript,
    TranslationArtifact,
    MULTILINGUAL,
    round_ms,
)
from .textproc import detokenize

FULL = "full"
PER_SENTENCE = "per_sentence"


@dataclass(frozen=True)
class TranslationJob:
    source_channel: ChannelId
    source_lang: str  # Language code, or MULTILINGUAL for the floor
    target_lang: Language
    mode: str  # FULL | PER_SENTENCE

    @property
    def job_id(self) -> str:
        return f"{self.source_channel}->{self.target_lang.value}"


@dataclass(frozen=True)
class JobFailure:
    job: TranslationJob
    error: str


def plan_translation_jobs(channels: Sequence[ChannelId]) -> list[TranslationJob]:
    """The translation plan implied by the channel set, deterministically ordered."""
    seen: set[ChannelId] = set()
    for ch in channels:
        if ch in seen:
            raise ValueError(f"duplicate channel: {ch}")
        seen.add(ch)

    jobs: list[TranslationJob] = []
    for ch in seen:
        if ch.is_floor:
            jobs.append(TranslationJob(ch, MULTILINGUAL, Language.EN, PER_SENTENCE))
        elif ch.language == Language.EN:
            for tgt in Language:
                if tgt != Language.EN:
                    jobs.append(TranslationJob(ch, "EN", tgt, FULL))
        else:
            jobs.append(TranslationJob(ch, ch.language.value, Language.EN, FULL))
    jobs.sort(key=lambda j: (str(j.source_channel), j.target_lang.value))
    return jobs


def resolve_floor_languages(
    transcript: Transcript, lid: Optional[LIDEngine] = None
) -> list[Language]:
    """Per-utterance source language for the floor.

    Utterances already labeled keep their label; unlabeled ones are run
    through language id when available. Sentences that remain unknown take
    the majority detected language of the meeting (alphabetical on ties,
    EN when nothing at all was detected).
    """
    detected: list[Optional[Language]] = []
    for utt in transcript.utterances:
        lang = utt.language
        if lang is None and lid is not None:
            code = lid.identify(detokenize(utt.tokens))
            if code in Language._value2member_map_:
                lang = Language(code)
        detected.append(lang)

    counts = Counter(l for l in detected if l is not None)
    if counts:
        top = max(counts.values())
        majority = min(l for l, n in counts.items() if n == top)
    else:
        majority = Language.EN
    return [l if l is not None else majority for l in detected]


def execute_job(
    job: TranslationJob,
    transcript: Transcript,
    mt: MTEngine,
    lid: Optional[LIDEngine] = None,
) -> TranslationArtifact:
    if str(transcript.channel) != str(job.source_channel):
        raise ValueError(
            f"job {job.job_id} fed transcript for channel {transcript.channel}"
        )
    tgt = job.target_lang
    sentences: list[ArtifactSentence] = []

    if job.mode == FULL:
        src_lang = Language(job.source_lang)
        for i, utt in enumerate(transcript.utterances):
            text = detokenize(utt.tokens, src_lang)
            out = mt.translate(text, src_lang.value, tgt.value)
            sentences.append(
                ArtifactSentence(i, out, "translated", utt.start_s, utt.end_s)
            )
    elif job.mode == PER_SENTENCE:
        langs = resolve_floor_languages(transcript, lid)
        for i, (utt, lang) in enumerate(zip(transcript.utterances, langs)):
            text = detokenize(utt.tokens, lang)
            if lang == tgt:
                sentences.append(
                    ArtifactSentence(i, text, "copied", utt.start_s, utt.end_s)
                )
            else:
                out = mt.translate(text, lang.value, tgt.value)
                sentences.append(
                    ArtifactSentence(i, out, "translated", utt.start_s, utt.end_s)
                )
    else:
        raise ValueError(f"unknown job mode: {job.mode!r}")

    return TranslationArtifact(
        source_channel=job.source_channel,
        source_lang=job.source_lang,
        target_lang=tgt,
        sentences=tuple(sentences),
        engine_id=mt.engine_id,
    )


def execute_plan(
    jobs: Sequence[TranslationJob],
    transcripts: dict[str, Transcript],
    mt: MTEngine,
    lid: Optional[LIDEngine] = None,
) -> tuple[list[TranslationArtifact], list[JobFailure]]:
    """Run every job, isolating failures so one bad route cannot sink the rest."""
    artifacts: list[TranslationArtifact] = []
    failures: list[JobFailure] = []
    for job in jobs:
        transcript = transcripts.get(str(job.source_channel))
        if transcript is None:
            failures.append(JobFailure(job, "no transcript for source channel"))
            continue
        try:
            artifacts.append(execute_job(job, transcript, mt, lid))
        except EngineError as exc:
            failures.append(JobFailure(job, str(exc)))
    return artifacts, failures


# --- per-language views ---------------------------------------------------


@dataclass(frozen=True)
class ViewRow:
    start_s: Optional[float]
    end_s: Optional[float]
    speaker: Optional[str]
    text: str
    origin: str  # "native" | "translated" | "copied"


@dataclass(frozen=True)
class ViewDocument:
    meeting_id: str
    language: str
    source_channel: str
    kind: str  # "transcript" | "translation" | "gap"
    rows: tuple[ViewRow, ...] = ()
    error: Optional[str] = None


def _speaker_at(manifest: Optional[MeetingManifest], t: Optional[float]) -> Optional[str]:
    if manifest is None or t is None:
        return None
    turn = manifest.speaker_at(t)
    return turn.name if turn else None


def _transcript_rows(
    transcript: Transcript, manifest: Optional[MeetingManifest]
) -> tuple[ViewRow, ...]:
    lang = (
        Language(transcript.language)
        if transcript.language in Language._value2member_map_
        else None
    )
    rows = []
    for utt in transcript.utterances:
        start = round_ms(utt.start_s)
        rows.append(
            ViewRow(
                start_s=start,
                end_s=round_ms(utt.end_s),
                speaker=utt.speaker or _speaker_at(manifest, utt.start_s),
                text=detokenize(utt.tokens, utt.language or lang),
                origin="native",
            )
        )
    return tuple(rows)


def _artifact_rows(
    artifact: TranslationArtifact, manifest: Optional[MeetingManifest]
) -> tuple[ViewRow, ...]:
    return tuple(
        ViewRow(
            start_s=round_ms(s.start_s),
            end_s=round_ms(s.end_s),
            speaker=_speaker_at(manifest, s.start_s),
            text=s.text,
            origin=s.mode,
        )
        for s in artifact.sentences
    )


def assemble_language_view(
    meeting_id: str,
    language: Language,
    transcripts: dict[str, Transcript],
    artifacts: Sequence[TranslationArtifact],
    failures: Sequence[JobFailure] = (),
    manifest: Optional[MeetingManifest] = None,
) -> list[ViewDocument]:
    """Everything readable in one language: the native booth transcript plus
    every translation artifact targeting that language, ordered by source
    channel. Failed routes appear as explicit gaps, never silently dropped.
    The multilingual floor transcript itself belongs to no single language
    and is reachable only through its per-sentence artifact.
    """
    docs: list[ViewDocument] = []
    native = transcripts.get(f"booth-{language.value}")
    if native is not None:
        docs.append(
            ViewDocument(
                meeting_id=meeting_id,
                language=language.value,
                source_channel=str(native.channel),
                kind="transcript",
                rows=_transcript_rows(native, manifest),
            )
        )
    translated = [
        ViewDocument(
            meeting_id=meeting_id,
            language=language.value,
            source_channel=str(a.source_channel),
            kind="translation",
            rows=_artifact_rows(a, manifest),
        )
        for a in artifacts
        if a.target_lang == language
    ]
    gaps = [
        ViewDocument(
            meeting_id=meeting_id,
            language=language.value,
            source_channel=str(f.job.source_channel),
            kind="gap",
            error=f.error,
        )
        for f in failures
        if f.job.target_lang == language
    ]
    docs.extend(sorted(translated + gaps, key=lambda d: d.source_channel))
    return docs


def assemble_language_views(
    meeting_id: str,
    transcripts: dict[str, Transcript],
    artifacts: Sequence[TranslationArtifact],
    failures: Sequence[JobFailure] = (),
    manifest: Optional[MeetingManifest] = None,
) -> dict[str, list[ViewDocument]]:
    """The per-language document sets for all seven publication languages."""
    return {
        lang.value: assemble_language_view(
            meeting_id, lang, transcripts, artifacts, failures, manifest
        )
        for lang in Language
    }
