"""End-to-end meeting runner.

Per channel, sequentially: segment → transcribe → normalize → align →
translate → index; channels run concurrently, then exports join the results
per language. Publication order is enforced by a gate: when an EN booth
exists, its transcript record lands before any translation record.

Work state is kept under {work_dir}/{meeting_id}: an append-only journal,
one JSON file per transcript/translation artifact (the resume/idempotence
unit), exports, and the publication log. Artifact files contain no
wall-clock data, so identical inputs reproduce identical bytes.
"""

from __future__ import annotations

import hashlib
import json
import logging
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from .alignment import ProportionalAligner, align_transcript
from .config import PipelineConfig
from .engines import EngineError, EngineRegistry, Hypothesis
from .exporters import EXPORT_FORMATS, export_filename, export_view, select_primary_document
from .gateway import manifest_fingerprint, parse_manifest
from .model import (
    AudioClip,
    ChannelId,
    Language,
    MeetingManifest,
    Segment,
    Transcript,
    TranslationArtifact,
    Utterance,
    WordTiming,
    artifact_from_dict,
    artifact_to_dict,
    booth,
    manifest_to_json,
    parse_channel,
    transcript_from_dict,
    transcript_to_dict,
    validate_manifest,
    MULTILINGUAL,
    FLOOR,
)
from .routing import (
    JobFailure,
    TranslationJob,
    ViewDocument,
    assemble_language_view,
    execute_job,
    plan_translation_jobs,
)
from .search import SearchIndex
from .segmentation import detect_speech_regions, read_wav, split_segments
from .textproc import NormalizePolicy, normalize_hypothesis, tokenize

log = logging.getLogger(__name__)

STAGES = ("segmented", "transcribed", "normalized", "aligned", "translated", "indexed", "exported")
JOB_STATES = ("pending", "running", "partially_published", "published", "failed")

#: Safety valve: translations outwait a stalled EN transcript this long, then
#: proceed with a recorded warning instead of deadlocking the meeting.
GATE_TIMEOUT_S = 120.0


class IngestError(ValueError):
    pass


@dataclass
class MeetingJob:
    meeting_id: str
    state: str = "pending"
    channels: list[str] = field(default_factory=list)
    stages: dict[str, dict[str, str]] = field(default_factory=dict)  # channel -> stage -> status
    errors: list[str] = field(default_factory=list)
    stage_seconds: dict[str, dict[str, float]] = field(default_factory=dict)

    def init_channels(self, channels: Sequence[str]) -> None:
        self.channels = list(channels)
        self.stages = {ch: {s: "pending" for s in STAGES} for ch in channels}
        self.stage_seconds = {ch: {} for ch in channels}

    def mark(self, channel: str, stage: str, status: str, seconds: Optional[float] = None) -> None:
        self.stages[channel][stage] = status
        if seconds is not None:
            self.stage_seconds[channel][stage] = seconds


@dataclass(frozen=True)
class PublicationRecord:
    seq: int
    kind: str  # "transcript" | "translation" | "export"
    key: str
    digest: str
    wall_time: float


class PublicationLog:
    """Append-only, idempotent by (key, digest); persisted as JSONL."""

    def __init__(self, path: Optional[Path] = None):
        self.path = path
        self.records: list[PublicationRecord] = []
        self._seen: set[tuple[str, str]] = set()
        self._lock = threading.Lock()
        if path is not None and path.exists():
            for line in path.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    raw = json.loads(line)
                    rec = PublicationRecord(**raw)
                    self.records.append(rec)
                    self._seen.add((rec.key, rec.digest))

    def publish(self, kind: str, key: str, payload: bytes) -> Optional[PublicationRecord]:
        digest = hashlib.sha256(payload).hexdigest()
        with self._lock:
            if (key, digest) in self._seen:
                return None
            rec = PublicationRecord(len(self.records), kind, key, digest, time.time())
            self.records.append(rec)
            self._seen.add((key, digest))
            if self.path is not None:
                with open(self.path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(rec.__dict__) + "\n")
            return rec

    def first_seq(self, kind: str) -> Optional[int]:
        seqs = [r.seq for r in self.records if r.kind == kind]
        return min(seqs) if seqs else None


def discover_channels(audio_dir: Path) -> dict[str, Path]:
    """floor.wav and booth-XX.wav files present in the directory."""
    found: dict[str, Path] = {}
    for path in sorted(audio_dir.glob("*.wav")):
        stem = path.stem
        try:
            channel = parse_channel(stem)
        except ValueError:
            continue
        found[str(channel)] = path
    return found


@dataclass
class _MeetingState:
    manifest: MeetingManifest
    job: MeetingJob
    clips: dict[str, AudioClip]
    audio_digest: str
    work_dir: Path
    publications: PublicationLog
    transcripts: dict[str, Transcript] = field(default_factory=dict)
    artifacts: list[TranslationArtifact] = field(default_factory=list)
    failures: list[JobFailure] = field(default_factory=list)
    duplicate_booths: set[str] = field(default_factory=set)
    en_gate: threading.Event = field(default_factory=threading.Event)
    lock: threading.Lock = field(default_factory=threading.Lock)


class Orchestrator:
    def __init__(self, config: PipelineConfig, registry: EngineRegistry):
        self.config = config
        self.registry = registry
        self.config.work_dir.mkdir(parents=True, exist_ok=True)
        self.index = SearchIndex(config.resolved_index_root())
        self._meetings: dict[str, _MeetingState] = {}
        self._lock = threading.Lock()

    # --- ingest ---------------------------------------------------------

    def ingest(self, manifest: MeetingManifest | str | Path, audio_dir: str | Path) -> MeetingJob:
        if not isinstance(manifest, MeetingManifest):
            manifest = parse_manifest(Path(manifest).read_text(encoding="utf-8"))
        report = validate_manifest(manifest)
        if not report.ok:
            raise IngestError("manifest invalid: " + "; ".join(report.violations))

        audio_dir = Path(audio_dir)
        files = discover_channels(audio_dir)
        if "floor" not in files:
            raise IngestError(f"missing floor audio: no floor.wav in {audio_dir}")

        clips = {ch: read_wav(path) for ch, path in files.items()}
        digest = hashlib.sha256()
        for ch in sorted(clips):
            digest.update(ch.encode())
            digest.update(clips[ch].samples.tobytes())
        digest.update(manifest_fingerprint(manifest).encode())
        fingerprint = digest.hexdigest()

        with self._lock:
            existing = self._meetings.get(manifest.meeting_id)
            if existing is not None:
                if existing.audio_digest == fingerprint:
                    return existing.job
                raise IngestError(
                    f"meeting {manifest.meeting_id} already ingested with different inputs"
                )

            work = self.config.work_dir / manifest.meeting_id
            (work / "artifacts").mkdir(parents=True, exist_ok=True)
            (work / "exports").mkdir(exist_ok=True)
            (work / "manifest.json").write_text(manifest_to_json(manifest), encoding="utf-8")
            (work / "ingest.json").write_text(
                json.dumps({"audio_dir": str(audio_dir)}), encoding="utf-8"
            )

            job = MeetingJob(meeting_id=manifest.meeting_id)
            job.init_channels(sorted(clips))
            state = _MeetingState(
                manifest=manifest,
                job=job,
                clips=clips,
                audio_digest=fingerprint,
                work_dir=work,
                publications=PublicationLog(work / "publications.log"),
            )
            floor_bytes = clips["floor"].samples.tobytes()
            for ch, clip in clips.items():
                if ch != "floor" and clip.samples.tobytes() == floor_bytes:
                    state.duplicate_booths.add(ch)
            self._meetings[manifest.meeting_id] = state
            self._journal(state, {"event": "ingested", "channels": job.channels})
            return job

    # --- run --------------------------------------------------------------

    def run(self, meeting_id: str) -> MeetingJob:
        state = self._require(meeting_id)
        job = state.job
        if job.state == "published":
            return job
        job.state = "running"
        self._journal(state, {"event": "state", "state": "running"})

        if "booth-EN" not in job.channels:
            state.en_gate.set()  # gate is vacuous without an EN booth

        with ThreadPoolExecutor(max_workers=max(len(job.channels), 1)) as pool:
            futures = {
                ch: pool.submit(self._run_channel, state, ch) for ch in job.channels
            }
            for ch, fut in futures.items():
                try:
                    fut.result()
                except Exception as exc:  # noqa: BLE001 - recorded, siblings keep going
                    log.exception("channel %s failed", ch)
                    with state.lock:
                        job.errors.append(f"{ch}: {exc}")

        self._export_phase(state)

        channel_failed = any(
            status == "failed" for ch in job.channels for status in job.stages[ch].values()
        )
        if not state.transcripts:
            job.state = "failed"
        elif state.failures or channel_failed or job.errors:
            job.state = "partially_published"
        else:
            job.state = "published"
        self._journal(state, {"event": "state", "state": job.state})
        return job

    # --- per-channel stages ----------------------------------------------

    def _run_channel(self, state: _MeetingState, ch: str) -> None:
        try:
            self._run_channel_inner(state, ch)
        finally:
            # whatever happened, never leave siblings waiting on a gate that
            # cannot open anymore
            if ch == "booth-EN":
                state.en_gate.set()

    def _run_channel_inner(self, state: _MeetingState, ch: str) -> None:
        job = state.job
        channel = parse_channel(ch)
        transcript_path = state.work_dir / "artifacts" / f"transcript.{ch}.json"

        if transcript_path.exists():
            transcript = transcript_from_dict(
                json.loads(transcript_path.read_text(encoding="utf-8"))
            )
            for stage in ("segmented", "transcribed", "normalized", "aligned"):
                job.mark(ch, stage, "done")
        else:
            transcript = self._build_transcript(state, ch, channel)
            transcript_path.write_text(
                json.dumps(transcript_to_dict(transcript), ensure_ascii=False, indent=1),
                encoding="utf-8",
            )

        with state.lock:
            state.transcripts[ch] = transcript
        state.publications.publish(
            "transcript", f"transcript/{ch}", transcript_path.read_bytes()
        )
        if ch == "booth-EN":
            state.en_gate.set()

        try:
            self._translate_channel(state, ch, channel, transcript)
            job.mark(ch, "translated", "done")
        except Exception as exc:  # noqa: BLE001 - engine errors are handled per job inside
            job.mark(ch, "translated", "failed")
            with state.lock:
                job.errors.append(f"{ch}: translation stage: {exc}")
            return

        t0 = time.monotonic()
        self.index.index_transcript(transcript, state.manifest)
        with state.lock:
            own_artifacts = [a for a in state.artifacts if str(a.source_channel) == ch]
        for artifact in own_artifacts:
            self.index.index_artifact(artifact, state.manifest)
        job.mark(ch, "indexed", "done", time.monotonic() - t0)
        self._journal(state, {"event": "stage", "channel": ch, "stage": "indexed"})

    def _build_transcript(self, state: _MeetingState, ch: str, channel: ChannelId) -> Transcript:
        job = state.job
        clip = state.clips[ch]
        lang_code = channel.language.value if channel.language else MULTILINGUAL

        t0 = time.monotonic()
        regions = detect_speech_regions(clip, self.config.vad)
        segments = split_segments(
            regions,
            clip,
            self.config.segmentation,
            channel=channel,
            meeting_id=state.manifest.meeting_id,
        )
        job.mark(ch, "segmented", "done", time.monotonic() - t0)
        self._journal(
            state,
            {"event": "stage", "channel": ch, "stage": "segmented", "segments": len(segments)},
        )

        t0 = time.monotonic()
        hypotheses: list[tuple[Segment, Hypothesis]] = []
        for segment in segments:
            hyp = self.registry.s2t.transcribe(segment, clip, lang_code)
            if hyp.no_reference:
                with state.lock:
                    job.errors.append(f"{ch}: no transcript for segment {segment.segment_id}")
            hypotheses.append((segment, hyp))
        job.mark(ch, "transcribed", "done", time.monotonic() - t0)
        self._journal(state, {"event": "stage", "channel": ch, "stage": "transcribed"})

        t0 = time.monotonic()
        utterances: list[Utterance] = []
        policy = NormalizePolicy(language=channel.language)
        for segment, hyp in hypotheses:
            if not hyp.tokens:
                continue
            text = normalize_hypothesis(hyp.tokens, policy)
            tokens = tokenize(text, channel.language)
            if not tokens:
                continue
            utt_lang = channel.language
            if channel.is_floor:
                code = self.registry.lid.identify(text)
                utt_lang = Language(code) if code in Language._value2member_map_ else None
            words: tuple[WordTiming, ...]
            if hyp.words is not None and [w.token for w in hyp.words] == tokens:
                words = hyp.words  # engine alignment survives normalization
            else:
                words = tuple(WordTiming(tok) for tok in tokens)
            utterances.append(
                Utterance(words=words, language=utt_lang, segment_id=segment.segment_id)
            )
        job.mark(ch, "normalized", "done", time.monotonic() - t0)
        self._journal(state, {"event": "stage", "channel": ch, "stage": "normalized"})

        t0 = time.monotonic()
        draft = Transcript(
            channel=channel,
            language=lang_code,
            utterances=tuple(utterances),
            engine_id=self.registry.s2t.engine_id,
            duplicate_of_floor=ch in state.duplicate_booths,
        )
        segments_by_ch = [s for s, _ in hypotheses]
        transcript = align_transcript(draft, segments_by_ch, state.clips.get(ch), ProportionalAligner())
        job.mark(ch, "aligned", "done", time.monotonic() - t0)
        self._journal(state, {"event": "stage", "channel": ch, "stage": "aligned"})
        return transcript

    def _translate_channel(
        self, state: _MeetingState, ch: str, channel: ChannelId, transcript: Transcript
    ) -> None:
        job = state.job
        t0 = time.monotonic()
        jobs = plan_translation_jobs([channel])
        computed: list[tuple[TranslationJob, Optional[TranslationArtifact], Optional[str]]] = []
        for tjob in jobs:
            path = (
                state.work_dir
                / "artifacts"
                / f"artifact.{tjob.source_channel}.to.{tjob.target_lang.value}.json"
            )
            if path.exists():
                artifact = artifact_from_dict(json.loads(path.read_text(encoding="utf-8")))
                computed.append((tjob, artifact, None))
                continue
            try:
                artifact = execute_job(tjob, transcript, self.registry.mt, self.registry.lid)
            except EngineError as exc:
                computed.append((tjob, None, str(exc)))
                continue
            path.write_text(
                json.dumps(artifact_to_dict(artifact), ensure_ascii=False, indent=1),
                encoding="utf-8",
            )
            computed.append((tjob, artifact, None))

        # translations never go out before the EN transcript
        if not state.en_gate.wait(GATE_TIMEOUT_S):
            with state.lock:
                job.errors.append(f"{ch}: publication gate timed out; publishing anyway")

        for tjob, artifact, error in computed:
            if artifact is None:
                with state.lock:
                    state.failures.append(JobFailure(tjob, error or "translation failed"))
                    job.errors.append(f"{ch}: job {tjob.job_id} failed: {error}")
                self._journal(
                    state,
                    {"event": "job-failed", "channel": ch, "job": tjob.job_id, "error": error},
                )
                continue
            with state.lock:
                state.artifacts.append(artifact)
            path = (
                state.work_dir
                / "artifacts"
                / f"artifact.{tjob.source_channel}.to.{tjob.target_lang.value}.json"
            )
            state.publications.publish("translation", f"translation/{tjob.job_id}", path.read_bytes())
        job.stage_seconds[ch]["translated"] = time.monotonic() - t0
        self._journal(state, {"event": "stage", "channel": ch, "stage": "translated"})

    # --- exports --------------------------------------------------------

    def _export_phase(self, state: _MeetingState) -> None:
        job = state.job
        sink = state.work_dir / "exports"
        for lang in Language:
            docs = self.language_view(state.manifest.meeting_id, lang)
            primary = select_primary_document(docs)
            if primary is None:
                continue
            for fmt in EXPORT_FORMATS:
                try:
                    payload = export_view(primary, state.manifest, fmt)
                except Exception as exc:  # noqa: BLE001
                    with state.lock:
                        job.errors.append(f"export {lang.value}.{fmt}: {exc}")
                    continue
                name = export_filename(state.manifest.meeting_id, lang.value, fmt)
                (sink / name).write_bytes(payload)
                state.publications.publish("export", f"export/{lang.value}/{fmt}", payload)
        for ch in job.channels:
            if job.stages[ch].get("translated") == "done":
                job.mark(ch, "exported", "done")
        self._journal(state, {"event": "stage", "channel": "*", "stage": "exported"})

    # --- read side --------------------------------------------------------

    def _require(self, meeting_id: str) -> _MeetingState:
        state = self._meetings.get(meeting_id)
        if state is None:
            raise KeyError(f"unknown meeting: {meeting_id}")
        return state

    def list_meetings(self) -> list[dict]:
        with self._lock:
            states = list(self._meetings.values())
        return [
            {
                "meeting_id": s.manifest.meeting_id,
                "title": s.manifest.title,
                "state": s.job.state,
                "channels": s.job.channels,
            }
            for s in states
        ]

    def status(self, meeting_id: str) -> dict:
        state = self._require(meeting_id)
        job = state.job
        with state.lock:
            return {
                "meeting_id": meeting_id,
                "state": job.state,
                "channels": {ch: dict(job.stages[ch]) for ch in job.channels},
                "errors": list(job.errors),
                "artifacts": {
                    "transcripts": len(state.transcripts),
                    "translations": len(state.artifacts),
                    "failed_translations": len(state.failures),
                },
                "publications": len(state.publications.records),
            }

    def language_view(self, meeting_id: str, lang: Language | str) -> list[ViewDocument]:
        state = self._require(meeting_id)
        if isinstance(lang, str):
            lang = Language(lang.upper())
        with state.lock:
            return assemble_language_view(
                meeting_id,
                lang,
                dict(state.transcripts),
                list(state.artifacts),
                list(state.failures),
                state.manifest,
            )

    def export(self, meeting_id: str, lang: Language | str, fmt: str) -> bytes:
        state = self._require(meeting_id)
        docs = self.language_view(meeting_id, lang)
        primary = select_primary_document(docs)
        if primary is None:
            code = lang if isinstance(lang, str) else lang.value
            raise KeyError(f"no content in language {code} for meeting {meeting_id}")
        return export_view(primary, state.manifest, fmt)

    def publication_records(self, meeting_id: str) -> list[PublicationRecord]:
        return list(self._require(meeting_id).publications.records)

    def transcripts(self, meeting_id: str) -> dict[str, Transcript]:
        state = self._require(meeting_id)
        with state.lock:
            return dict(state.transcripts)

    def artifacts(self, meeting_id: str) -> list[TranslationArtifact]:
        state = self._require(meeting_id)
        with state.lock:
            return list(state.artifacts)

    def plan(self, channels: Sequence[ChannelId]) -> list[TranslationJob]:
        return plan_translation_jobs(channels)

    # --- journal ----------------------------------------------------------

    def _journal(self, state: _MeetingState, entry: dict) -> None:
        record = {"t": time.time(), "meeting": state.manifest.meeting_id} | entry
        with state.lock:
            with open(state.work_dir / "journal.log", "a", encoding="utf-8") as fh:
                fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def channels_from_codes(codes: Sequence[str]) -> list[ChannelId]:
    """'floor' plus booth language codes to ChannelIds (CLI plan helper)."""
    out = []
    for code in codes:
        if code.lower() == "floor":
            out.append(FLOOR)
        else:
            out.append(booth(code))
    return out


def load_ingested(orchestrator: Orchestrator, meeting_id: str) -> MeetingJob:
    """Re-attach a meeting ingested by an earlier process from its work dir."""
    with orchestrator._lock:
        state = orchestrator._meetings.get(meeting_id)
    if state is not None:
        return state.job
    work = orchestrator.config.work_dir / meeting_id
    receipt = work / "ingest.json"
    if not receipt.exists():
        raise KeyError(
            f"meeting {meeting_id} was never ingested under {orchestrator.config.work_dir}"
        )
    audio_dir = json.loads(receipt.read_text(encoding="utf-8"))["audio_dir"]
    manifest = parse_manifest((work / "manifest.json").read_text(encoding="utf-8"))
    return orchestrator.ingest(manifest, audio_dir)


def job_status_from_disk(work_dir: Path, meeting_id: str) -> dict:
    """Status for a meeting this process never ran, from its journal alone."""
    work = Path(work_dir) / meeting_id
    journal = work / "journal.log"
    if not journal.exists():
        raise KeyError(f"unknown meeting: {meeting_id}")
    state, channels, stages = "pending", [], {}
    for line in journal.read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        entry = json.loads(line)
        if entry.get("event") == "ingested":
            channels = entry.get("channels", [])
            stages = {ch: {} for ch in channels}
        elif entry.get("event") == "state":
            state = entry["state"]
        elif entry.get("event") == "stage" and entry.get("channel") in stages:
            stages[entry["channel"]][entry["stage"]] = "done"
    artifacts = sorted(p.name for p in (work / "artifacts").glob("*.json")) if (work / "artifacts").exists() else []
    return {
        "meeting_id": meeting_id,
        "state": state,
        "channels": {ch: stages.get(ch, {}) for ch in channels},
        "artifacts": {
            "transcripts": sum(1 for n in artifacts if n.startswith("transcript.")),
            "translations": sum(1 for n in artifacts if n.startswith("artifact.")),
        },
    }
