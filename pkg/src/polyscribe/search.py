"""Embedded inverted index over transcript and translation words.

Single writer, many readers: the whole index state is an immutable value
swapped atomically on every document upsert, so a reader sees either none or
all of a document's postings. Persistence is an append-only postings.log plus
compacted snapshot-{n} files under one directory.

Scoring (invented here, frozen by golden tests):
    score(utterance) = sum over query terms of tf * ln(1 + N / (1 + df))
where tf counts the term inside the utterance, N is the number of indexed
documents and df the number containing the term.
"""

from __future__ import annotations

import json
import math
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

from .model import (
    Language,
    MeetingManifest,
    Transcript,
    TranslationArtifact,
    fold_diacritics,
    validate_transcript,
)
from .textproc import tokenize

SNIPPET_RADIUS = 5


def normalize_term(token: str) -> str:
    return fold_diacritics(token.casefold())


def _is_cjk(ch: str) -> bool:
    cp = ord(ch)
    return 0x4E00 <= cp <= 0x9FFF or 0x3400 <= cp <= 0x4DBF


def _expand_token(token: str) -> list[str]:
    """CJK tokens split per character so index terms match query terms."""
    if any(_is_cjk(c) for c in token):
        return tokenize(token, Language.ZH)
    return [token]


def normalize_query(text: str) -> list[str]:
    """Whitespace terms, CJK split per character, all normalized."""
    terms: list[str] = []
    for chunk in text.split():
        terms.extend(_expand_token(chunk))
    return [normalize_term(t) for t in terms if t]


@dataclass(frozen=True)
class SearchPosting:
    term: str  # normalized
    token: str  # display form, for snippets
    meeting_id: str
    channel: str
    language: str
    timestamp_s: float
    utterance_index: int
    word_index: int
    speaker: Optional[str] = None
    agenda_label: Optional[str] = None


@dataclass(frozen=True)
class Query:
    terms: tuple[str, ...]
    meeting_id: Optional[str] = None
    language: Optional[str] = None
    channel: Optional[str] = None
    speaker: Optional[str] = None
    agenda_label: Optional[str] = None
    limit: int = 10

    @classmethod
    def parse(cls, text: str, **filters) -> "Query":
        return cls(terms=tuple(normalize_query(text)), **filters)


@dataclass(frozen=True)
class Hit:
    meeting_id: str
    channel: str
    language: str
    timestamp_s: float
    snippet: str
    score: float
    speaker: Optional[str] = None
    agenda_label: Optional[str] = None


@dataclass(frozen=True)
class _DocEntry:
    facets: dict
    postings: tuple[SearchPosting, ...]


@dataclass(frozen=True)
class _State:
    """Immutable index state; every upsert builds and swaps a new one."""

    docs: dict[str, _DocEntry] = field(default_factory=dict)
    term_docs: dict[str, frozenset[str]] = field(default_factory=dict)

    def with_doc(self, doc_key: str, entry: _DocEntry) -> "_State":
        docs = dict(self.docs)
        docs[doc_key] = entry
        return _State(docs, _rebuild_term_docs(docs))

    def without_doc(self, doc_key: str) -> "_State":
        docs = {k: v for k, v in self.docs.items() if k != doc_key}
        return _State(docs, _rebuild_term_docs(docs))


def _rebuild_term_docs(docs: dict[str, _DocEntry]) -> dict[str, frozenset[str]]:
    acc: dict[str, set[str]] = {}
    for key, entry in docs.items():
        for p in entry.postings:
            acc.setdefault(p.term, set()).add(key)
    return {t: frozenset(s) for t, s in acc.items()}


def _resolve(manifest: Optional[MeetingManifest], t: Optional[float]) -> tuple[Optional[str], Optional[str]]:
    if manifest is None or t is None:
        return None, None
    turn = manifest.speaker_at(t)
    item = manifest.agenda_at(t)
    return (turn.name if turn else None), (item.label if item else None)


def transcript_doc_key(meeting_id: str, transcript: Transcript) -> str:
    return f"{meeting_id}/{transcript.channel}/transcript/{transcript.language}"


def artifact_doc_key(meeting_id: str, artifact: TranslationArtifact) -> str:
    return f"{meeting_id}/{artifact.source_channel}/translation/{artifact.target_lang.value}"


class SearchIndex:
    """Embedded index; pass root=None for a memory-only instance."""

    def __init__(self, root: Optional[Path | str] = None):
        self._state = _State()
        self._lock = threading.Lock()  # serializes writers only
        self._applied = 0  # records folded into the current snapshot + log
        self.root = Path(root) if root is not None else None
        if self.root is not None:
            self.root.mkdir(parents=True, exist_ok=True)
            self._load()

    # --- persistence -----------------------------------------------------

    @property
    def _log_path(self) -> Path:
        return self.root / "postings.log"

    def _snapshot_paths(self) -> list[Path]:
        return sorted(
            self.root.glob("snapshot-*"),
            key=lambda p: int(p.name.split("-", 1)[1]),
        )

    def _load(self) -> None:
        state = _State()
        base = 0
        snaps = self._snapshot_paths()
        if snaps:
            latest = snaps[-1]
            payload = json.loads(latest.read_text(encoding="utf-8"))
            base = int(payload["seq"])
            docs = {
                key: _DocEntry(
                    facets=raw["facets"],
                    postings=tuple(SearchPosting(**p) for p in raw["postings"]),
                )
                for key, raw in payload["docs"].items()
            }
            state = _State(docs, _rebuild_term_docs(docs))
        applied = base
        if self._log_path.exists():
            with open(self._log_path, encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    record = json.loads(line)
                    if record.get("removed"):
                        state = state.without_doc(record["doc_key"])
                    else:
                        entry = _DocEntry(
                            facets=record["facets"],
                            postings=tuple(SearchPosting(**p) for p in record["postings"]),
                        )
                        state = state.with_doc(record["doc_key"], entry)
                    applied += 1
        self._state = state
        self._applied = applied

    def _append_log(self, doc_key: str, entry: _DocEntry) -> None:
        if self.root is None:
            return
        record = {
            "doc_key": doc_key,
            "facets": entry.facets,
            "postings": [p.__dict__ for p in entry.postings],
        }
        with open(self._log_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")

    def compact(self) -> Optional[Path]:
        """Fold the log into a new snapshot-{n} and truncate the log."""
        if self.root is None:
            return None
        with self._lock:
            state = self._state
            payload = {
                "seq": self._applied,
                "docs": {
                    key: {
                        "facets": entry.facets,
                        "postings": [p.__dict__ for p in entry.postings],
                    }
                    for key, entry in state.docs.items()
                },
            }
            path = self.root / f"snapshot-{self._applied}"
            tmp = path.with_suffix(".tmp")
            tmp.write_text(json.dumps(payload, ensure_ascii=False), encoding="utf-8")
            tmp.replace(path)
            open(self._log_path, "w").close()
            for old in self._snapshot_paths():
                if old != path:
                    old.unlink()
            return path

    # --- writing ----------------------------------------------------------

    def index_document(
        self,
        doc: Union[Transcript, TranslationArtifact],
        manifest: MeetingManifest,
    ) -> int:
        if isinstance(doc, Transcript):
            return self.index_transcript(doc, manifest)
        return self.index_artifact(doc, manifest)

    def index_transcript(self, transcript: Transcript, manifest: MeetingManifest) -> int:
        report = validate_transcript(transcript, require_timings=True)
        if not report.ok:
            raise ValueError("refusing to index invalid transcript: " + "; ".join(report.violations))
        if manifest.confidential:
            return 0
        postings: list[SearchPosting] = []
        for ui, utt in enumerate(transcript.utterances):
            wi = 0
            for w in utt.words:
                speaker, agenda = _resolve(manifest, w.start_s)
                for piece in _expand_token(w.token):
                    postings.append(
                        SearchPosting(
                            term=normalize_term(piece),
                            token=piece,
                            meeting_id=manifest.meeting_id,
                            channel=str(transcript.channel),
                            language=transcript.language,
                            timestamp_s=w.start_s,
                            utterance_index=ui,
                            word_index=wi,
                            speaker=utt.speaker or speaker,
                            agenda_label=agenda,
                        )
                    )
                    wi += 1
        key = transcript_doc_key(manifest.meeting_id, transcript)
        facets = {
            "meeting_id": manifest.meeting_id,
            "channel": str(transcript.channel),
            "language": transcript.language,
        }
        self._upsert(key, _DocEntry(facets, tuple(postings)))
        return len(postings)

    def index_artifact(self, artifact: TranslationArtifact, manifest: MeetingManifest) -> int:
        if manifest.confidential:
            return 0
        lang = artifact.target_lang
        postings: list[SearchPosting] = []
        for si, sentence in enumerate(artifact.sentences):
            tokens = [p for tok in tokenize(sentence.text, lang) for p in _expand_token(tok)]
            speaker, agenda = _resolve(manifest, sentence.start_s)
            for wi, tok in enumerate(tokens):
                # translated words carry no per-word alignment; the sentence
                # start stands in for every word
                postings.append(
                    SearchPosting(
                        term=normalize_term(tok),
                        token=tok,
                        meeting_id=manifest.meeting_id,
                        channel=str(artifact.source_channel),
                        language=lang.value,
                        timestamp_s=sentence.start_s if sentence.start_s is not None else 0.0,
                        utterance_index=si,
                        word_index=wi,
                        speaker=speaker,
                        agenda_label=agenda,
                    )
                )
        key = artifact_doc_key(manifest.meeting_id, artifact)
        facets = {
            "meeting_id": manifest.meeting_id,
            "channel": str(artifact.source_channel),
            "language": lang.value,
        }
        self._upsert(key, _DocEntry(facets, tuple(postings)))
        return len(postings)

    def remove_meeting(self, meeting_id: str) -> int:
        with self._lock:
            keys = [k for k, e in self._state.docs.items() if e.facets["meeting_id"] == meeting_id]
            state = self._state
            for key in keys:
                state = state.without_doc(key)
                if self.root is not None:
                    with open(self._log_path, "a", encoding="utf-8") as fh:
                        fh.write(json.dumps({"doc_key": key, "removed": True}) + "\n")
                self._applied += 1
            self._state = state
        return len(keys)

    def _upsert(self, doc_key: str, entry: _DocEntry) -> None:
        with self._lock:
            self._state = self._state.with_doc(doc_key, entry)
            self._append_log(doc_key, entry)
            self._applied += 1

    # --- reading -----------------------------------------------------------

    @property
    def posting_count(self) -> int:
        state = self._state
        return sum(len(e.postings) for e in state.docs.values())

    @property
    def document_count(self) -> int:
        return len(self._state.docs)

    def search(self, query: Query) -> list[Hit]:
        state = self._state  # single atomic read: the snapshot for this query
        if not query.terms:
            return []
        candidate: Optional[frozenset[str]] = None
        for term in query.terms:
            docs = state.term_docs.get(term, frozenset())
            candidate = docs if candidate is None else candidate & docs
            if not candidate:
                return []

        n_docs = max(len(state.docs), 1)
        weights = {
            term: math.log(1.0 + n_docs / (1.0 + len(state.term_docs.get(term, ()))))
            for term in query.terms
        }

        hits: list[Hit] = []
        for key in sorted(candidate):
            entry = state.docs[key]
            facets = entry.facets
            if query.meeting_id is not None and facets["meeting_id"] != query.meeting_id:
                continue
            if query.language is not None and facets["language"] != query.language:
                continue
            if query.channel is not None and facets["channel"] != query.channel:
                continue
            by_utt: dict[int, list[SearchPosting]] = {}
            for p in entry.postings:
                by_utt.setdefault(p.utterance_index, []).append(p)
            for ui in sorted(by_utt):
                plist = by_utt[ui]
                hit = self._utterance_hit(plist, query, weights)
                if hit is not None:
                    hits.append(hit)

        hits.sort(key=lambda h: (-h.score, h.meeting_id, h.timestamp_s))
        return hits[: query.limit] if query.limit else hits

    @staticmethod
    def _utterance_hit(
        postings: Sequence[SearchPosting], query: Query, weights: dict[str, float]
    ) -> Optional[Hit]:
        tf: dict[str, int] = {}
        anchor: Optional[SearchPosting] = None
        wanted = set(query.terms)
        for p in sorted(postings, key=lambda p: p.word_index):
            if p.term in wanted:
                tf[p.term] = tf.get(p.term, 0) + 1
                if anchor is None:
                    anchor = p
        if len(tf) < len(wanted) or anchor is None:
            return None
        if query.speaker is not None and anchor.speaker != query.speaker:
            return None
        if query.agenda_label is not None and anchor.agenda_label != query.agenda_label:
            return None
        score = sum(count * weights[term] for term, count in tf.items())
        ordered = sorted(postings, key=lambda p: p.word_index)
        pos = next(i for i, p in enumerate(ordered) if p.word_index == anchor.word_index)
        lo = max(0, pos - SNIPPET_RADIUS)
        hi = min(len(ordered), pos + SNIPPET_RADIUS + 1)
        snippet = " ".join(p.token for p in ordered[lo:hi])
        return Hit(
            meeting_id=anchor.meeting_id,
            channel=anchor.channel,
            language=anchor.language,
            timestamp_s=anchor.timestamp_s,
            snippet=snippet,
            score=score,
            speaker=anchor.speaker,
            agenda_label=anchor.agenda_label,
        )
