"""Manifest ingestion from the conference system.

Parses manifest JSON, enforces the meeting-title convention, flags duplicate
titles, and keeps metadata fresh by polling a version-carrying source
endpoint. Manifests are immutable; apply_delta is the only mutation path and
every accepted delta bumps the local version by exactly one.
"""

from __future__ import annotations

import hashlib
import json
import logging
import re
import threading
from dataclasses import dataclass
from datetime import date
from typing import Callable, Optional

from .model import (
    AgendaItem,
    DocumentRef,
    MeetingManifest,
    SpeakerTurn,
    fold_diacritics,
    manifest_to_dict,
    round_ms,
    validate_manifest,
)

log = logging.getLogger(__name__)


class ManifestParseError(ValueError):
    def __init__(self, message: str, field_path: str = ""):
        super().__init__(message)
        self.field_path = field_path


class DeltaConflict(RuntimeError):
    """The delta was computed against a version that is no longer current."""


# --- parsing ---------------------------------------------------------------


def _require(obj: dict, key: str, path: str = "") -> object:
    if key not in obj or obj[key] in (None, ""):
        where = f"{path}.{key}" if path else key
        raise ManifestParseError(f"missing {where}", where)
    return obj[key]


def _time(obj: dict, key: str, path: str, required: bool = True) -> Optional[float]:
    if key not in obj or obj[key] is None:
        if required:
            raise ManifestParseError(f"missing {path}.{key}", f"{path}.{key}")
        return None
    try:
        return round_ms(float(obj[key]))
    except (TypeError, ValueError):
        raise ManifestParseError(f"non-numeric {path}.{key}", f"{path}.{key}") from None


def parse_manifest(document: str | dict) -> MeetingManifest:
    """JSON text (or already-decoded object) to a validated manifest.

    Times are quantized to milliseconds on the way in so every downstream
    artifact agrees on timestamps.
    """
    if isinstance(document, str):
        try:
            raw = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ManifestParseError(f"malformed JSON: {exc}") from exc
    else:
        raw = document
    if not isinstance(raw, dict):
        raise ManifestParseError("manifest must be a JSON object")

    meeting_id = str(_require(raw, "meeting_id"))
    title = str(_require(raw, "title"))

    agenda = []
    for i, item in enumerate(raw.get("agenda", []) or []):
        path = f"agenda[{i}]"
        agenda.append(
            AgendaItem(
                label=str(_require(item, "label", path)),
                start_s=_time(item, "start_s", path),
                end_s=_time(item, "end_s", path, required=False),
            )
        )
    speakers = []
    for i, turn in enumerate(raw.get("speakers", []) or []):
        path = f"speakers[{i}]"
        speakers.append(
            SpeakerTurn(
                name=str(_require(turn, "name", path)),
                affiliation=str(turn.get("affiliation", "")),
                start_s=_time(turn, "start_s", path),
                end_s=_time(turn, "end_s", path),
                biography=turn.get("biography"),
                flag_ref=turn.get("flag_ref"),
            )
        )
    documents = []
    for i, doc in enumerate(raw.get("documents", []) or []):
        path = f"documents[{i}]"
        documents.append(
            DocumentRef(
                code=str(_require(doc, "code", path)),
                title=str(_require(doc, "title", path)),
            )
        )

    manifest = MeetingManifest(
        meeting_id=meeting_id,
        title=title,
        category=str(raw.get("category", "")),
        agenda=tuple(agenda),
        speakers=tuple(speakers),
        documents=tuple(documents),
        version=int(raw.get("version", 0)),
        confidential=bool(raw.get("confidential", False)),
    )
    report = validate_manifest(manifest)
    if not report.ok:
        raise ManifestParseError("; ".join(report.violations))
    return manifest


# --- title convention --------------------------------------------------


#: "{ORG}/{BODY}/{YYYY-MM-DD}/Session-{n}", ORG and BODY uppercase alphanumerics.
TITLE_PATTERN = re.compile(r"^([A-Z0-9]+)/([A-Z0-9]+)/(\d{4}-\d{2}-\d{2})/Session-([1-9]\d*)$")


def duplicate_key(title: str) -> str:
    """Lowercased, whitespace-collapsed, diacritics-folded collision key."""
    folded = fold_diacritics(title).casefold()
    return " ".join(folded.split())


@dataclass(frozen=True)
class TitleCheck:
    ok: bool
    violations: tuple[str, ...]
    duplicate_key: str


def validate_meeting_title(title: str) -> TitleCheck:
    violations: list[str] = []
    if not title.strip():
        violations.append("empty title")
    else:
        m = TITLE_PATTERN.match(title)
        if m is None:
            violations.append(
                "title does not match {ORG}/{BODY}/{YYYY-MM-DD}/Session-{n}"
            )
        else:
            try:
                date.fromisoformat(m.group(3))
            except ValueError:
                violations.append(f"title date {m.group(3)!r} is not a calendar date")
    return TitleCheck(not violations, tuple(violations), duplicate_key(title))


class DuplicateRegistry:
    """Flags meetings whose titles collapse to the same duplicate key.

    Collisions are reported, never auto-resolved; deciding which entry is
    the real one is an operator call.
    """

    def __init__(self) -> None:
        self._by_key: dict[str, str] = {}
        self._lock = threading.Lock()

    def register(self, meeting_id: str, title: str) -> Optional[str]:
        """Returns the meeting id this title collides with, if any."""
        key = duplicate_key(title)
        with self._lock:
            other = self._by_key.get(key)
            if other is not None and other != meeting_id:
                return other
            self._by_key[key] = meeting_id
            return None


# --- deltas and polling -----------------------------------------------

#: Fields a delta may replace. Identity (meeting_id) and version are not
#: payload; category/confidential ride along with full-manifest diffs.
DELTA_FIELDS = ("title", "agenda", "speakers", "documents")


@dataclass(frozen=True)
class MetadataDelta:
    base_version: int
    title: Optional[str] = None
    agenda: Optional[tuple[AgendaItem, ...]] = None
    speakers: Optional[tuple[SpeakerTurn, ...]] = None
    documents: Optional[tuple[DocumentRef, ...]] = None

    def changed_fields(self) -> dict[str, object]:
        out = {}
        for name in DELTA_FIELDS:
            value = getattr(self, name)
            if value is not None:
                out[name] = value
        return out


def diff_manifest(local: MeetingManifest, remote: MeetingManifest) -> Optional[MetadataDelta]:
    """Full-manifest diff; None when nothing in the delta fields changed."""
    changes: dict[str, object] = {}
    for name in DELTA_FIELDS:
        if getattr(local, name) != getattr(remote, name):
            changes[name] = getattr(remote, name)
    if not changes:
        return None
    return MetadataDelta(base_version=local.version, **changes)


def apply_delta(manifest: MeetingManifest, delta: MetadataDelta) -> MeetingManifest:
    """Replacement-field application; version moves by exactly one.

    A delta that changes nothing returns the manifest as-is, same version.
    """
    if delta.base_version != manifest.version:
        raise DeltaConflict(
            f"conflict: delta base {delta.base_version} != manifest version {manifest.version}"
        )
    changes = delta.changed_fields()
    if all(getattr(manifest, name) == value for name, value in changes.items()):
        return manifest
    updated = MeetingManifest(
        meeting_id=manifest.meeting_id,
        title=changes.get("title", manifest.title),
        category=manifest.category,
        agenda=changes.get("agenda", manifest.agenda),
        speakers=changes.get("speakers", manifest.speakers),
        documents=changes.get("documents", manifest.documents),
        version=manifest.version + 1,
        confidential=manifest.confidential,
    )
    report = validate_manifest(updated)
    if not report.ok:
        raise ManifestParseError("; ".join(report.violations))
    return updated


class ManifestPoller:
    """One poller per meeting; checks the source endpoint for newer versions.

    Remote versions must move forward: a decrease is rejected with a warning
    (the source rolled back or restarted) and transient fetch errors are
    logged and retried on the next tick, never fatal. The poller keeps the
    full accepted-manifest history for audit.
    """

    def __init__(
        self,
        manifest: MeetingManifest,
        fetch: Callable[[str], dict],
        interval_s: float = 30.0,
    ) -> None:
        self.manifest = manifest
        self.fetch = fetch
        self.interval_s = interval_s
        self.last_remote_version = manifest.version
        self.history: list[MeetingManifest] = [manifest]
        self.deltas: list[MetadataDelta] = []
        self.warnings: list[str] = []
        self.closed = False
        self._lock = threading.Lock()

    def _warn(self, message: str) -> None:
        log.warning("%s: %s", self.manifest.meeting_id, message)
        self.warnings.append(message)

    def poll_once(self) -> Optional[MetadataDelta]:
        try:
            raw = self.fetch(self.manifest.meeting_id)
        except Exception as exc:  # noqa: BLE001 - poller must survive anything the source throws
            self._warn(f"poll failed, will retry: {exc}")
            return None
        with self._lock:
            if raw.get("closed"):
                self.closed = True
                return None
            try:
                remote_version = int(raw["version"])
            except (KeyError, TypeError, ValueError):
                self._warn("source response carries no usable version")
                return None
            if remote_version < self.last_remote_version:
                self._warn(
                    f"remote version went backwards ({self.last_remote_version} -> {remote_version}); rejected"
                )
                return None
            if remote_version == self.last_remote_version:
                return None
            try:
                remote = parse_manifest(raw)
            except ManifestParseError as exc:
                self._warn(f"rejected unparseable update: {exc}")
                return None
            self.last_remote_version = remote_version
            delta = diff_manifest(self.manifest, remote)
            if delta is None:
                return None
            self.manifest = apply_delta(self.manifest, delta)
            self.history.append(self.manifest)
            self.deltas.append(delta)
            return delta

    def run(self, cancel: threading.Event) -> None:
        while not cancel.is_set() and not self.closed:
            self.poll_once()
            cancel.wait(self.interval_s)

    def snapshot(self) -> MeetingManifest:
        with self._lock:
            return self.manifest


def manifest_fingerprint(manifest: MeetingManifest) -> str:
    """Stable digest of the canonical JSON form (audit/journal use)."""
    blob = json.dumps(manifest_to_dict(manifest), ensure_ascii=False, sort_keys=True)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()
