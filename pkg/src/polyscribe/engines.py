"""Speech-to-text, translation, and language-id engine seams.

Production engines sit behind HTTP; the bundled reference engines are
deterministic stand-ins (sidecar transcripts, marker translation, script and
stopword language id) used by the pipeline tests and the evaluation tools.
"""

from __future__ import annotations

import base64
import json
import time
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import httpx

from .model import AudioClip, Segment, WordTiming, UNK


class EngineError(RuntimeError):
    """Base class for engine failures that the caller may handle."""


class EngineTimeout(EngineError):
    pass


class EngineUnavailable(EngineError):
    pass


class EngineSchemaError(EngineError):
    """The engine answered, but not in the agreed wire format."""


@dataclass(frozen=True)
class Hypothesis:
    """Raw engine output for one segment, before normalization."""

    tokens: tuple[str, ...]
    words: Optional[tuple[WordTiming, ...]] = None
    engine_id: str = ""
    no_reference: bool = False

    @property
    def text(self) -> str:
        return " ".join(self.tokens)


class S2TEngine(ABC):
    engine_id: str = "s2t"

    @abstractmethod
    def transcribe(self, segment: Segment, clip: Optional[AudioClip], lang: str) -> Hypothesis:
        """lang is a channel language code or MULTI for the floor."""


class MTEngine(ABC):
    engine_id: str = "mt"

    @abstractmethod
    def translate(self, text: str, src: str, tgt: str) -> str:
        ...


class LIDEngine(ABC):
    engine_id: str = "lid"

    @abstractmethod
    def identify(self, text: str) -> str:
        """Returns a language code or UNK."""


# --- reference engines -------------------------------------------------


def _uniform_words(tokens: Sequence[str], start_s: float, end_s: float) -> tuple[WordTiming, ...]:
    n = len(tokens)
    span = (end_s - start_s) / n
    return tuple(
        WordTiming(tok, start_s + i * span, start_s + (i + 1) * span)
        for i, tok in enumerate(tokens)
    )


class SidecarS2T(S2TEngine):
    """Replays transcripts from a JSON map of segment_id to tagged text.

    Segments without an entry come back empty and flagged, so the pipeline
    records a gap instead of fabricating speech.
    """

    def __init__(self, fixture: dict[str, str] | str | Path, engine_id: str = "sidecar"):
        if isinstance(fixture, (str, Path)):
            try:
                with open(fixture, encoding="utf-8") as fh:
                    fixture = json.load(fh)
            except (OSError, json.JSONDecodeError) as exc:
                raise EngineError(f"unreadable sidecar fixture: {exc}") from exc
        if not isinstance(fixture, dict) or not all(
            isinstance(k, str) and isinstance(v, str) for k, v in fixture.items()
        ):
            raise EngineError("sidecar fixture must map segment ids to text")
        self._map = dict(fixture)
        self.engine_id = engine_id

    def transcribe(self, segment: Segment, clip: Optional[AudioClip], lang: str) -> Hypothesis:
        text = self._map.get(segment.segment_id)
        if text is None:
            return Hypothesis((), engine_id=self.engine_id, no_reference=True)
        tokens = tuple(text.split())
        if not tokens:
            return Hypothesis((), engine_id=self.engine_id)
        words = _uniform_words(tokens, segment.start_s, segment.end_s)
        return Hypothesis(tokens, words, engine_id=self.engine_id)


class MarkerMT(MTEngine):
    """Prefixes text with a visible route marker instead of translating.

    Keeps every test assertion about routing checkable by eye while staying
    deterministic. Identity when source and target coincide.
    """

    engine_id = "marker-mt"

    def translate(self, text: str, src: str, tgt: str) -> str:
        if src == tgt:
            return text
        return f"⟪{src}→{tgt}⟫ {text}"


# Stopword inventories for the Latin-script languages the floor can carry.
# Short, high-frequency, language-exclusive where possible.
_STOPWORDS: dict[str, frozenset[str]] = {
    "EN": frozenset(
        "the of and to in is that it for on with as was at by an be this are or from".split()
    ),
    "FR": frozenset(
        "le la les des une du et est dans que pour sur avec au aux ce cette qui ne pas".split()
    ),
    "ES": frozenset(
        "el los las una del y es en que por con para como más pero sus este esta lo".split()
    ),
    "PT": frozenset(
        "o os um uma do da dos das e é em não que por com para como mais seu sua isso".split()
    ),
}

_LATIN_ORDER = ("EN", "FR", "ES", "PT")


def _script_vote(text: str) -> Optional[str]:
    cjk = arabic = cyrillic = letters = 0
    for ch in text:
        cp = ord(ch)
        if 0x4E00 <= cp <= 0x9FFF or 0x3400 <= cp <= 0x4DBF or 0x3000 <= cp <= 0x303F:
            cjk += 1
            letters += 1
        elif 0x0600 <= cp <= 0x06FF or 0x0750 <= cp <= 0x077F:
            arabic += 1
            letters += 1
        elif 0x0400 <= cp <= 0x04FF:
            cyrillic += 1
            letters += 1
        elif ch.isalpha():
            letters += 1
    if letters == 0:
        return UNK
    if cjk / letters > 0.5:
        return "ZH"
    if arabic / letters > 0.5:
        return "AR"
    if cyrillic / letters > 0.5:
        return "RU"
    return None


class HeuristicLID(LIDEngine):
    """Script ranges decide ZH/AR/RU; stopword ratios split the Latin rest.

    Below the confidence floor the answer is UNK rather than a guess.
    """

    engine_id = "heuristic-lid"

    def __init__(self, floor: float = 0.1):
        self.floor = floor

    def identify(self, text: str) -> str:
        vote = _script_vote(text)
        if vote is not None:
            return vote
        tokens = [t for t in text.lower().split() if t]
        words = []
        for t in tokens:
            words.append(t.strip(".,;:!?…¿¡()\"'«»"))
        words = [w for w in words if w]
        if not words:
            return UNK
        best, best_ratio = UNK, self.floor
        for code in _LATIN_ORDER:
            hits = sum(1 for w in words if w in _STOPWORDS[code])
            ratio = hits / len(words)
            if ratio > best_ratio:
                best, best_ratio = code, ratio
        return best


# --- HTTP engines ------------------------------------------------------


@dataclass
class HttpEngineConfig:
    endpoint_url: str
    timeout_ms: int = 10_000
    max_retries: int = 2
    backoff_s: float = 0.25


def http_engine_call(
    client: httpx.Client,
    url: str,
    payload: dict,
    config: HttpEngineConfig,
) -> dict:
    """POST with bounded retries.

    Server errors and timeouts retry with exponential backoff; client errors
    fail immediately because retrying the same bad request cannot help.
    """
    attempts = config.max_retries + 1
    last: Exception | None = None
    for attempt in range(attempts):
        try:
            resp = client.post(url, json=payload, timeout=config.timeout_ms / 1000.0)
        except httpx.TimeoutException as exc:
            last = EngineTimeout(f"engine timed out: {url}")
            last.__cause__ = exc
        except httpx.TransportError as exc:
            last = EngineUnavailable(f"engine unreachable: {url}")
            last.__cause__ = exc
        else:
            if resp.status_code >= 500:
                last = EngineUnavailable(f"engine error {resp.status_code}: {url}")
            elif resp.status_code >= 400:
                raise EngineError(f"engine rejected request ({resp.status_code}): {url}")
            else:
                try:
                    body = resp.json()
                except (json.JSONDecodeError, ValueError) as exc:
                    raise EngineSchemaError(f"engine returned non-JSON body: {url}") from exc
                if not isinstance(body, dict):
                    raise EngineSchemaError(f"engine returned non-object body: {url}")
                return body
        if attempt + 1 < attempts:
            time.sleep(config.backoff_s * (2**attempt))
    assert last is not None
    raise last


class HttpS2TEngine(S2TEngine):
    def __init__(self, config: HttpEngineConfig, engine_id: str = "http-s2t", client: Optional[httpx.Client] = None):
        self.config = config
        self.engine_id = engine_id
        self._client = client or httpx.Client()

    def transcribe(self, segment: Segment, clip: Optional[AudioClip], lang: str) -> Hypothesis:
        audio_b64 = ""
        if clip is not None:
            sliced = clip.slice_seconds(segment.start_s, segment.end_s)
            audio_b64 = base64.b64encode(sliced.samples.tobytes()).decode("ascii")
        payload = {"segment_id": segment.segment_id, "audio_b64": audio_b64, "lang": lang}
        body = http_engine_call(self._client, self.config.endpoint_url, payload, self.config)
        if "text" not in body or not isinstance(body["text"], str):
            raise EngineSchemaError("transcribe response missing text")
        tokens = tuple(body["text"].split())
        words: Optional[tuple[WordTiming, ...]] = None
        if "words" in body and body["words"] is not None:
            raw = body["words"]
            if not isinstance(raw, list):
                raise EngineSchemaError("transcribe response words must be a list")
            try:
                words = tuple(
                    WordTiming(str(w["token"]), float(w["start_s"]), float(w["end_s"]))
                    for w in raw
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise EngineSchemaError(f"malformed word timing: {exc}") from exc
        return Hypothesis(tokens, words, engine_id=self.engine_id)


class HttpMTEngine(MTEngine):
    def __init__(self, config: HttpEngineConfig, engine_id: str = "http-mt", client: Optional[httpx.Client] = None):
        self.config = config
        self.engine_id = engine_id
        self._client = client or httpx.Client()

    def translate(self, text: str, src: str, tgt: str) -> str:
        if src == tgt:
            return text
        payload = {"text": text, "src": src, "tgt": tgt}
        body = http_engine_call(self._client, self.config.endpoint_url, payload, self.config)
        if "text" not in body or not isinstance(body["text"], str):
            raise EngineSchemaError("translate response missing text")
        return body["text"]


# --- registry -----------------------------------------------------------


@dataclass
class EngineRegistry:
    """Engines in play for one pipeline run, keyed by role."""

    s2t: S2TEngine
    mt: MTEngine
    lid: LIDEngine

    @classmethod
    def reference(cls, sidecar: dict[str, str] | str | Path) -> "EngineRegistry":
        return cls(s2t=SidecarS2T(sidecar), mt=MarkerMT(), lid=HeuristicLID())


def build_registry(entries: Sequence[dict]) -> EngineRegistry:
    """Builds a registry from config entries.

    Each entry: {"engine_id", "kind": "s2t"|"mt"|"lid",
                 "endpoint_url" or "fixture_path", "timeout_ms"?, "max_retries"?}
    """
    s2t: Optional[S2TEngine] = None
    mt: Optional[MTEngine] = None
    lid: Optional[LIDEngine] = None
    for entry in entries:
        kind = entry.get("kind")
        engine_id = entry.get("engine_id", kind or "engine")
        if kind == "s2t":
            if "fixture_path" in entry:
                s2t = SidecarS2T(entry["fixture_path"], engine_id=engine_id)
            else:
                s2t = HttpS2TEngine(_http_config(entry), engine_id=engine_id)
        elif kind == "mt":
            if entry.get("endpoint_url"):
                mt = HttpMTEngine(_http_config(entry), engine_id=engine_id)
            else:
                mt = MarkerMT()
        elif kind == "lid":
            lid = HeuristicLID()
        else:
            raise ValueError(f"unknown engine kind: {kind!r}")
    # roles not configured fall back to the deterministic reference engines
    return EngineRegistry(
        s2t=s2t if s2t is not None else SidecarS2T({}),
        mt=mt if mt is not None else MarkerMT(),
        lid=lid if lid is not None else HeuristicLID(),
    )


def _http_config(entry: dict) -> HttpEngineConfig:
    return HttpEngineConfig(
        endpoint_url=entry["endpoint_url"],
        timeout_ms=int(entry.get("timeout_ms", 10_000)),
        max_retries=int(entry.get("max_retries", 2)),
        backoff_s=float(entry.get("backoff_s", 0.25)),
    )
