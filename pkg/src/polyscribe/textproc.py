"""Tokenization, casing-tag encoding, foreign-language tagging, and
hypothesis normalization.

Recognition hypotheses travel through the pipeline as tagged token streams;
this module owns the tag scheme and the normalization into display text.
"""

from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Optional, Sequence

from .model import UNK, Language, Utterance


@lru_cache(maxsize=None)
def _lang_open_re(fmt: str) -> re.Pattern:
    pre, _, post = fmt.partition("{}")
    return re.compile(re.escape(pre) + r"[A-Z]{2,5}" + re.escape(post))


@dataclass(frozen=True)
class TagScheme:
    cap_tag: str = "⟨cap⟩"            # ⟨cap⟩
    allcaps_tag: str = "⟨allcaps⟩"    # ⟨allcaps⟩
    lang_open_fmt: str = "⟨lang:{}⟩"  # ⟨lang:XX⟩
    lang_close: str = "⟨/lang⟩"       # ⟨/lang⟩

    def lang_open(self, code: str) -> str:
        return self.lang_open_fmt.format(code)

    def is_lang_open(self, token: str) -> bool:
        return bool(_lang_open_re(self.lang_open_fmt).fullmatch(token))

    def is_reserved(self, token: str) -> bool:
        return token in (self.cap_tag, self.allcaps_tag, self.lang_close) or self.is_lang_open(token)


DEFAULT_TAGS = TagScheme()


class MalformedTagStream(ValueError):
    pass


def _is_punct(c: str) -> bool:
    return unicodedata.category(c).startswith("P")


_CLOSERS = set(",.;:!?…%")
_OPENERS = set("¿¡")


def _attaches_left(token: str) -> bool:
    if token in _CLOSERS:
        return True
    return len(token) == 1 and unicodedata.category(token) in ("Pe", "Pf")


def _attaches_right(token: str) -> bool:
    if token in _OPENERS:
        return True
    return len(token) == 1 and unicodedata.category(token) in ("Ps", "Pi")


def tokenize(text: str, lang: Optional[Language] = None) -> list[str]:
    """Split text into tokens: whitespace-delimited, edge punctuation split
    off as its own tokens. Chinese is split per character."""
    if lang == Language.ZH:
        return [c for c in text if not c.isspace()]
    tokens: list[str] = []
    for chunk in text.split():
        lead: list[str] = []
        trail: list[str] = []
        while chunk and _is_punct(chunk[0]):
            lead.append(chunk[0])
            chunk = chunk[1:]
        while chunk and _is_punct(chunk[-1]):
            trail.append(chunk[-1])
            chunk = chunk[:-1]
        tokens.extend(lead)
        if chunk:
            tokens.append(chunk)
        tokens.extend(reversed(trail))
    return tokens


def detokenize(tokens: Sequence[str], lang: Optional[Language] = None) -> str:
    """Inverse of tokenize up to canonical single spacing."""
    if lang == Language.ZH:
        return "".join(tokens)
    parts: list[str] = []
    glue_next = False
    for tok in tokens:
        if not parts:
            parts.append(tok)
        elif glue_next or _attaches_left(tok):
            parts[-1] += tok
        else:
            parts.append(tok)
        glue_next = _attaches_right(tok)
    return " ".join(parts)


def _letter_count(token: str) -> int:
    return sum(1 for c in token if c.isalpha())


def encode_casing(tokens: Sequence[str], tags: TagScheme = DEFAULT_TAGS) -> list[str]:
    """Replace cased tokens with a tag + lowercase form.

    Title-case becomes [cap, lower]; all-caps of two or more letters becomes
    [allcaps, lower]. Tokens whose casing cannot be restored losslessly
    (mixed case like "iPhone") pass through unchanged.
    """
    out: list[str] = []
    for tok in tokens:
        if tags.is_reserved(tok):
            raise ValueError(f"input contains reserved tag token {tok!r}")
        lower = tok.lower()
        if tok == lower:
            out.append(tok)
        elif _letter_count(tok) >= 2 and lower.upper() == tok:
            out.extend((tags.allcaps_tag, lower))
        elif lower.capitalize() == tok:
            out.extend((tags.cap_tag, lower))
        else:
            out.append(tok)
    return out


def decode_casing(tokens: Sequence[str], tags: TagScheme = DEFAULT_TAGS) -> list[str]:
    """Exact inverse of encode_casing on its image."""
    out: list[str] = []
    pending: Optional[str] = None
    for tok in tokens:
        if tok in (tags.cap_tag, tags.allcaps_tag):
            if pending is not None:
                raise MalformedTagStream("casing tag followed by another tag")
            pending = tok
            continue
        if pending == tags.cap_tag:
            out.append(tok.capitalize())
        elif pending == tags.allcaps_tag:
            out.append(tok.upper())
        else:
            out.append(tok)
        pending = None
    if pending is not None:
        raise MalformedTagStream("malformed tag stream: dangling casing tag")
    return out


def tag_foreign(
    utterances: Sequence[Utterance],
    channel_lang: Language,
    lid,
    tags: TagScheme = DEFAULT_TAGS,
) -> list[list[str]]:
    """Wrap utterances whose detected language differs from the channel in
    ⟨lang:XX⟩ … ⟨/lang⟩ markers; returns one tagged token stream per utterance.
    """
    streams: list[list[str]] = []
    for utt in utterances:
        tokens = utt.tokens
        detected = lid.identify(detokenize(tokens, utt.language))
        code = detected.value if isinstance(detected, Language) else str(detected or UNK)
        if code == channel_lang.value:
            streams.append(list(tokens))
        else:
            streams.append([tags.lang_open(code), *tokens, tags.lang_close])
    return streams


@dataclass(frozen=True)
class NormalizePolicy:
    keep_foreign_text: bool = True
    language: Optional[Language] = None  # ZH joins without spaces


def normalize_hypothesis(
    raw: str | Sequence[str],
    policy: NormalizePolicy = NormalizePolicy(),
    tags: TagScheme = DEFAULT_TAGS,
) -> str:
    """Turn a tagged token stream into display text.

    Decodes casing tags, strips foreign-span markers (keeping or dropping
    the span per policy), and collapses whitespace.
    """
    tokens = raw.split() if isinstance(raw, str) else [t for t in raw if t]

    kept: list[str] = []
    in_foreign = False
    for tok in tokens:
        if tags.is_lang_open(tok):
            in_foreign = True
            continue
        if tok == tags.lang_close:
            in_foreign = False
            continue
        if in_foreign and not policy.keep_foreign_text:
            continue
        kept.append(tok)

    decoded = decode_casing(kept, tags)
    if policy.language == Language.ZH:
        return "".join(decoded)
    return " ".join(decoded)
