"""Word/character error rates with error decomposition, terminology-scoped
evaluation, human annotation aggregation, and benchmark report rendering.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .model import Language


@dataclass(frozen=True)
class ErrorCounts:
    substitutions: int
    deletions: int
    insertions: int
    ref_len: int
    flag: Optional[str] = None  # "empty-reference" | "no terms"

    @property
    def total(self) -> int:
        return self.substitutions + self.deletions + self.insertions

    @property
    def rate(self) -> Optional[float]:
        if self.flag == "no terms":
            return None
        if self.ref_len == 0:
            # empty ref + empty hyp is a perfect 0; otherwise count against
            # a unit reference and flag it
            return float(self.total)
        return self.total / self.ref_len


# alignment ops: 0=match, 1=substitution, 2=deletion, 3=insertion
MATCH, SUB, DEL, INS = 0, 1, 2, 3


def edit_alignment(ref: Sequence, hyp: Sequence) -> list[tuple[int, int, int]]:
    """One minimum-cost alignment as (op, ref_index, hyp_index) steps.

    Among cost ties the backtrace prefers match, then substitution, then
    insertion, then deletion, so a substitution is never reported as an
    insert+delete pair. Only the total is alignment-independent.
    """
    n, m = len(ref), len(hyp)
    dp = [list(range(m + 1))]
    for i in range(1, n + 1):
        prev = dp[i - 1]
        row = [i] + [0] * m
        ri = ref[i - 1]
        for j in range(1, m + 1):
            if ri == hyp[j - 1]:
                row[j] = prev[j - 1]
            else:
                best = prev[j - 1]
                if row[j - 1] < best:
                    best = row[j - 1]
                if prev[j] < best:
                    best = prev[j]
                row[j] = best + 1
        dp.append(row)

    steps: list[tuple[int, int, int]] = []
    i, j = n, m
    while i > 0 or j > 0:
        cost = dp[i][j]
        if i > 0 and j > 0 and ref[i - 1] == hyp[j - 1] and cost == dp[i - 1][j - 1]:
            steps.append((MATCH, i - 1, j - 1))
            i, j = i - 1, j - 1
        elif i > 0 and j > 0 and cost == dp[i - 1][j - 1] + 1:
            steps.append((SUB, i - 1, j - 1))
            i, j = i - 1, j - 1
        elif j > 0 and cost == dp[i][j - 1] + 1:
            steps.append((INS, i, j - 1))
            j -= 1
        else:
            steps.append((DEL, i - 1, j))
            i -= 1
    steps.reverse()
    return steps


def _counts_from_alignment(steps: Iterable[tuple[int, int, int]], ref_len: int, flag=None) -> ErrorCounts:
    s = d = ins = 0
    for op, _, _ in steps:
        if op == SUB:
            s += 1
        elif op == DEL:
            d += 1
        elif op == INS:
            ins += 1
    return ErrorCounts(s, d, ins, ref_len, flag)


def word_error_rate(ref: Sequence[str], hyp: Sequence[str]) -> ErrorCounts:
    """Minimum-edit-distance WER over token sequences."""
    ref, hyp = list(ref), list(hyp)
    if not ref:
        flag = None if not hyp else "empty-reference"
        return ErrorCounts(0, 0, len(hyp), 0, flag)
    return _counts_from_alignment(edit_alignment(ref, hyp), len(ref))


def char_error_rate(ref: str, hyp: str, lang: Optional[Language] = None) -> ErrorCounts:
    """CER: the same machinery over characters; whitespace excluded for ZH."""
    if lang == Language.ZH:
        ref = "".join(ref.split())
        hyp = "".join(hyp.split())
    return word_error_rate(list(ref), list(hyp))


def _term_spans(ref: Sequence[str], termlist: Iterable[str]) -> list[tuple[int, int]]:
    """Half-open index spans of each term occurrence in the reference."""
    spans: list[tuple[int, int]] = []
    lowered = [t.lower() for t in ref]
    for term in termlist:
        term_tokens = [t.lower() for t in term.split()]
        if not term_tokens:
            continue
        k = len(term_tokens)
        for i in range(len(ref) - k + 1):
            if lowered[i : i + k] == term_tokens:
                spans.append((i, i + k))
    return spans


def terminology_error_rate(
    ref: Sequence[str], hyp: Sequence[str], termlist: Iterable[str]
) -> ErrorCounts:
    """WER restricted to reference positions inside term occurrences.

    Insertions count when they land strictly inside a term span (they split
    the term). The reference length is the number of term tokens in ref.
    """
    termlist = list(termlist)
    if not termlist:
        raise ValueError("termlist must be non-empty")
    ref, hyp = list(ref), list(hyp)
    spans = _term_spans(ref, termlist)
    term_positions = {i for a, b in spans for i in range(a, b)}
    if not term_positions:
        return ErrorCounts(0, 0, 0, 0, "no terms")

    s = d = ins = 0
    for op, ri, _ in edit_alignment(ref, hyp):
        if op == SUB and ri in term_positions:
            s += 1
        elif op == DEL and ri in term_positions:
            d += 1
        elif op == INS and any(a < ri < b for a, b in spans):
            ins += 1
    return ErrorCounts(s, d, ins, len(term_positions))


# --- human annotation model ------------------------------------------------

DISRUPTIVE_CATEGORIES = (
    "nouns",
    "verbs",
    "proper names",
    "time",
    "places",
    "numbers",
    "other",
)


@dataclass(frozen=True)
class HumanAnnotation:
    utterance_ref: str
    span: str
    severity: str  # "minor" | "disruptive"
    category: str = "other"

    def __post_init__(self) -> None:
        if self.severity not in ("minor", "disruptive"):
            raise ValueError(f"severity must be minor or disruptive, got {self.severity!r}")
        if self.severity == "disruptive" and self.category not in DISRUPTIVE_CATEGORIES:
            raise ValueError(
                f"disruptive annotations need a category from {DISRUPTIVE_CATEGORIES}, got {self.category!r}"
            )


@dataclass(frozen=True)
class AnnotationSummary:
    total: int
    by_severity: dict
    by_category: dict
    disruptive_ratio: float


def aggregate_annotations(annotations: Sequence[HumanAnnotation]) -> AnnotationSummary:
    by_severity = Counter(a.severity for a in annotations)
    by_category = Counter(a.category for a in annotations)
    total = len(annotations)
    ratio = by_severity.get("disruptive", 0) / total if total else 0.0
    return AnnotationSummary(total, dict(by_severity), dict(by_category), ratio)


# --- benchmark report -------------------------------------------------------

#: Rendering order for the per-language benchmark rows.
REPORT_LANGUAGE_ORDER = ("EN", "FR", "ES", "ZH", "RU", "AR")


@dataclass(frozen=True)
class BenchmarkRow:
    language: str
    rates: dict  # system name -> rate
    examples: Optional[int] = None


def render_benchmark_report(rows: Sequence[BenchmarkRow]) -> str:
    """Fixed-width table of per-system rates, three decimals, languages in
    a fixed order; shows per-language example counts when any row has them.
    """
    systems: list[str] = []
    for row in rows:
        for name in row.rates:
            if name not in systems:
                systems.append(name)
    with_examples = any(row.examples is not None for row in rows)

    def order_key(row: BenchmarkRow) -> tuple[int, str]:
        try:
            return (REPORT_LANGUAGE_ORDER.index(row.language), row.language)
        except ValueError:
            return (len(REPORT_LANGUAGE_ORDER), row.language)

    ordered = sorted(rows, key=order_key)
    header = ["Language"] + systems + (["Examples"] if with_examples else [])
    table: list[list[str]] = [header]
    for row in ordered:
        cells = [row.language]
        cells += [
            f"{row.rates[name]:.3f}" if name in row.rates else "-" for name in systems
        ]
        if with_examples:
            cells.append(str(row.examples) if row.examples is not None else "-")
        table.append(cells)

    widths = [max(len(r[c]) for r in table) for c in range(len(header))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip() for r in table]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


# --- batch evaluation input -------------------------------------------------

def read_eval_tsv(path) -> list[tuple[str, str, str]]:
    """Rows of (segment_id, reference, hypothesis); blank lines skipped."""
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) < 2:
                raise ValueError(f"{path}:{line_no}: expected segment_id<TAB>ref<TAB>hyp")
            seg, ref = parts[0], parts[1]
            hyp = parts[2] if len(parts) > 2 else ""
            rows.append((seg, ref, hyp))
    return rows


def corpus_error_rate(
    pairs: Iterable[tuple[str, str]], unit: str = "word", lang: Optional[Language] = None
) -> ErrorCounts:
    """Pooled error counts over (ref, hyp) pairs."""
    s = d = i = n = 0
    for ref, hyp in pairs:
        if unit == "word":
            c = word_error_rate(ref.split(), hyp.split())
        else:
            c = char_error_rate(ref, hyp, lang)
        s, d, i, n = s + c.substitutions, d + c.deletions, i + c.insertions, n + c.ref_len
    return ErrorCounts(s, d, i, n)
