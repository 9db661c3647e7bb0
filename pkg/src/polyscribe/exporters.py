"""Serialize per-language documents to JSON, HTML, and minimal Docx.

All three formats carry the same rows in the same (timestamp) order; JSON
keeps millisecond timestamps and round-trips losslessly, the human formats
render hh:mm:ss. Docx output is a three-part OOXML package written with
frozen ZIP metadata so identical input gives identical bytes.
"""

from __future__ import annotations

import html
import io
import json
import zipfile
import xml.etree.ElementTree as ET
from typing import Optional, Sequence

from .model import (
    AgendaItem,
    MeetingManifest,
    ValidationReport,
    manifest_to_dict,
)
from .routing import ViewDocument, ViewRow

EXPORT_FORMATS = ("json", "html", "docx")

#: Fixed ZIP entry timestamp: determinism beats provenance for these artifacts.
_ZIP_DATE = (1980, 1, 1, 0, 0, 0)

DOCX_PARTS = ("[Content_Types].xml", "_rels/.rels", "word/document.xml")


def format_timestamp(t: Optional[float]) -> str:
    """hh:mm:ss, floored to the second."""
    if t is None:
        return "--:--:--"
    total = int(t)
    return f"{total // 3600:02d}:{(total % 3600) // 60:02d}:{total % 60:02d}"


def select_primary_document(docs: Sequence[ViewDocument]) -> Optional[ViewDocument]:
    """The document a reader means by 'the <lang> transcript'.

    Native booth transcript when the booth exists; otherwise the translation
    out of the EN booth; otherwise the floor artifact; otherwise whatever
    translation is first in view order.
    """
    by_kind = [d for d in docs if d.kind == "transcript"]
    if by_kind:
        return by_kind[0]
    translations = [d for d in docs if d.kind == "translation"]
    for pick in ("booth-EN", "floor"):
        for d in translations:
            if d.source_channel == pick:
                return d
    return translations[0] if translations else None


def export_view(doc: ViewDocument, manifest: Optional[MeetingManifest], fmt: str) -> bytes:
    if fmt == "json":
        return export_json(doc, manifest)
    if fmt == "html":
        return export_html(doc, manifest)
    if fmt == "docx":
        return export_docx(doc, manifest)
    raise ValueError(f"unknown export format: {fmt!r} (expected one of {EXPORT_FORMATS})")


# --- JSON -------------------------------------------------------------------


def _row_dict(row: ViewRow) -> dict:
    return {
        "start_s": row.start_s,
        "end_s": row.end_s,
        "speaker": row.speaker,
        "text": row.text,
        "origin": row.origin,
    }


def export_json(doc: ViewDocument, manifest: Optional[MeetingManifest]) -> bytes:
    payload = {
        "meeting_id": doc.meeting_id,
        "language": doc.language,
        "source_channel": doc.source_channel,
        "kind": doc.kind,
        "rows": [_row_dict(r) for r in doc.rows],
    }
    if doc.error is not None:
        payload["error"] = doc.error
    if manifest is not None:
        payload["manifest"] = manifest_to_dict(manifest)
    return (json.dumps(payload, ensure_ascii=False, indent=2) + "\n").encode("utf-8")


def parse_json_export(data: bytes) -> ViewDocument:
    """Inverse of export_json (the manifest block is advisory, not part of the view)."""
    payload = json.loads(data.decode("utf-8"))
    rows = tuple(
        ViewRow(
            start_s=r["start_s"],
            end_s=r["end_s"],
            speaker=r["speaker"],
            text=r["text"],
            origin=r["origin"],
        )
        for r in payload["rows"]
    )
    return ViewDocument(
        meeting_id=payload["meeting_id"],
        language=payload["language"],
        source_channel=payload["source_channel"],
        kind=payload["kind"],
        rows=rows,
        error=payload.get("error"),
    )


# --- shared sectioning -------------------------------------------------


def _sectioned(
    rows: Sequence[ViewRow], manifest: Optional[MeetingManifest]
) -> list[tuple[Optional[AgendaItem], list[ViewRow]]]:
    """Merge agenda headings into the row stream by start time.

    Every agenda item yields a section (possibly empty); rows keep global
    timestamp order; rows before the first item go in an untitled section.
    """
    agenda = list(manifest.agenda) if manifest is not None else []
    sections: list[tuple[Optional[AgendaItem], list[ViewRow]]] = [(None, [])]
    pending = agenda[:]
    for row in rows:
        t = row.start_s if row.start_s is not None else float("inf")
        while pending and pending[0].start_s <= t:
            sections.append((pending.pop(0), []))
        sections[-1][1].append(row)
    for item in pending:
        sections.append((item, []))
    if not sections[0][1]:
        sections.pop(0)
    return sections


def _title(doc: ViewDocument, manifest: Optional[MeetingManifest]) -> str:
    base = manifest.title if manifest is not None else doc.meeting_id
    return f"{base} — {doc.language}"


# --- HTML -------------------------------------------------------------------


def export_html(doc: ViewDocument, manifest: Optional[MeetingManifest]) -> bytes:
    esc = html.escape
    out = [
        "<!DOCTYPE html>",
        f'<html lang="{doc.language.lower()}">',
        "<head>",
        '<meta charset="utf-8">',
        f"<title>{esc(_title(doc, manifest))}</title>",
        "</head>",
        "<body>",
        '<main role="main">',
        f"<h1>{esc(_title(doc, manifest))}</h1>",
    ]
    for item, rows in _sectioned(doc.rows, manifest):
        label = item.label if item is not None else "Proceedings"
        out.append(f'<section aria-label="{esc(label)}">')
        if item is not None:
            out.append(f"<h2>{esc(item.label)}</h2>")
        speaker = None
        for row in rows:
            if row.speaker and row.speaker != speaker:
                speaker = row.speaker
                out.append(f"<h3>{esc(speaker)}</h3>")
            stamp = format_timestamp(row.start_s)
            out.append(f"<p><time>{stamp}</time> {esc(row.text)}</p>")
        out.append("</section>")
    out.extend(["</main>", "</body>", "</html>", ""])
    return "\n".join(out).encode("utf-8")


# --- Docx -------------------------------------------------------------------

_W = "http://schemas.openxmlformats.org/wordprocessingml/2006/main"

_CONTENT_TYPES = (
    '<?xml version="1.0" encoding="UTF-8" standalone="yes"?>\n'
    '<Types xmlns="http://schemas.openxmlformats.org/package/2006/content-types">'
    '<Default Extension="rels" ContentType="application/vnd.openxmlformats-package.relationships+xml"/>'
    '<Default Extension="xml" ContentType="application/xml"/>'
    '<Override PartName="/word/document.xml" '
    'ContentType="application/vnd.openxmlformats-officedocument.wordprocessingml.document.main+xml"/>'
    "</Types>"
)

_RELS = (
    '<?xml version="1.0" encoding="UTF-8" standalone="yes"?>\n'
    '<Relationships xmlns="http://schemas.openxmlformats.org/package/2006/relationships">'
    '<Relationship Id="rId1" '
    'Type="http://schemas.openxmlformats.org/officeDocument/2006/relationships/officeDocument" '
    'Target="word/document.xml"/>'
    "</Relationships>"
)


def _w_escape(text: str) -> str:
    return (
        text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
    )


def _w_paragraph(text: str, style: Optional[str] = None) -> str:
    ppr = f'<w:pPr><w:pStyle w:val="{style}"/></w:pPr>' if style else ""
    return f'<w:p>{ppr}<w:r><w:t xml:space="preserve">{_w_escape(text)}</w:t></w:r></w:p>'


def _document_xml(doc: ViewDocument, manifest: Optional[MeetingManifest]) -> str:
    body = [_w_paragraph(_title(doc, manifest), style="Title")]
    for item, rows in _sectioned(doc.rows, manifest):
        if item is not None:
            body.append(_w_paragraph(item.label, style="Heading1"))
        for row in rows:
            stamp = format_timestamp(row.start_s)
            prefix = f"[{stamp}] {row.speaker}:" if row.speaker else f"[{stamp}]"
            body.append(_w_paragraph(f"{prefix} {row.text}"))
    return (
        '<?xml version="1.0" encoding="UTF-8" standalone="yes"?>\n'
        f'<w:document xmlns:w="{_W}"><w:body>' + "".join(body) + "</w:body></w:document>"
    )


def export_docx(doc: ViewDocument, manifest: Optional[MeetingManifest]) -> bytes:
    parts = {
        "[Content_Types].xml": _CONTENT_TYPES,
        "_rels/.rels": _RELS,
        "word/document.xml": _document_xml(doc, manifest),
    }
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w", zipfile.ZIP_DEFLATED) as zf:
        for name in DOCX_PARTS:
            info = zipfile.ZipInfo(name, date_time=_ZIP_DATE)
            info.compress_type = zipfile.ZIP_DEFLATED
            info.external_attr = 0o644 << 16
            zf.writestr(info, parts[name])
    return buf.getvalue()


def validate_docx(data: bytes) -> ValidationReport:
    """ZIP integrity, exactly the three required parts, well-formed XML in each."""
    report = ValidationReport()
    try:
        zf = zipfile.ZipFile(io.BytesIO(data))
    except zipfile.BadZipFile:
        report.add("ZIP corrupt")
        return report
    with zf:
        bad = zf.testzip()
        if bad is not None:
            report.add(f"ZIP corrupt: bad entry {bad}")
            return report
        names = zf.namelist()
        for part in DOCX_PARTS:
            if part not in names:
                report.add(f"missing part: {part}")
        for extra in names:
            if extra not in DOCX_PARTS:
                report.add(f"unexpected part: {extra}")
        for part in DOCX_PARTS:
            if part in names:
                try:
                    ET.fromstring(zf.read(part))
                except ET.ParseError as exc:
                    report.add(f"malformed XML in {part}: {exc}")
    return report


def export_filename(meeting_id: str, language: str, fmt: str) -> str:
    return f"{meeting_id}.{language}.{fmt}"
