import io
import json
import zipfile
import xml.etree.ElementTree as ET

import pytest

from conftest import MANIFEST_DICT
from polyscribe.exporters import (
    DOCX_PARTS,
    export_docx,
    export_filename,
    export_html,
    export_json,
    export_view,
    format_timestamp,
    parse_json_export,
    select_primary_document,
    validate_docx,
)
from polyscribe.gateway import parse_manifest
from polyscribe.routing import ViewDocument, ViewRow


def _row(start, text, speaker=None, origin="native"):
    return ViewRow(start_s=start, end_s=start + 2.0, speaker=speaker, text=text, origin=origin)


def _doc(rows, kind="transcript", channel="booth-EN", lang="EN"):
    return ViewDocument(
        meeting_id="WIPO-GA-2023-1",
        language=lang,
        source_channel=channel,
        kind=kind,
        rows=tuple(rows),
    )


MANIFEST = parse_manifest(MANIFEST_DICT)

VIEW = _doc(
    [
        _row(3.0, "The chair opened the session.", speaker="Chair"),
        _row(11.0, "Opening remarks were brief.", speaker="Chair"),
        _row(31.0, "The delegation of Spain asked for the floor.", speaker="Delegate of Spain"),
        _row(51.0, "The committee adopted the agenda.", speaker="Chair"),
    ]
)


def test_format_timestamp():
    assert format_timestamp(0.0) == "00:00:00"
    assert format_timestamp(3.999) == "00:00:03"  # floor, not round
    assert format_timestamp(3661.5) == "01:01:01"
    assert format_timestamp(None) == "--:--:--"


def test_select_primary_document_preference_chain():
    native = _doc([], kind="transcript", channel="booth-FR", lang="FR")
    from_en = _doc([], kind="translation", channel="booth-EN", lang="FR")
    from_floor = _doc([], kind="translation", channel="floor", lang="FR")
    other = _doc([], kind="translation", channel="booth-ES", lang="FR")
    assert select_primary_document([from_en, native, from_floor]) is native
    assert select_primary_document([from_floor, from_en, other]) is from_en
    assert select_primary_document([other, from_floor]) is from_floor
    assert select_primary_document([other]) is other
    assert select_primary_document([]) is None


def test_json_round_trip_exact():
    data = export_json(VIEW, MANIFEST)
    assert parse_json_export(data) == VIEW
    gap = ViewDocument("m", "EN", "booth-FR", "gap", (), error="engine down")
    assert parse_json_export(export_json(gap, None)) == gap


def test_json_contains_manifest_and_ms_times():
    payload = json.loads(export_json(VIEW, MANIFEST))
    assert payload["manifest"]["title"] == MANIFEST.title
    assert payload["rows"][0]["start_s"] == 3.0
    assert payload["rows"][0]["text"] == "The chair opened the session."
    assert list(payload) == ["meeting_id", "language", "source_channel", "kind", "rows", "manifest"]


def test_html_structure():
    text = export_html(VIEW, MANIFEST).decode("utf-8")
    assert text.startswith("<!DOCTYPE html>")
    assert '<html lang="en">' in text
    assert f"<h1>{MANIFEST.title} — EN</h1>" in text
    # one heading per agenda item, in order
    first = text.index("<h2>Opening of the session</h2>")
    second = text.index("<h2>Draft agenda</h2>")
    assert 0 < first < second
    # speaker headings appear on change only
    assert text.count("<h3>Chair</h3>") == 2
    assert text.count("<h3>Delegate of Spain</h3>") == 1
    assert "<p><time>00:00:03</time> The chair opened the session.</p>" in text


def test_html_contains_every_row_once_in_order():
    text = export_html(VIEW, MANIFEST).decode("utf-8")
    positions = []
    for row in VIEW.rows:
        assert text.count(row.text) == 1
        positions.append(text.index(row.text))
    assert positions == sorted(positions)


def test_html_escapes_markup():
    doc = _doc([_row(0.0, 'a <b> & "c"')])
    text = export_html(doc, None).decode("utf-8")
    assert "<b>" not in text.split("<body>")[1].replace("<body>", "")
    assert "a &lt;b&gt; &amp;" in text


def test_docx_is_valid_and_minimal():
    data = export_docx(VIEW, MANIFEST)
    report = validate_docx(data)
    assert report.ok, report.violations
    with zipfile.ZipFile(io.BytesIO(data)) as zf:
        assert tuple(zf.namelist()) == DOCX_PARTS
        body = zf.read("word/document.xml").decode("utf-8")
    assert "[00:00:03] Chair: The chair opened the session." in body
    assert "Opening of the session" in body
    ET.fromstring(body)  # well-formed


def test_docx_deterministic():
    a = export_docx(VIEW, MANIFEST)
    b = export_docx(VIEW, MANIFEST)
    assert a == b


def test_docx_empty_view_is_title_only():
    data = export_docx(_doc([]), MANIFEST)
    assert validate_docx(data).ok
    with zipfile.ZipFile(io.BytesIO(data)) as zf:
        body = zf.read("word/document.xml").decode("utf-8")
    root = ET.fromstring(body)
    ns = {"w": "http://schemas.openxmlformats.org/wordprocessingml/2006/main"}
    paragraphs = root.findall(".//w:p", ns)
    assert len(paragraphs) == 1 + len(MANIFEST.agenda)  # title + agenda headings
    texts = [t.text for t in root.findall(".//w:t", ns)]
    assert texts[0] == f"{MANIFEST.title} — EN"


def test_validate_docx_violations():
    truncated = export_docx(VIEW, MANIFEST)[:40]
    assert "ZIP corrupt" in validate_docx(truncated).violations

    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w") as zf:
        zf.writestr("[Content_Types].xml", "<Types/>")
        zf.writestr("_rels/.rels", "<Relationships/>")
        zf.writestr("word/extra.xml", "<x/>")
    report = validate_docx(buf.getvalue())
    assert any("missing part: word/document.xml" in v for v in report.violations)
    assert any("unexpected part: word/extra.xml" in v for v in report.violations)

    buf2 = io.BytesIO()
    with zipfile.ZipFile(buf2, "w") as zf:
        zf.writestr("[Content_Types].xml", "<Types/>")
        zf.writestr("_rels/.rels", "<Relationships/>")
        zf.writestr("word/document.xml", "<w:document>")  # unclosed
    assert any("malformed XML" in v for v in validate_docx(buf2.getvalue()).violations)


def test_all_formats_agree_on_content():
    json_doc = parse_json_export(export_json(VIEW, MANIFEST))
    json_texts = [r.text for r in json_doc.rows]

    html_text = export_html(VIEW, MANIFEST).decode("utf-8")
    with zipfile.ZipFile(io.BytesIO(export_docx(VIEW, MANIFEST))) as zf:
        docx_text = zf.read("word/document.xml").decode("utf-8")

    assert json_texts == [r.text for r in VIEW.rows]
    for t in json_texts:
        assert t in html_text
        assert t in docx_text


def test_unknown_format_rejected():
    with pytest.raises(ValueError, match="unknown export format"):
        export_view(VIEW, MANIFEST, "pdf")


def test_untimed_rows_render_placeholders():
    doc = _doc([ViewRow(None, None, None, "no timing available", "native")])
    html_text = export_html(doc, None).decode("utf-8")
    assert "<time>--:--:--</time>" in html_text
    data = export_docx(doc, None)
    assert validate_docx(data).ok


def test_export_filename():
    assert export_filename("WIPO-GA-2023-1", "FR", "docx") == "WIPO-GA-2023-1.FR.docx"
