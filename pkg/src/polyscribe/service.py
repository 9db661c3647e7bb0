"""HTTP facade over the orchestrator.

Read endpoints serve snapshots; ingest is the only mutating call and can
kick off the pipeline in a background thread.
"""

from __future__ import annotations

import threading
from typing import Optional

from fastapi import Body, FastAPI, HTTPException, Query as QueryParam
from fastapi.responses import HTMLResponse, Response

from .exporters import export_filename
from .gateway import ManifestParseError, parse_manifest
from .model import Language
from .orchestrator import IngestError, Orchestrator
from .routing import ViewDocument
from .search import Query

_MEDIA_TYPES = {
    "json": "application/json",
    "html": "text/html; charset=utf-8",
    "docx": "application/vnd.openxmlformats-officedocument.wordprocessingml.document",
}


def _doc_payload(doc: ViewDocument) -> dict:
    payload = {
        "language": doc.language,
        "source_channel": doc.source_channel,
        "kind": doc.kind,
        "rows": [
            {
                "start_s": r.start_s,
                "end_s": r.end_s,
                "speaker": r.speaker,
                "text": r.text,
                "origin": r.origin,
            }
            for r in doc.rows
        ],
    }
    if doc.error is not None:
        payload["error"] = doc.error
    return payload


def create_app(orchestrator: Orchestrator) -> FastAPI:
    app = FastAPI(title="polyscribe")

    @app.post("/meetings")
    def ingest_meeting(body: dict = Body(...)):
        manifest_raw = body.get("manifest")
        audio_dir = body.get("audio_dir")
        if manifest_raw is None or audio_dir is None:
            raise HTTPException(422, "body must carry 'manifest' and 'audio_dir'")
        try:
            manifest = parse_manifest(manifest_raw)
            job = orchestrator.ingest(manifest, audio_dir)
        except (ManifestParseError, IngestError) as exc:
            raise HTTPException(400, str(exc)) from exc
        if body.get("run", True) and job.state == "pending":
            threading.Thread(
                target=orchestrator.run, args=(job.meeting_id,), daemon=True
            ).start()
        return {"meeting_id": job.meeting_id, "state": job.state, "channels": job.channels}

    @app.get("/meetings")
    def list_meetings():
        return orchestrator.list_meetings()

    @app.get("/meetings/{meeting_id}/status")
    def meeting_status(meeting_id: str):
        try:
            return orchestrator.status(meeting_id)
        except KeyError as exc:
            raise HTTPException(404, str(exc)) from exc

    @app.get("/meetings/{meeting_id}/transcripts/{lang}")
    def meeting_transcripts(meeting_id: str, lang: str):
        try:
            language = Language(lang.upper())
        except ValueError as exc:
            raise HTTPException(400, f"unknown language: {lang}") from exc
        try:
            docs = orchestrator.language_view(meeting_id, language)
        except KeyError as exc:
            raise HTTPException(404, str(exc)) from exc
        return {
            "meeting_id": meeting_id,
            "language": language.value,
            "documents": [_doc_payload(d) for d in docs],
        }

    @app.get("/search")
    def search(
        q: str,
        lang: Optional[str] = None,
        meeting: Optional[str] = None,
        speaker: Optional[str] = None,
        channel: Optional[str] = None,
        limit: int = QueryParam(10, ge=1, le=100),
    ):
        query = Query.parse(
            q,
            language=lang.upper() if lang else None,
            meeting_id=meeting,
            speaker=speaker,
            channel=channel,
            limit=limit,
        )
        hits = orchestrator.index.search(query)
        return {
            "query": q,
            "hits": [
                {
                    "meeting_id": h.meeting_id,
                    "channel": h.channel,
                    "language": h.language,
                    "timestamp_s": h.timestamp_s,
                    "snippet": h.snippet,
                    "score": h.score,
                    "speaker": h.speaker,
                    "agenda_label": h.agenda_label,
                }
                for h in hits
            ],
        }

    @app.get("/meetings/{meeting_id}/export/{lang}/{fmt}")
    def export_meeting(meeting_id: str, lang: str, fmt: str):
        if fmt not in _MEDIA_TYPES:
            raise HTTPException(400, f"unknown format: {fmt}")
        try:
            language = Language(lang.upper())
        except ValueError as exc:
            raise HTTPException(400, f"unknown language: {lang}") from exc
        try:
            payload = orchestrator.export(meeting_id, language, fmt)
        except KeyError as exc:
            raise HTTPException(404, str(exc)) from exc
        filename = export_filename(meeting_id, language.value, fmt)
        if fmt == "json":
            return Response(payload, media_type=_MEDIA_TYPES[fmt])
        if fmt == "html":
            return HTMLResponse(payload)
        return Response(
            payload,
            media_type=_MEDIA_TYPES[fmt],
            headers={"Content-Disposition": f'attachment; filename="{filename}"'},
        )

    return app
