"""Command-line entry points for the transcription pipeline."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import PipelineConfig, load_config
from .engines import build_registry
from .evaluation import corpus_error_rate, read_eval_tsv
from .exporters import EXPORT_FORMATS, export_filename
from .gateway import parse_manifest, validate_meeting_title
from .model import BOOTH_LANGUAGES, FLOOR, Language, booth, parse_channel
from .routing import plan_translation_jobs
from .orchestrator import (
    Orchestrator,
    discover_channels,
    job_status_from_disk,
    load_ingested,
)
from .search import Query, SearchIndex


def _config(args) -> PipelineConfig:
    if args.config:
        return load_config(args.config)
    return PipelineConfig(work_dir=Path("polyscribe-work"))


def _orchestrator(args) -> Orchestrator:
    cfg = _config(args)
    return Orchestrator(cfg, build_registry(cfg.engines))


def cmd_ingest(args) -> int:
    orch = _orchestrator(args)
    job = orch.ingest(Path(args.manifest), Path(args.audio_dir))
    print(f"ingested {job.meeting_id}: {len(job.channels)} channels ({', '.join(job.channels)})")
    return 0


def cmd_run(args) -> int:
    orch = _orchestrator(args)
    load_ingested(orch, args.meeting_id)
    job = orch.run(args.meeting_id)
    status = orch.status(args.meeting_id)
    print(f"{job.meeting_id}: {job.state}")
    print(
        "artifacts: {transcripts} transcripts, {translations} translations"
        " ({failed_translations} failed)".format(**status["artifacts"])
    )
    for err in job.errors:
        print(f"  error: {err}")
    return 0 if job.state in ("published", "partially_published") else 1


def cmd_status(args) -> int:
    cfg = _config(args)
    status = job_status_from_disk(cfg.work_dir, args.meeting_id)
    print(f"{status['meeting_id']}: {status['state']}")
    for ch, stages in status["channels"].items():
        done = [s for s, v in stages.items() if v == "done"]
        print(f"  {ch}: {', '.join(done) if done else 'pending'}")
    print(
        "artifacts: {transcripts} transcripts, {translations} translations".format(
            **status["artifacts"]
        )
    )
    return 0


def cmd_search(args) -> int:
    cfg = _config(args)
    index = SearchIndex(cfg.resolved_index_root())
    query = Query.parse(
        args.query,
        meeting_id=args.meeting,
        language=args.lang.upper() if args.lang else None,
        speaker=args.speaker,
        channel=args.channel,
        limit=args.limit,
    )
    hits = index.search(query)
    if not hits:
        print("no hits")
        return 0
    for h in hits:
        stamp = f"{h.timestamp_s:9.3f}s"
        who = f" [{h.speaker}]" if h.speaker else ""
        print(f"{h.meeting_id} {h.channel} {h.language} {stamp}{who}: {h.snippet} (score {h.score:.3f})")
    return 0


def cmd_export(args) -> int:
    cfg = _config(args)
    fmt = args.format.lower()
    if fmt not in EXPORT_FORMATS:
        print(f"unknown format {args.format!r}; expected one of {', '.join(EXPORT_FORMATS)}", file=sys.stderr)
        return 2
    lang = Language(args.lang.upper())
    name = export_filename(args.meeting_id, lang.value, fmt)
    source = cfg.work_dir / args.meeting_id / "exports" / name
    if not source.exists():
        print(f"no export at {source}; run the meeting first", file=sys.stderr)
        return 1
    out = Path(args.output) if args.output else Path(name)
    out.write_bytes(source.read_bytes())
    print(f"wrote {out}")
    return 0


def cmd_eval(args) -> int:
    rows = read_eval_tsv(args.tsv)
    pairs = [(ref, hyp) for _, ref, hyp in rows]
    unit = "word" if args.metric == "wer" else "char"
    lang = Language(args.lang.upper()) if args.lang else None
    counts = corpus_error_rate(pairs, unit=unit, lang=lang)
    rate = counts.rate
    label = args.metric.upper()
    print(f"{label}: {rate:.4f}" if rate is not None else f"{label}: undefined")
    print(
        f"  substitutions={counts.substitutions} deletions={counts.deletions} "
        f"insertions={counts.insertions} ref_len={counts.ref_len} rows={len(rows)}"
    )
    return 0


def cmd_plan(args) -> int:
    if args.audio_dir:  # what is actually on disk wins
        parsed = [parse_channel(c) for c in sorted(discover_channels(Path(args.audio_dir)))]
    else:
        raw = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
        codes = raw.get("channels")
        if codes:
            parsed = [FLOOR if c.lower() == "floor" else booth(c) for c in codes]
        else:
            parsed = [FLOOR, *(booth(l) for l in BOOTH_LANGUAGES)]
    manifest = parse_manifest(Path(args.manifest).read_text(encoding="utf-8"))
    check = validate_meeting_title(manifest.title)
    if not check.ok:
        for v in check.violations:
            print(f"title warning: {v}")
    jobs = plan_translation_jobs(parsed)
    print(f"{manifest.meeting_id}: {len(jobs)} translation jobs")
    for job in jobs:
        print(f"  {job.source_channel} -> {job.target_lang.value} ({job.mode})")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(_orchestrator(args))
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="polyscribe",
        description="Multilingual meeting transcription pipeline",
    )
    parser.add_argument("--config", help="pipeline config JSON", default=None)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="register a meeting's manifest and audio")
    p.add_argument("manifest")
    p.add_argument("audio_dir")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("run", help="run the pipeline for an ingested meeting")
    p.add_argument("meeting_id")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("status", help="job state and per-channel stages")
    p.add_argument("meeting_id")
    p.set_defaults(func=cmd_status)

    p = sub.add_parser("search", help="full-text search over indexed meetings")
    p.add_argument("query")
    p.add_argument("--lang")
    p.add_argument("--meeting")
    p.add_argument("--speaker")
    p.add_argument("--channel")
    p.add_argument("--limit", type=int, default=10)
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("export", help="copy a finished export out of the work dir")
    p.add_argument("meeting_id")
    p.add_argument("lang")
    p.add_argument("format")
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("eval", help="score hypotheses against references")
    p.add_argument("metric", choices=("wer", "cer"))
    p.add_argument("tsv", help="segment_id<TAB>ref<TAB>hyp")
    p.add_argument("--lang", default=None, help="ZH switches CER to whitespace-free")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("plan", help="print the translation jobs a meeting implies")
    p.add_argument("manifest")
    p.add_argument("--audio-dir", default=None)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
