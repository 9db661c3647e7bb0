"""Shared fixtures: a synthetic 3-channel meeting with sidecar transcripts.

The fixture meeting is 60 s of floor audio plus EN and FR booths. Sidecar
texts are keyed by the segment ids the default VAD/segmentation settings
produce, so the pipeline replays them deterministically.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pytest

from polyscribe.config import PipelineConfig
from polyscribe.engines import EngineRegistry
from polyscribe.model import AudioClip, MeetingManifest
from polyscribe.gateway import parse_manifest
from polyscribe.orchestrator import Orchestrator
from polyscribe.segmentation import (
    SegmentationPolicy,
    VadConfig,
    detect_speech_regions,
    split_segments,
    write_wav,
)
from polyscribe.model import parse_channel

RATE = 16000

MEETING_ID = "WIPO-GA-2023-1"

FLOOR_SPANS = [(3.0, 9.0), (11.0, 17.5), (20.0, 26.0), (29.0, 47.0), (50.0, 56.0)]
EN_SPANS = [(3.0, 9.0), (11.0, 17.5), (29.0, 47.0), (50.0, 56.0)]
FR_SPANS = [(3.0, 9.0), (20.0, 26.0), (29.0, 47.0), (50.0, 56.0)]

# Floor: EN, FR, ES, EN, EN — exercises the copy-or-translate split.
FLOOR_TEXTS = [
    "⟨cap⟩ the chair of the committee opened the session and welcomed the delegations",
    "le président de la commission a ouvert la séance et il a remercié les délégations",
    "el presidente de la comisión abrió la sesión y agradeció a las delegaciones por el trabajo",
    "⟨cap⟩ the delegations discussed the draft agenda and the committee agreed to continue the work on the treaty in the afternoon",
    "⟨cap⟩ the session was closed by the chair of the committee",
]
EN_TEXTS = [
    "⟨cap⟩ the chair of the committee opened the session and welcomed the delegations",
    "⟨cap⟩ the president of the commission opened the meeting and thanked the delegations",
    "⟨cap⟩ the delegations discussed the draft agenda and the committee agreed to continue the work on the treaty in the afternoon",
    "⟨cap⟩ the session was closed by the chair of the committee",
]
FR_TEXTS = [
    "⟨cap⟩ le président de la commission a ouvert la séance et il a remercié les délégations",
    "le président de la commission a ouvert la séance et il a remercié les délégations pour le travail",
    "les délégations ont discuté le projet et la commission va continuer le travail sur le traité",
    "la séance est close par le président de la commission",
]

MANIFEST_DICT = {
    "meeting_id": MEETING_ID,
    "title": "WIPO/GA/2023-07-06/Session-1",
    "category": "General Assembly",
    "version": 1,
    "agenda": [
        {"label": "Opening of the session", "start_s": 0.0, "end_s": 28.0},
        {"label": "Draft agenda", "start_s": 28.0},
    ],
    "speakers": [
        {"name": "Chair", "affiliation": "Secretariat", "start_s": 0.0, "end_s": 19.0},
        {"name": "Delegate of Spain", "affiliation": "Spain", "start_s": 19.0, "end_s": 28.0},
        {"name": "Chair", "affiliation": "Secretariat", "start_s": 28.0, "end_s": 60.0},
    ],
    "documents": [{"code": "WO/GA/56/1", "title": "Draft agenda"}],
}


def tone_clip(spans, duration_s=60.0, freq=440.0, rate=RATE) -> AudioClip:
    """Silence everywhere except sine-tone bursts over the given spans."""
    n = int(duration_s * rate)
    t = np.arange(n) / rate
    x = np.zeros(n)
    for i, (a, b) in enumerate(spans):
        mask = (t >= a) & (t < b)
        x[mask] = 0.2 * np.sin(2 * np.pi * (freq + 40 * i) * t[mask])
    return AudioClip(rate, (x * 32767).astype(np.int16))


@dataclass
class FixtureMeeting:
    root: Path
    manifest_path: Path
    audio_dir: Path
    sidecar_path: Path
    manifest: MeetingManifest
    sidecar: dict[str, str]
    texts: dict[str, list[str]]

    def registry(self) -> EngineRegistry:
        return EngineRegistry.reference(dict(self.sidecar))

    def orchestrator(self, work_dir: Path, registry: EngineRegistry | None = None) -> Orchestrator:
        cfg = PipelineConfig(work_dir=work_dir)
        return Orchestrator(cfg, registry or self.registry())


def build_fixture_meeting(root: Path) -> FixtureMeeting:
    audio = root / "audio"
    audio.mkdir(parents=True, exist_ok=True)
    clips = {
        "floor": tone_clip(FLOOR_SPANS, freq=300.0),
        "booth-EN": tone_clip(EN_SPANS, freq=500.0),
        "booth-FR": tone_clip(FR_SPANS, freq=700.0),
    }
    for ch, clip in clips.items():
        write_wav(audio / f"{ch}.wav", clip)

    vad, pol = VadConfig(), SegmentationPolicy()
    texts = {"floor": FLOOR_TEXTS, "booth-EN": EN_TEXTS, "booth-FR": FR_TEXTS}
    sidecar: dict[str, str] = {}
    for ch, clip in clips.items():
        regions = detect_speech_regions(clip, vad)
        segs = split_segments(regions, clip, pol, channel=parse_channel(ch), meeting_id=MEETING_ID)
        assert len(segs) == len(texts[ch]), f"{ch}: fixture spans drifted from texts"
        for seg, text in zip(segs, texts[ch]):
            sidecar[seg.segment_id] = text

    sidecar_path = root / "sidecar.json"
    sidecar_path.write_text(json.dumps(sidecar, ensure_ascii=False, indent=1), encoding="utf-8")
    manifest_path = root / "manifest.json"
    manifest_path.write_text(json.dumps(MANIFEST_DICT, ensure_ascii=False, indent=1), encoding="utf-8")
    return FixtureMeeting(
        root=root,
        manifest_path=manifest_path,
        audio_dir=audio,
        sidecar_path=sidecar_path,
        manifest=parse_manifest(json.dumps(MANIFEST_DICT)),
        sidecar=sidecar,
        texts=texts,
    )


@pytest.fixture(scope="session")
def fixture_meeting(tmp_path_factory) -> FixtureMeeting:
    return build_fixture_meeting(tmp_path_factory.mktemp("meeting"))


@pytest.fixture()
def run_fixture_meeting(fixture_meeting, tmp_path):
    """Ingest + run the fixture meeting once; returns (orchestrator, job)."""
    orch = fixture_meeting.orchestrator(tmp_path / "work")
    orch.ingest(fixture_meeting.manifest, fixture_meeting.audio_dir)
    job = orch.run(MEETING_ID)
    return orch, job


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One scoreboard line per release gate whenever the gate tests ran."""
    results: dict[int, tuple[bool, str]] = {}
    for outcome in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(report, "nodeid", "")
            if "test_acceptance.py::test_c" not in nodeid:
                continue
            if outcome == "passed" and getattr(report, "when", "call") != "call":
                continue
            name = nodeid.rsplit("::", 1)[-1]
            try:
                number = int(name.split("_")[1].lstrip("c"))
            except (IndexError, ValueError):
                continue
            label = " ".join(name.split("_")[2:])
            ok = results.get(number, (True, label))[0] and outcome == "passed"
            results[number] = (ok, label)
    if not results:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for number in sorted(results):
        ok, label = results[number]
        terminalreporter.write_line(f"C{number:02d} {'PASS' if ok else 'FAIL'} — {label}")
