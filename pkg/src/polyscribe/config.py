"""Pipeline configuration: one JSON file drives engines, VAD, and paths."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .segmentation import SegmentationPolicy, VadConfig


@dataclass
class PipelineConfig:
    work_dir: Path
    engines: list[dict] = field(default_factory=list)
    vad: VadConfig = field(default_factory=VadConfig)
    segmentation: SegmentationPolicy = field(default_factory=SegmentationPolicy)
    poll_interval_s: float = 30.0
    index_root: Optional[Path] = None
    sink_dir: Optional[Path] = None

    def resolved_index_root(self) -> Path:
        return self.index_root if self.index_root is not None else self.work_dir / "index"

    def resolved_sink_dir(self) -> Path:
        return self.sink_dir if self.sink_dir is not None else self.work_dir / "exports"


def load_config(path: str | Path) -> PipelineConfig:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    work_dir = Path(raw["work_dir"])
    vad = VadConfig(**raw.get("vad", {}))
    seg = SegmentationPolicy(**raw.get("segmentation", {}))
    return PipelineConfig(
        work_dir=work_dir,
        engines=list(raw.get("engines", [])),
        vad=vad,
        segmentation=seg,
        poll_interval_s=float(raw.get("poll_interval_s", 30.0)),
        index_root=Path(raw["index_root"]) if "index_root" in raw else None,
        sink_dir=Path(raw["sink_dir"]) if "sink_dir" in raw else None,
    )
