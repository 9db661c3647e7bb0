"""polyscribe: multilingual meeting transcription, translation, and search.

Turns multi-channel meeting audio (one floor feed plus interpretation
booths) and a metadata manifest into time-aligned transcripts, cross-language
translations, a searchable index, and exportable documents.
"""

from .model import (
    BOOTH_LANGUAGES,
    FLOOR,
    AudioClip,
    ChannelId,
    Language,
    MeetingManifest,
    Segment,
    Transcript,
    TranslationArtifact,
    Utterance,
    WordTiming,
    booth,
    parse_channel,
)
from .engines import EngineRegistry, HeuristicLID, MarkerMT, SidecarS2T
from .routing import plan_translation_jobs, assemble_language_view, assemble_language_views
from .evaluation import char_error_rate, word_error_rate
from .config import PipelineConfig, load_config
from .orchestrator import Orchestrator
from .search import Query, SearchIndex

__version__ = "0.1.0"

__all__ = [
    "AudioClip",
    "BOOTH_LANGUAGES",
    "ChannelId",
    "EngineRegistry",
    "FLOOR",
    "HeuristicLID",
    "Language",
    "MarkerMT",
    "MeetingManifest",
    "Orchestrator",
    "PipelineConfig",
    "Query",
    "SearchIndex",
    "Segment",
    "SidecarS2T",
    "Transcript",
    "TranslationArtifact",
    "Utterance",
    "WordTiming",
    "assemble_language_view",
    "assemble_language_views",
    "booth",
    "char_error_rate",
    "load_config",
    "parse_channel",
    "plan_translation_jobs",
    "word_error_rate",
    "__version__",
]
