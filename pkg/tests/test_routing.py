import itertools

import pytest

from oracles import fanout_oracle, fanout_routes_oracle
from polyscribe.engines import EngineError, HeuristicLID, MarkerMT, MTEngine
from polyscribe.model import (
    FLOOR,
    Language,
    MULTILINGUAL,
    Transcript,
    TranslationArtifact,
    ArtifactSentence,
    Utterance,
    WordTiming,
    booth,
    parse_channel,
)
from polyscribe.routing import (
    FULL,
    PER_SENTENCE,
    JobFailure,
    TranslationJob,
    assemble_language_view,
    assemble_language_views,
    execute_job,
    execute_plan,
    plan_translation_jobs,
    resolve_floor_languages,
)

ALL_CHANNELS = [FLOOR] + [booth(code) for code in ("AR", "ZH", "EN", "FR", "RU", "ES")]


def test_full_meeting_has_twelve_jobs():
    jobs = plan_translation_jobs(ALL_CHANNELS)
    assert len(jobs) == 12
    en_jobs = [j for j in jobs if str(j.source_channel) == "booth-EN"]
    assert sorted(j.target_lang.value for j in en_jobs) == ["AR", "ES", "FR", "PT", "RU", "ZH"]
    floor_jobs = [j for j in jobs if j.source_channel.is_floor]
    assert len(floor_jobs) == 1
    assert floor_jobs[0].mode == PER_SENTENCE
    assert floor_jobs[0].source_lang == MULTILINGUAL
    assert floor_jobs[0].target_lang == Language.EN


def test_en_booth_alone_fans_out_to_six():
    jobs = plan_translation_jobs([booth("EN")])
    assert len(jobs) == 6
    assert all(j.mode == FULL and j.source_lang == "EN" for j in jobs)


def test_empty_and_duplicate_channel_sets():
    assert plan_translation_jobs([]) == []
    with pytest.raises(ValueError, match="duplicate"):
        plan_translation_jobs([booth("FR"), booth("FR")])


def test_plan_matches_oracle_over_all_subsets():
    for r in range(len(ALL_CHANNELS) + 1):
        for subset in itertools.combinations(ALL_CHANNELS, r):
            jobs = plan_translation_jobs(list(subset))
            assert len(jobs) == fanout_oracle(subset)
            assert {(str(j.source_channel), j.target_lang.value) for j in jobs} == (
                fanout_routes_oracle(subset)
            )


def test_plan_invariants_and_ordering():
    for subset in itertools.combinations(ALL_CHANNELS, 4):
        jobs = plan_translation_jobs(list(subset))
        keys = [(str(j.source_channel), j.target_lang.value) for j in jobs]
        assert keys == sorted(keys)
        for j in jobs:
            if j.mode == PER_SENTENCE:
                assert j.source_channel.is_floor
            else:
                assert j.source_lang != j.target_lang.value
        assert jobs == plan_translation_jobs(list(subset))


def _utt(text, lang=None, start=None, end=None):
    tokens = text.split()
    if start is None:
        words = tuple(WordTiming(t, None, None) for t in tokens)
    else:
        step = (end - start) / len(tokens)
        words = tuple(
            WordTiming(t, start + i * step, start + (i + 1) * step)
            for i, t in enumerate(tokens)
        )
    return Utterance(words, lang, None, None)


def _floor_transcript(utts):
    return Transcript(FLOOR, MULTILINGUAL, tuple(utts), engine_id="t")


def test_resolve_floor_languages_labels_and_lid():
    t = _floor_transcript(
        [
            _utt("good morning delegates", Language.EN),
            _utt("le président de la commission est arrivé"),
            _utt("zqx vvv"),
        ]
    )
    langs = resolve_floor_languages(t, HeuristicLID())
    assert langs[0] == Language.EN
    assert langs[1] == Language.FR
    assert langs[2] in (Language.EN, Language.FR)  # majority of detected


def test_resolve_floor_majority_tie_breaks_alphabetically():
    t = _floor_transcript(
        [
            _utt("a", Language.FR),
            _utt("b", Language.ES),
            _utt("c"),
        ]
    )
    assert resolve_floor_languages(t, None)[2] == Language.ES  # ES < FR


def test_resolve_floor_all_unknown_defaults_en():
    t = _floor_transcript([_utt("zzz"), _utt("qqq")])
    assert resolve_floor_languages(t, None) == [Language.EN, Language.EN]


FLOOR_JOB = TranslationJob(FLOOR, MULTILINGUAL, Language.EN, PER_SENTENCE)


def test_floor_copy_or_translate():
    t = _floor_transcript(
        [
            _utt("good morning", Language.EN, 0.0, 1.0),
            _utt("bonjour", Language.FR, 2.0, 3.0),
        ]
    )
    artifact = execute_job(FLOOR_JOB, t, MarkerMT())
    assert [s.mode for s in artifact.sentences] == ["copied", "translated"]
    assert artifact.sentences[0].text == "good morning"
    assert artifact.sentences[1].text == "⟪FR→EN⟫ bonjour"
    assert [s.source_index for s in artifact.sentences] == [0, 1]
    assert artifact.sentences[1].start_s == 2.0


def test_all_english_floor_is_all_copies():
    texts = ["the meeting is open", "we welcome the delegates"]
    t = _floor_transcript([_utt(x, Language.EN, 2.0 * i, 2.0 * i + 1) for i, x in enumerate(texts)])
    artifact = execute_job(FLOOR_JOB, t, MarkerMT())
    assert all(s.mode == "copied" for s in artifact.sentences)
    assert [s.text for s in artifact.sentences] == texts


def test_empty_floor_yields_empty_artifact():
    artifact = execute_job(FLOOR_JOB, _floor_transcript([]), MarkerMT())
    assert artifact.sentences == ()


def test_full_job_translates_whole_transcript():
    job = TranslationJob(booth("FR"), "FR", Language.EN, FULL)
    t = Transcript(
        booth("FR"),
        "FR",
        (_utt("bonjour à tous", Language.FR, 0.0, 2.0),),
        engine_id="t",
    )
    artifact = execute_job(job, t, MarkerMT())
    assert artifact.sentences[0].text == "⟪FR→EN⟫ bonjour à tous"
    assert artifact.target_lang == Language.EN
    assert artifact.source_lang == "FR"


def test_execute_job_rejects_wrong_channel():
    job = TranslationJob(booth("FR"), "FR", Language.EN, FULL)
    t = Transcript(booth("ES"), "ES", (), engine_id="t")
    with pytest.raises(ValueError):
        execute_job(job, t, MarkerMT())


class _FailingMT(MTEngine):
    engine_id = "failing"

    def __init__(self, bad_src):
        self.bad_src = bad_src

    def translate(self, text, src, tgt):
        if src == self.bad_src:
            raise EngineError(f"simulated outage for {src}")
        return MarkerMT().translate(text, src, tgt)


def test_execute_plan_isolates_failures():
    channels = [booth("EN"), booth("FR"), booth("ES")]
    jobs = plan_translation_jobs(channels)
    transcripts = {
        "booth-EN": Transcript(booth("EN"), "EN", (_utt("hello", Language.EN, 0.0, 1.0),), engine_id="t"),
        "booth-FR": Transcript(booth("FR"), "FR", (_utt("bonjour", Language.FR, 0.0, 1.0),), engine_id="t"),
        "booth-ES": Transcript(booth("ES"), "ES", (_utt("hola", Language.ES, 0.0, 1.0),), engine_id="t"),
    }
    artifacts, failures = execute_plan(jobs, transcripts, _FailingMT("FR"))
    assert len(failures) == 1
    assert str(failures[0].job.source_channel) == "booth-FR"
    assert "simulated outage" in failures[0].error
    assert len(artifacts) == len(jobs) - 1


def test_execute_plan_missing_transcript_is_a_failure():
    jobs = plan_translation_jobs([booth("FR")])
    artifacts, failures = execute_plan(jobs, {}, MarkerMT())
    assert artifacts == [] and len(failures) == 1
    assert "no transcript" in failures[0].error


def _artifact(src_channel, src, tgt, texts):
    return TranslationArtifact(
        source_channel=parse_channel(src_channel),
        source_lang=src,
        target_lang=tgt,
        sentences=tuple(
            ArtifactSentence(i, x, "translated", float(i), float(i) + 0.5)
            for i, x in enumerate(texts)
        ),
        engine_id="t",
    )


def test_language_view_contents_and_order():
    transcripts = {
        "booth-EN": Transcript(booth("EN"), "EN", (_utt("hello there", Language.EN, 0.0, 1.0),), engine_id="t"),
    }
    artifacts = [
        _artifact("booth-FR", "FR", Language.EN, ["⟪FR→EN⟫ bonjour"]),
        _artifact("floor", MULTILINGUAL, Language.EN, ["copied text"]),
        _artifact("booth-EN", "EN", Language.PT, ["⟪EN→PT⟫ hello there"]),
    ]
    en_docs = assemble_language_view("m1", Language.EN, transcripts, artifacts)
    assert [(d.kind, d.source_channel) for d in en_docs] == [
        ("transcript", "booth-EN"),
        ("translation", "booth-FR"),
        ("translation", "floor"),
    ]
    assert en_docs[0].rows[0].text == "hello there"
    assert all(d.language == "EN" for d in en_docs)

    pt_docs = assemble_language_view("m1", Language.PT, transcripts, artifacts)
    assert [(d.kind, d.source_channel) for d in pt_docs] == [("translation", "booth-EN")]


def test_floor_transcript_never_appears_as_native():
    transcripts = {"floor": _floor_transcript([_utt("hi", Language.EN, 0.0, 1.0)])}
    for lang in Language:
        assert assemble_language_view("m1", lang, transcripts, []) == []


def test_failed_routes_surface_as_gaps():
    job = TranslationJob(booth("FR"), "FR", Language.EN, FULL)
    docs = assemble_language_view(
        "m1", Language.EN, {}, [], failures=[JobFailure(job, "engine down")]
    )
    assert len(docs) == 1
    assert docs[0].kind == "gap" and docs[0].error == "engine down"
    assert docs[0].rows == ()


def test_views_quantize_times_to_ms():
    t = Transcript(
        booth("EN"),
        "EN",
        (_utt("hi", Language.EN, 0.1000000001, 1.2345678),),
        engine_id="t",
    )
    docs = assemble_language_view("m1", Language.EN, {"booth-EN": t}, [])
    row = docs[0].rows[0]
    assert row.start_s == 0.1 and row.end_s == 1.235


def test_assemble_all_views_covers_seven_languages():
    transcripts = {
        "booth-EN": Transcript(booth("EN"), "EN", (_utt("hello", Language.EN, 0.0, 1.0),), engine_id="t"),
    }
    artifacts = [
        _artifact("booth-EN", "EN", tgt, [f"⟪EN→{tgt.value}⟫ hello"])
        for tgt in Language
        if tgt != Language.EN
    ]
    views = assemble_language_views("m1", transcripts, artifacts)
    assert sorted(views) == sorted(l.value for l in Language)
    assert len(views["EN"]) == 1  # just the native transcript
    for code in ("AR", "ZH", "FR", "RU", "ES", "PT"):
        assert len(views[code]) == 1 and views[code][0].kind == "translation"
