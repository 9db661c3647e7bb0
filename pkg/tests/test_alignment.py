import random

import pytest

from polyscribe.alignment import (
    AlignerContractViolation,
    AlignerEngine,
    ProportionalAligner,
    align_transcript,
    proportional_align,
)
from polyscribe.model import Segment, Transcript, Utterance, WordTiming, booth


def _segment(start, end):
    return Segment.create("m1", booth("EN"), start, end)


def test_equal_weights_split_evenly():
    words = proportional_align(_segment(10.0, 12.0), ["hello", "world"])
    assert [(w.start_s, w.end_s) for w in words] == [(10.0, 11.0), (11.0, 12.0)]


def test_char_count_weights():
    words = proportional_align(_segment(0.0, 4.0), ["a", "abc"])
    assert [(w.start_s, w.end_s) for w in words] == [(0.0, 1.0), (1.0, 4.0)]


def test_single_token_spans_segment():
    words = proportional_align(_segment(5.0, 8.0), ["only"])
    assert (words[0].start_s, words[0].end_s) == (5.0, 8.0)


def test_empty_tokens_rejected():
    with pytest.raises(ValueError, match="nothing to align"):
        proportional_align(_segment(0.0, 1.0), [])
    with pytest.raises(ValueError):
        proportional_align(_segment(0.0, 1.0), ["a"], weights=[1.0, 2.0])
    with pytest.raises(ValueError):
        proportional_align(_segment(0.0, 1.0), ["a", "b"], weights=[1.0, 0.0])


def test_partition_properties_random():
    rng = random.Random(5)
    for _ in range(200):
        start = rng.uniform(0, 100)
        end = start + rng.uniform(0.5, 20)
        seg = _segment(round(start, 3), round(end, 3))
        tokens = ["x" * rng.randrange(1, 12) for _ in range(rng.randrange(1, 15))]
        words = proportional_align(seg, tokens)
        assert words[0].start_s == seg.start_s
        assert words[-1].end_s == seg.end_s
        total = sum(w.end_s - w.start_s for w in words)
        assert total == pytest.approx(seg.duration_s, abs=1e-3)
        for a, b in zip(words, words[1:]):
            assert a.end_s == b.start_s
            assert a.start_s < a.end_s


def test_weight_scaling_invariance():
    seg = _segment(2.0, 9.0)
    tokens = ["pct", "treaty", "of", "geneva"]
    base = [3.0, 6.0, 2.0, 6.0]
    ref = proportional_align(seg, tokens, weights=base)
    for factor in (2.0, 0.5, 8.0):
        scaled = proportional_align(seg, tokens, weights=[w * factor for w in base])
        assert [(w.start_s, w.end_s) for w in scaled] == [(w.start_s, w.end_s) for w in ref]


def _transcript(utterances):
    return Transcript(channel=booth("EN"), language="EN", utterances=tuple(utterances), engine_id="t")


def test_align_transcript_fills_missing_only():
    seg1 = Segment.create("m1", booth("EN"), 0.0, 2.0)
    seg2 = Segment.create("m1", booth("EN"), 3.0, 5.0)
    timed = Utterance(
        (WordTiming("kept", 0.25, 0.75), WordTiming("words", 0.75, 1.5)),
        "EN",
        None,
        seg1.segment_id,
    )
    untimed = Utterance(
        (WordTiming("fill", None, None), WordTiming("here", None, None)),
        "EN",
        None,
        seg2.segment_id,
    )
    out = align_transcript(_transcript([timed, untimed]), [seg1, seg2], None, ProportionalAligner())
    assert out.utterances[0] == timed  # engine timings untouched
    filled = out.utterances[1].words
    assert filled[0].start_s == 3.0 and filled[-1].end_s == 5.0
    assert all(w.timed for w in filled)


def test_align_transcript_identity_when_fully_timed():
    seg = Segment.create("m1", booth("EN"), 0.0, 2.0)
    utt = Utterance((WordTiming("done", 0.0, 2.0),), "EN", None, seg.segment_id)
    out = align_transcript(_transcript([utt]), [seg], None, ProportionalAligner())
    assert out.utterances == (utt,)


def test_align_transcript_unknown_segment():
    utt = Utterance((WordTiming("x", None, None),), "EN", None, "m1/booth-EN/9-10")
    with pytest.raises(ValueError, match="no known segment"):
        align_transcript(_transcript([utt]), [], None, ProportionalAligner())


class _BrokenAligner(AlignerEngine):
    engine_id = "broken"

    def __init__(self, mode):
        self.mode = mode

    def align(self, segment, clip, tokens):
        if self.mode == "count":
            return [WordTiming("x", segment.start_s, segment.end_s)]
        if self.mode == "bounds":
            return [
                WordTiming(t, segment.start_s - 1.0 + i, segment.start_s + i)
                for i, t in enumerate(tokens)
            ]
        # overlap
        return [WordTiming(t, segment.start_s, segment.end_s) for t in tokens]


@pytest.mark.parametrize("mode", ["count", "bounds", "overlap"])
def test_broken_aligners_rejected(mode):
    seg = Segment.create("m1", booth("EN"), 0.0, 4.0)
    utt = Utterance(
        (WordTiming("a", None, None), WordTiming("b", None, None)),
        "EN",
        None,
        seg.segment_id,
    )
    with pytest.raises(AlignerContractViolation, match="aligner contract violation"):
        align_transcript(_transcript([utt]), [seg], None, _BrokenAligner(mode))
