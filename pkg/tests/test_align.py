import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from fakeword.align import (
    Alignment,
    AlignmentStep,
    EditOp,
    EmptyReferenceError,
    InputTooLargeError,
    NormalizationPolicy,
    align_words,
    normalize,
    normalize_transcript,
    wer,
)
from fakeword.tags import Label, TaggedTranscript


def edit_distance_oracle(a, b):
    """Brute-force recursive edit distance, independent of the DP aligner."""
    if not a:
        return len(b)
    if not b:
        return len(a)
    return min(
        edit_distance_oracle(a[1:], b[1:]) + (a[0] != b[0]),
        edit_distance_oracle(a[1:], b) + 1,
        edit_distance_oracle(a, b[1:]) + 1,
    )


def ops(alignment):
    return [s.op for s in alignment.steps]


def test_normalize_lowercase():
    assert normalize(["Now", "THIS"]) == ["now", "this"]


def test_normalize_strip_punctuation():
    policy = NormalizationPolicy(strip_punctuation=True)
    assert normalize(["boots."], policy) == ["boots"]
    assert normalize(["..."], policy) == []


def test_normalize_identity_policy():
    policy = NormalizationPolicy(lowercase=False, strip_punctuation=False,
                                 collapse_whitespace=False)
    assert normalize(["Keep", "As-Is."], policy) == ["Keep", "As-Is."]


def test_normalize_collapses_whitespace():
    assert normalize(["two words", " x "]) == ["two", "words", "x"]


@given(st.lists(st.text(alphabet="aB .'", max_size=6)),
       st.booleans(), st.booleans())
def test_normalize_idempotent(words, lower, punct):
    policy = NormalizationPolicy(lowercase=lower, strip_punctuation=punct)
    once = normalize(words, policy)
    assert normalize(once, policy) == once


def test_normalize_transcript_keeps_labels_and_mapping():
    t = TaggedTranscript.from_pairs([("Hello", Label.FAKE), ("...", Label.REAL),
                                     ("World", Label.REAL)])
    policy = NormalizationPolicy(strip_punctuation=True)
    out, mapping = normalize_transcript(t, policy)
    assert out.texts() == ["hello", "world"]
    assert out.labels() == [Label.FAKE, Label.REAL]
    assert mapping == [0, 2]


def test_align_identical():
    a = align_words(["a", "b", "c"], ["a", "b", "c"])
    assert ops(a) == [EditOp.HIT] * 3
    assert a.errors == 0


def test_align_substitution():
    a = align_words(["i", "could"], ["it", "could"])
    assert ops(a) == [EditOp.SUB, EditOp.HIT]
    assert (a.steps[0].ref_index, a.steps[0].hyp_index) == (0, 0)


def test_align_insertion():
    a = align_words(["a", "b"], ["a", "x", "b"])
    assert ops(a) == [EditOp.HIT, EditOp.INS, EditOp.HIT]
    assert a.errors == 1


def test_align_empty_sides():
    a = align_words([], ["x", "y"])
    assert ops(a) == [EditOp.INS, EditOp.INS]
    a = align_words(["x", "y"], [])
    assert ops(a) == [EditOp.DEL, EditOp.DEL]
    a = align_words([], [])
    assert a.steps == ()


def test_alignment_counts_and_monotonicity():
    a = align_words(list("kitten"), list("sitting"))
    assert a.errors == 3
    ref_seen = [s.ref_index for s in a.steps if s.ref_index is not None]
    hyp_seen = [s.hyp_index for s in a.steps if s.hyp_index is not None]
    assert ref_seen == sorted(ref_seen) == list(range(6))
    assert hyp_seen == sorted(hyp_seen) == list(range(7))


def test_align_rejects_oversized_input():
    with pytest.raises(InputTooLargeError):
        align_words(["w"] * 10_001, ["w"])


def test_tie_break_prefers_sub_then_del_forward():
    # cost-2 tie: SUB+INS vs INS+SUB; the forward walk substitutes first
    a = align_words(["x"], ["y", "z"])
    assert ops(a) == [EditOp.SUB, EditOp.INS]
    a = align_words(["x", "y"], ["z"])
    assert ops(a) == [EditOp.SUB, EditOp.DEL]


def test_wer_values():
    all_hit = align_words(["a"] * 5, ["a"] * 5)
    assert wer(all_hit, 5) == 0.0
    one_sub = align_words(["a", "b", "c", "d", "e"], ["a", "b", "x", "d", "e"])
    assert wer(one_sub, 5) == pytest.approx(0.2)
    one_ins = align_words(["a", "b"], ["a", "x", "b"])
    assert wer(one_ins, 2) == pytest.approx(0.5)


def test_wer_empty_reference():
    with pytest.raises(EmptyReferenceError):
        wer(align_words([], []), 0)


def test_alignment_validates_counts():
    with pytest.raises(ValueError):
        Alignment(steps=(AlignmentStep(EditOp.HIT, 0, 0),), hits=2, subs=0, ins=0, dels=0)


def test_step_index_contract():
    with pytest.raises(ValueError):
        AlignmentStep(EditOp.INS, ref_index=0, hyp_index=0)
    with pytest.raises(ValueError):
        AlignmentStep(EditOp.DEL, hyp_index=0)


def _random_pair(rng, max_len=6, alphabet="abcd"):
    ref = [rng.choice(alphabet) for _ in range(rng.randint(0, max_len))]
    hyp = [rng.choice(alphabet) for _ in range(rng.randint(0, max_len))]
    return ref, hyp


def test_cost_matches_recursive_oracle_sample():
    rng = random.Random(7)
    for _ in range(500):
        ref, hyp = _random_pair(rng)
        a = align_words(ref, hyp)
        assert a.errors == edit_distance_oracle(ref, hyp), (ref, hyp)


@given(st.lists(st.sampled_from("abcd"), max_size=6),
       st.lists(st.sampled_from("abcd"), max_size=6))
def test_cost_matches_recursive_oracle_property(ref, hyp):
    assert align_words(ref, hyp).errors == edit_distance_oracle(ref, hyp)


def test_transcript_wer_helper():
    ref = TaggedTranscript.from_pairs([("But", Label.REAL), ("I", Label.FAKE),
                                       ("could", Label.REAL), ("not", Label.REAL)])
    hyp = TaggedTranscript.from_pairs([("but", Label.REAL), ("it", Label.REAL),
                                       ("could", Label.REAL), ("not", Label.REAL)])
    from fakeword.align import transcript_wer
    assert transcript_wer(ref, hyp) == pytest.approx(0.25)
    assert transcript_wer(ref, ref) == 0.0


def test_zero_wer_iff_equal():
    rng = random.Random(11)
    for _ in range(200):
        ref, hyp = _random_pair(rng)
        if not ref:
            continue
        a = align_words(ref, hyp)
        assert (wer(a, len(ref)) == 0.0) == (ref == hyp)
