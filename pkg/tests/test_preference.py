from __future__ import annotations

import dataclasses
import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from valuescope.corpus import Comment
from valuescope.exceptions import ConfigError, DegenerateWarning, InputError, InsufficientDataError, PipelineOrderError
from valuescope.gateway.stubs import LengthPreference, LexiconPreference
from valuescope.preference import (
    DEFAULT_VARIANT,
    INPUT_SEPARATOR,
    InputVariant,
    PreferenceScore,
    binary_accuracy,
    build_input,
    comment_part,
    distill,
    format_time,
    label_transform,
    preference_delta,
    preference_labels,
    standardize_by_community,
    zscore,
)
from valuescope.simulation import STAGES, SyntheticComment

T0 = 1_584_230_400  # 2020-03-15T00:00:00Z


def comment(cid="c1", body="ty!", community="forum", votes=3):
    return Comment(cid, "p", "p", community, "alice", body, T0, T0 + 10**6, votes, "Thanks thread", "analysis")


def passed(origin_id, text, level=4, dimension="formality"):
    s = SyntheticComment(origin_id, dimension, level, text)
    s.verdicts.update({stage: True for stage in STAGES})
    return s


# ------------------------------------------------------------------- labels


def test_label_transform_examples():
    assert label_transform(0) == 0.0
    assert label_transform(9) == pytest.approx(2.302585, abs=1e-6)
    assert label_transform(-9) == pytest.approx(-2.302585, abs=1e-6)


@given(st.integers(-10**6, 10**6), st.integers(-10**6, 10**6))
def test_label_transform_odd_and_increasing(x, y):
    assert label_transform(-x) == -label_transform(x)
    if x < y:
        assert label_transform(x) < label_transform(y)


def test_preference_labels_follow_votes():
    labels = preference_labels([comment("a", votes=-4), comment("b", votes=0)])
    assert [(l.comment_id, l.net_votes) for l in labels] == [("a", -4), ("b", 0)]
    assert labels[0].label == pytest.approx(-math.log(5))


# ------------------------------------------------------------------- inputs


def test_comment_only_is_verbatim():
    assert build_input("comment", "  ty! ") == "  ty! "


def test_post_variant_needs_title():
    with pytest.raises(InputError):
        build_input("comment+post", "ty!", post="")


def test_full_variant_concatenates_in_order():
    text = build_input(InputVariant.FULL, "ty!", "Thanks thread", T0, "alice")
    assert text == "ty! <|endoftext|> Thanks thread <|endoftext|> 2020-03-15T00:00:00Z <|endoftext|> alice"
    assert comment_part(text) == "ty!"


def test_variant_parsing_and_default():
    assert DEFAULT_VARIANT is InputVariant.COMMENT_POST_TIME
    assert InputVariant.parse("comment+post").fields == ("comment", "post")
    with pytest.raises(ConfigError):
        InputVariant.parse("comment+time")


def test_format_time_is_utc_iso():
    assert format_time(0) == "1970-01-01T00:00:00Z"


# ----------------------------------------------------------------- accuracy


def test_accuracy_examples():
    truths = {"a": 1.0, "b": 2.0, "c": 2.0}
    assert binary_accuracy(truths, truths, [("a", "b"), ("a", "c")]) == 1.0
    t4 = {k: float(v) for k, v in zip("abcde", [1, 2, 3, 4, 5])}
    pairs = [("a", "b"), ("b", "c"), ("c", "d"), ("d", "e")]
    assert binary_accuracy({k: -v for k, v in t4.items()}, t4, pairs) == 0.0
    assert binary_accuracy({"a": 0, "b": 5, "c": 1}, truths, [("a", "b"), ("b", "c"), ("a", "c")]) == 1.0


def test_accuracy_all_tied_is_undefined():
    with pytest.warns(DegenerateWarning):
        assert math.isnan(binary_accuracy({"a": 1, "b": 2}, {"a": 1, "b": 1}, [("a", "b")]))


def test_accuracy_missing_member():
    with pytest.raises(InputError):
        binary_accuracy({"a": 1}, {"a": 1, "b": 2}, [("a", "b")])


TRANSFORMS = [
    lambda x: 3 * x + 7,
    lambda x: np.exp(x / 10),
    lambda x: x**3,
    np.arctan,
]


@given(
    st.lists(st.floats(-20, 20), min_size=2, max_size=15),
    st.lists(st.integers(-5, 5), min_size=2, max_size=15),
    st.sampled_from(range(len(TRANSFORMS))),
)
def test_accuracy_is_rank_invariant(scores, truths, which):
    n = min(len(scores), len(truths))
    ids = [f"i{k}" for k in range(n)]
    s = dict(zip(ids, scores))
    t = dict(zip(ids, map(float, truths)))
    pairs = [(a, b) for a in ids for b in ids if a < b]
    f = TRANSFORMS[which]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateWarning)
        base = binary_accuracy(s, t, pairs)
        moved = binary_accuracy({k: float(f(v)) for k, v in s.items()}, t, pairs)
    if not (math.isnan(base) and math.isnan(moved)):
        # a transform that collapses two distinct floats would change the answer
        if len({float(f(v)) for v in scores[:n]}) == len(set(scores[:n])):
            assert base == moved


# -------------------------------------------------------------------- zscore


def test_zscore_examples():
    assert zscore([1, 3]) == pytest.approx([-0.7071, 0.7071], abs=1e-4)
    with pytest.warns(DegenerateWarning):
        assert list(zscore([4, 4, 4])) == [0, 0, 0]
    with pytest.raises(InsufficientDataError):
        zscore([1])


@given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=40).filter(lambda v: np.std(v) > 1e-3))
def test_zscore_standardizes(values):
    z = zscore(values)
    assert z.mean() == pytest.approx(0, abs=1e-9)
    assert z.std(ddof=1) == pytest.approx(1, abs=1e-9)


def test_standardize_is_per_community():
    scores = [PreferenceScore("a", 1, "comment", "x"), PreferenceScore("b", 100, "comment", "y"),
              PreferenceScore("c", 3, "comment", "x"), PreferenceScore("d", 300, "comment", "y")]
    out = standardize_by_community(scores)
    assert [s.item_id for s in out] == ["a", "b", "c", "d"]
    assert [round(s.value, 4) for s in out] == [-0.7071, -0.7071, 0.7071, 0.7071]


# -------------------------------------------------------------------- deltas


class Recording:
    def __init__(self, inner):
        self.inner = inner
        self.seen = []

    def score(self, text):
        self.seen.append(text)
        return self.inner.score(text)


def test_delta_is_plain_difference_with_shared_context():
    backend = Recording(LexiconPreference({"formality": 1.0}))
    origin = comment()
    d = preference_delta(origin, passed("c1", "thank you very much"), backend, "comment+post+time+author", 0.2, 0.4)
    assert d.d_phi == pytest.approx(0.2)
    a, b = backend.seen
    assert a.split(INPUT_SEPARATOR)[1:] == b.split(INPUT_SEPARATOR)[1:]
    assert d.d_psi == backend.inner.score(b) - backend.inner.score(a)


def test_ty_to_thank_you_under_length_stub():
    d = preference_delta(comment(), passed("c1", "thank you"), LengthPreference(), DEFAULT_VARIANT, 0.2, 0.4)
    assert d.d_psi == pytest.approx(math.log(10) - math.log(4))


def test_delta_antisymmetric_under_swapped_roles():
    backend = LexiconPreference({"humor": 1.0, "politeness": 0.5})
    fwd = preference_delta(comment(body="lol ok"), passed("c1", "please, thank you"), backend, DEFAULT_VARIANT, 0.3, 0.8)
    back = preference_delta(comment(body="please, thank you"), passed("c1", "lol ok"), backend, DEFAULT_VARIANT, 0.8, 0.3)
    assert fwd.d_psi == pytest.approx(-back.d_psi)
    assert fwd.d_phi == pytest.approx(-back.d_phi)


def test_delta_refuses_unfiltered_or_foreign_rewrites():
    raw = SyntheticComment("c1", "formality", 4, "thank you")
    with pytest.raises(PipelineOrderError):
        preference_delta(comment(), raw, LengthPreference(), DEFAULT_VARIANT, 0.2, 0.4)
    with pytest.raises(InputError):
        preference_delta(comment(), passed("zz", "x"), LengthPreference(), DEFAULT_VARIANT, 0.2, 0.4)


def test_distill_pairs_and_standardizes():
    originals = [comment("a", "ok"), comment("b", "sure thing"), comment("c", "fine", community="other"),
                 comment("d", "fine then yes", community="other")]
    rewrites = [passed("a", "ok, thank you kindly"), passed("c", "fine by me", level=2), passed("d", "yes", level=1)]
    normness = {"a": 0.1, "a~formality~4": 0.7, "c": 0.5, "c~formality~2": 0.4, "b": 0.2}
    scores, deltas = distill(originals, rewrites, normness, LengthPreference())
    assert [d.synth_id for d in deltas] == ["a~formality~4", "c~formality~2"]
    by = {s.item_id: s.value for s in scores}
    for d in deltas:
        assert d.d_psi == pytest.approx(by[d.synth_id] - by[d.origin_id])
    forum = [s.value for s in scores if s.community == "forum"]
    assert np.mean(forum) == pytest.approx(0, abs=1e-12) and np.std(forum, ddof=1) == pytest.approx(1)
    assert deltas[0].d_phi == pytest.approx(0.6)


def test_distill_refuses_bad_rewrites():
    with pytest.raises(PipelineOrderError):
        distill([comment()], [SyntheticComment("c1", "formality", 2, "x")], {}, LengthPreference())
    with pytest.raises(InputError):
        distill([comment()], [passed("nope", "x")], {}, LengthPreference())


def test_scores_must_be_finite():
    with pytest.raises(ValueError):
        PreferenceScore("a", float("inf"), "comment")


def test_delta_phi_range_enforced():
    from valuescope.preference import PreferenceDelta

    with pytest.raises(ValueError):
        PreferenceDelta("a", "b", "c", "humor", 1.5, 0.0)
    assert dataclasses.asdict(PreferenceDelta("a", "b", "c", "humor", -1.0, 0.0))["d_phi"] == -1.0
