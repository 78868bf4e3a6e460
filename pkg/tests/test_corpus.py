from __future__ import annotations

import calendar
import datetime as dt
import json
from collections import Counter

import pytest
from hypothesis import given
from hypothesis import strategies as st

from valuescope.corpus import (
    DAY_SECONDS,
    Comment,
    Period,
    RawComment,
    RawPost,
    assign_partition,
    exclusion_reason,
    is_url_only,
    parse_dump,
    preprocess,
    read_dump,
    time_bin,
)
from valuescope.exceptions import ConfigError, InputError

POST_T = calendar.timegm(dt.datetime(2020, 3, 1, 12).timetuple())


def ts(y, m, d, h=12):
    return calendar.timegm(dt.datetime(y, m, d, h).timetuple())


def post(pid="p1", created=POST_T, media=False, title="A title"):
    return RawPost(pid, "forum", "op", title, "", created, media)


def raw(cid="c1", *, after=3600, retrieved_after=30 * DAY_SECONDS, body="hello there", parent="p1",
        edited=False, deleted=False, post_id="p1", base=POST_T):
    created = base + after
    retrieved = None if retrieved_after is None else created + retrieved_after
    return RawComment(cid, parent, post_id, "forum", "u", body, created, retrieved, 3, edited, deleted)


def comment(cid, created, community="forum"):
    return Comment(cid, "p", "p", community, "u", "text", created, created + 10 * DAY_SECONDS, 1)


# ------------------------------------------------------------------ parse_dump


def test_parse_empty_stream():
    assert parse_dump([]) == ([], [], 0)


def test_parse_valid_comment_and_truncated_line():
    record = {"id": "c1", "parent_id": "t3_p1", "link_id": "t3_p1", "subreddit": "f", "author": "a",
              "body": "hi", "created_utc": 100, "retrieved_on": 200, "score": 4}
    posts, comments, skipped = parse_dump([json.dumps(record), '{"id": "c2", "bod'])
    assert (len(posts), len(comments), skipped) == (0, 1, 1)
    c = comments[0]
    assert (c.comment_id, c.post_id, c.parent_id, c.net_votes) == ("c1", "p1", "p1", 4)


def test_parse_fixture_counts(small_dump):
    posts, comments, skipped = read_dump(small_dump)
    assert (len(posts), len(comments), skipped) == (10, 40, 0)


def test_parse_maps_dump_fields():
    lines = [
        json.dumps({"id": "c1", "parent_id": "t3_p", "link_id": "t3_p", "body": "[removed]", "created_utc": 5,
                    "ups": 7, "downs": 2, "edited": 1600000000}),
        json.dumps({"id": "p", "title": "t", "created_utc": 1, "is_video": True}),
    ]
    posts, comments, _ = parse_dump(lines)
    assert posts[0].has_media
    assert comments[0].deleted and comments[0].edited and comments[0].net_votes == 5


def test_parse_counts_records_that_break_invariants():
    lines = [
        json.dumps({"id": "", "parent_id": "t3_p", "body": "x", "created_utc": 5}),
        json.dumps({"id": "c", "parent_id": "t3_p", "body": "x", "created_utc": 50, "retrieved_on": 10}),
        json.dumps([1, 2]),
        json.dumps({"something": "else"}),
        "",
    ]
    assert parse_dump(lines) == ([], [], 4)


def test_unreadable_stream_is_fatal():
    def broken():
        yield "{}"
        raise OSError("disk gone")

    with pytest.raises(InputError):
        parse_dump(broken())


def test_missing_file_is_fatal(tmp_path):
    with pytest.raises(InputError):
        read_dump(tmp_path / "absent.jsonl")


def test_read_gzip(tmp_path, small_dump):
    import gzip

    gz = tmp_path / "d.jsonl.gz"
    gz.write_bytes(gzip.compress(small_dump.read_bytes()))
    assert [len(x) if isinstance(x, list) else x for x in read_dump(gz)] == [10, 40, 0]


# ------------------------------------------------------------------ preprocess


def test_clean_comment_kept():
    kept = preprocess([raw()], [post()])
    assert [c.comment_id for c in kept] == ["c1"]
    assert kept[0].post_title == "A title"


def test_edited_comment_dropped():
    assert preprocess([raw(edited=True)], [post()]) == []


def test_late_comment_dropped():
    # 90,000 s after the post is past the one-day limit
    assert preprocess([raw(after=90_000)], [post()]) == []
    assert len(preprocess([raw(after=DAY_SECONDS)], [post()])) == 1


@pytest.mark.parametrize(
    "kwargs, posts, reason",
    [
        ({"deleted": True}, [post()], "deleted"),
        ({"body": "[deleted]"}, [post()], "deleted"),
        ({"body": "  https://example.com/x  "}, [post()], "url_only"),
        ({"parent": "c0"}, [post()], "not_first_level"),
        ({}, [post(media=True)], "media_post"),
        ({"retrieved_after": DAY_SECONDS - 1}, [post()], "too_fresh"),
        ({"post_id": "nope", "parent": "nope"}, [post()], "unresolved_post"),
    ],
)
def test_exclusion_rules(kwargs, posts, reason):
    c = raw(**kwargs)
    stats = Counter()
    assert preprocess([c], posts, stats=stats) == []
    assert stats[reason] == 1


def test_scrape_time_used_without_retrieval_time():
    c = raw(retrieved_after=None)
    assert preprocess([c], [post()]) == []
    assert preprocess([c], [post()], scrape_time=c.created_at + 2 * DAY_SECONDS) != []
    assert preprocess([c], [post()], scrape_time=c.created_at + 100) == []


def test_scrape_time_before_all_comments_is_config_error():
    with pytest.raises(ConfigError):
        preprocess([raw()], [post()], scrape_time=POST_T - 10)


def test_url_detection():
    assert is_url_only("http://a.b/c")
    assert is_url_only("www.example.org")
    assert not is_url_only("see http://a.b/c for details")


def test_desk_fixture_ingest(desk_dump):
    posts, comments, skipped = read_dump(desk_dump)
    assert (len(posts), len(comments), skipped) == (120, 600, 2)
    kept = preprocess(comments, posts)
    assert len(kept) == 532


@st.composite
def raw_batches(draw):
    posts = [post("p1"), post("p2", media=True)]
    n = draw(st.integers(0, 12))
    out = []
    for k in range(n):
        out.append(raw(
            f"c{k}",
            after=draw(st.integers(1, 2 * DAY_SECONDS)),
            retrieved_after=draw(st.one_of(st.none(), st.integers(0, 3 * DAY_SECONDS))),
            body=draw(st.sampled_from(["ok then", "[deleted]", "https://x.y", "thanks!"])),
            edited=draw(st.booleans()),
            post_id=draw(st.sampled_from(["p1", "p2", "p3"])),
            parent=draw(st.sampled_from(["p1", "p2", "c0"])),
        ))
    return out, posts


@given(raw_batches())
def test_preprocess_is_idempotent_and_predicates_hold(batch):
    comments, posts = batch
    once = preprocess(comments, posts)
    assert preprocess(once, posts) == once
    by_id = {p.post_id: p for p in posts}
    for c in once:
        assert exclusion_reason(c, by_id.get(c.post_id)) is None


# -------------------------------------------------------------------- time_bin


def test_time_bin_label_is_half_year_midpoint():
    bins = time_bin([comment("a", ts(2020, 3, 15))], 6, origin=dt.date(2019, 1, 1))
    (b,) = bins
    assert b.label == 2020.25
    assert b.start_date == dt.date(2020, 1, 1)
    assert b.end == ts(2020, 7, 1, 0)


def test_same_half_year_same_bin():
    bins = time_bin([comment("a", ts(2021, 7, 2)), comment("b", ts(2021, 12, 30))])
    assert len(bins) == 1
    assert len(next(iter(bins.values()))) == 2


def test_five_years_give_ten_bins():
    cs = [comment(f"c{y}{m}", ts(y, m, 10)) for y in range(2019, 2024) for m in (1, 12)]
    bins = time_bin(cs, 6)
    assert len(bins) == 10
    assert [b.label for b in sorted(bins)] == [y + h for y in range(2019, 2024) for h in (0.25, 0.75)]


def test_time_bin_empty_and_bad_width():
    assert time_bin([]) == {}
    with pytest.raises(ConfigError):
        time_bin([comment("a", ts(2020, 1, 2))], 5)
    with pytest.raises(ConfigError):
        time_bin([comment("a", ts(2020, 1, 2))], 6, origin=dt.date(2021, 1, 1))


@given(st.lists(st.integers(ts(2015, 1, 1), ts(2024, 12, 31)), max_size=40), st.sampled_from([1, 2, 3, 4, 6, 12]))
def test_time_bin_partitions_input(times, width):
    cs = [comment(f"c{k}", t) for k, t in enumerate(times)]
    bins = time_bin(cs, width)
    seen = [c.comment_id for members in bins.values() for c in members]
    assert sorted(seen) == sorted(c.comment_id for c in cs)
    for b, members in bins.items():
        assert all(b.start <= c.created_at < b.end for c in members)
    ordered = sorted(bins)
    assert all(a.end == b.start for a, b in zip(ordered, ordered[1:]))


# ---------------------------------------------------------------- partitioning


def test_partition_is_stable_and_salted():
    cs = [comment(f"c{k}", POST_T) for k in range(400)]
    a = assign_partition(cs, 0.3)
    assert a == assign_partition(cs, 0.3)
    share = sum(c.partition == "preference-train" for c in a) / len(a)
    assert 0.22 < share < 0.38
    assert [c.partition for c in a] != [c.partition for c in assign_partition(cs, 0.3, salt="x")]
    with pytest.raises(ConfigError):
        assign_partition(cs, 1.5)


def test_period_parse():
    p = Period.parse("2019-2020")
    assert p.contains(ts(2020, 12, 31)) and not p.contains(ts(2021, 1, 1, 0))
    assert str(Period.parse("2021")) == "2021-2021"
    with pytest.raises(ConfigError):
        Period.parse("2021-2019")
