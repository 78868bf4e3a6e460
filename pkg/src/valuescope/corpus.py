"""Parsing and cleaning of community dump files.

Input is the usual newline-delimited dump layout: one JSON object per line,
submissions and comments in separate files (or mixed; records are told apart
by their fields). Only first-level comments survive :func:`preprocess`.
"""

from __future__ import annotations

import calendar
import dataclasses
import datetime as dt
import gzip
import hashlib
import json
import logging
import re
from collections import Counter
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .exceptions import ConfigError, InputError

logger = logging.getLogger(__name__)

DAY_SECONDS = 86_400
DELETED_SENTINELS = frozenset({"[deleted]", "[removed]"})
MEDIA_HINTS = frozenset({"image", "hosted:video", "rich:video"})
PREFERENCE_TRAIN = "preference-train"
ANALYSIS = "analysis"

_URL_ONLY = re.compile(r"^<?(?:https?://|www\.)\S+?>?$", re.IGNORECASE)


@dataclass(frozen=True)
class RawPost:
    post_id: str
    community: str
    author: str
    title: str
    body: str
    created_at: int
    has_media: bool = False


@dataclass(frozen=True)
class RawComment:
    comment_id: str
    parent_id: str
    post_id: str
    community: str
    author: str
    body: str
    created_at: int
    retrieved_at: int | None
    net_votes: int
    edited: bool = False
    deleted: bool = False


@dataclass(frozen=True)
class Comment:
    comment_id: str
    parent_id: str
    post_id: str
    community: str
    author: str
    body: str
    created_at: int
    retrieved_at: int | None
    net_votes: int
    post_title: str = ""
    partition: str = ""

    def to_record(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    @classmethod
    def from_record(cls, record: Mapping[str, Any]) -> "Comment":
        names = {f.name for f in dataclasses.fields(cls)}
        return cls(**{k: v for k, v in record.items() if k in names})


@dataclass(frozen=True, order=True)
class TimeBin:
    start: int
    end: int
    label: float

    @property
    def start_date(self) -> dt.date:
        return dt.datetime.fromtimestamp(self.start, dt.timezone.utc).date()


# --------------------------------------------------------------------- parsing


def _strip_prefix(thing_id: str, prefix: str) -> str:
    return thing_id[len(prefix):] if thing_id.startswith(prefix) else thing_id


def _as_time(value: Any) -> int | None:
    if value is None or value == "":
        return None
    return int(float(value))


def _has_media(obj: Mapping[str, Any]) -> bool:
    if obj.get("is_video") or obj.get("is_gallery"):
        return True
    if obj.get("media") or obj.get("secure_media"):
        return True
    return obj.get("post_hint") in MEDIA_HINTS


def _parse_post(obj: Mapping[str, Any]) -> RawPost:
    post_id = _strip_prefix(str(obj.get("id") or obj.get("name") or ""), "t3_")
    created = _as_time(obj.get("created_utc"))
    if not post_id or created is None or created <= 0:
        raise ValueError("post without id or creation time")
    return RawPost(
        post_id=post_id,
        community=str(obj.get("subreddit", "")),
        author=str(obj.get("author", "")),
        title=str(obj.get("title", "")),
        body=str(obj.get("selftext", "") or ""),
        created_at=created,
        has_media=_has_media(obj),
    )


def _parse_comment(obj: Mapping[str, Any]) -> RawComment:
    comment_id = _strip_prefix(str(obj.get("id") or ""), "t1_")
    parent = str(obj.get("parent_id") or "")
    link = str(obj.get("link_id") or "")
    created = _as_time(obj.get("created_utc"))
    retrieved = _as_time(obj.get("retrieved_on", obj.get("retrieved_utc")))
    if not comment_id or not parent or created is None or created <= 0:
        raise ValueError("comment without id, parent or creation time")
    if retrieved is not None and retrieved < created:
        raise ValueError("retrieved before created")
    post_id = _strip_prefix(link, "t3_") if link else _strip_prefix(parent, "t3_")
    body = str(obj.get("body", ""))
    if "score" in obj:
        votes = int(obj["score"])
    else:
        votes = int(obj.get("ups", 0)) - int(obj.get("downs", 0))
    return RawComment(
        comment_id=comment_id,
        parent_id=_strip_prefix(parent, "t3_"),
        post_id=post_id,
        community=str(obj.get("subreddit", "")),
        author=str(obj.get("author", "")),
        body=body,
        created_at=created,
        retrieved_at=retrieved,
        net_votes=votes,
        edited=bool(obj.get("edited", False)),
        deleted=body.strip() in DELETED_SENTINELS,
    )


def parse_dump(line_stream: Iterable[str | bytes]) -> tuple[list[RawPost], list[RawComment], int]:
    """Parse dump lines into posts and comments.

    Malformed lines are counted in the third return value and never abort the
    stream. An exception raised by the stream itself (I/O, decoding of the
    whole file) is fatal and surfaces as :class:`InputError`.
    """
    posts: list[RawPost] = []
    comments: list[RawComment] = []
    skipped = 0
    iterator = iter(line_stream)
    while True:
        try:
            line = next(iterator)
        except StopIteration:
            break
        except (OSError, UnicodeDecodeError, EOFError) as exc:
            raise InputError(f"unreadable dump stream: {exc}") from exc
        try:
            if isinstance(line, bytes):
                line = line.decode("utf-8")
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            if not isinstance(obj, dict):
                raise ValueError("record is not an object")
            if "title" in obj:
                posts.append(_parse_post(obj))
            elif "body" in obj:
                comments.append(_parse_comment(obj))
            else:
                raise ValueError("neither a post nor a comment")
        except (ValueError, TypeError, UnicodeDecodeError):
            skipped += 1
    return posts, comments, skipped


def read_dump(*paths: str | Path) -> tuple[list[RawPost], list[RawComment], int]:
    """Parse one or more dump files (plain or ``.gz``)."""
    posts: list[RawPost] = []
    comments: list[RawComment] = []
    skipped = 0
    for path in paths:
        path = Path(path)
        opener = gzip.open if path.suffix == ".gz" else open
        try:
            fh = opener(path, "rt", encoding="utf-8")
        except OSError as exc:
            raise InputError(f"cannot open {path}: {exc}") from exc
        with fh:
            p, c, s = parse_dump(fh)
        posts += p
        comments += c
        skipped += s
    return posts, comments, skipped


# ---------------------------------------------------------------- preprocessing


def is_url_only(text: str) -> bool:
    return bool(_URL_ONLY.match(text.strip()))


def exclusion_reason(comment, post: RawPost | None, scrape_time: int | None = None) -> str | None:
    """Name the first exclusion rule the comment violates, or None if it is kept.

    ``comment`` may be a :class:`RawComment` or an already cleaned
    :class:`Comment` (which carries no edited/deleted flags).
    """
    if post is None:
        return "unresolved_post"
    if comment.parent_id != comment.post_id:
        return "not_first_level"
    if getattr(comment, "deleted", False) or comment.body.strip() in DELETED_SENTINELS:
        return "deleted"
    if getattr(comment, "edited", False):
        return "edited"
    if post.has_media:
        return "media_post"
    if is_url_only(comment.body):
        return "url_only"
    if comment.created_at - post.created_at > DAY_SECONDS:
        return "late_comment"
    seen_at = comment.retrieved_at if comment.retrieved_at is not None else scrape_time
    if seen_at is None:
        return "no_retrieval_time"
    if seen_at - comment.created_at < DAY_SECONDS:
        return "too_fresh"
    return None


def preprocess(
    comments: Sequence,
    posts: Sequence[RawPost],
    scrape_time: int | None = None,
    stats: Counter | None = None,
) -> list[Comment]:
    """Apply the exclusion rules and keep first-level comments.

    A comment's vote count is only trusted if it had at least a day to
    accumulate votes: the dump's own retrieval time is used when present,
    otherwise ``scrape_time``. Drop counts per rule are added to ``stats``.
    """
    if scrape_time is not None and comments and scrape_time < min(c.created_at for c in comments):
        raise ConfigError("scrape_time precedes every comment's creation time")
    by_id = {p.post_id: p for p in posts}
    counts = Counter()
    kept: list[Comment] = []
    for c in comments:
        post = by_id.get(c.post_id)
        reason = exclusion_reason(c, post, scrape_time)
        if reason is not None:
            counts[reason] += 1
            continue
        counts["kept"] += 1
        kept.append(
            Comment(
                comment_id=c.comment_id,
                parent_id=c.parent_id,
                post_id=c.post_id,
                community=c.community,
                author=c.author,
                body=c.body,
                created_at=c.created_at,
                retrieved_at=c.retrieved_at,
                net_votes=c.net_votes,
                post_title=post.title,
                partition=getattr(c, "partition", ""),
            )
        )
    if stats is not None:
        stats.update(counts)
    logger.info("preprocess: %s", dict(sorted(counts.items())))
    return kept


def assign_partition(comments: Iterable[Comment], train_fraction: float = 0.5, salt: str = "") -> list[Comment]:
    """Tag comments as preference-train or analysis by a stable hash of their id."""
    if not 0.0 <= train_fraction <= 1.0:
        raise ConfigError("train_fraction must lie in [0, 1]")
    out = []
    for c in comments:
        h = hashlib.sha256(f"{salt}:{c.comment_id}".encode()).digest()
        u = int.from_bytes(h[:8], "big") / 2**64
        out.append(dataclasses.replace(c, partition=PREFERENCE_TRAIN if u < train_fraction else ANALYSIS))
    return out


# ---------------------------------------------------------------------- binning


def _add_months(d: dt.date, months: int) -> dt.date:
    total = d.year * 12 + (d.month - 1) + months
    return dt.date(total // 12, total % 12 + 1, 1)


def _epoch(d: dt.date) -> int:
    return calendar.timegm(d.timetuple())


def make_time_bin(start: dt.date, width_months: int) -> TimeBin:
    end = _add_months(start, width_months)
    # labelled at the bin midpoint: Jan-Jun 2020 -> 2020.25
    label = start.year + (start.month - 1 + width_months / 2) / 12
    return TimeBin(_epoch(start), _epoch(end), round(label, 6))


def time_bin(
    comments: Sequence[Comment],
    width_months: int = 6,
    origin: dt.date | None = None,
) -> dict[TimeBin, list[Comment]]:
    """Partition comments into calendar bins of ``width_months`` months (UTC).

    Bins are aligned on ``origin`` (default: 1 January of the earliest
    comment's year) and run contiguously from the first to the last occupied
    bin, so interior bins may be empty.
    """
    if width_months <= 0 or 12 % width_months:
        raise ConfigError("width_months must divide 12")
    if not comments:
        return {}
    first = min(c.created_at for c in comments)
    if origin is None:
        origin = dt.date(dt.datetime.fromtimestamp(first, dt.timezone.utc).year, 1, 1)
    origin = dt.date(origin.year, origin.month, 1) if origin.day != 1 else origin
    if _epoch(origin) > first:
        raise ConfigError("origin must precede the earliest comment")

    def index(ts: int) -> int:
        d = dt.datetime.fromtimestamp(ts, dt.timezone.utc)
        months = (d.year - origin.year) * 12 + (d.month - origin.month)
        return months // width_months

    grouped: dict[int, list[Comment]] = {}
    for c in sorted(comments, key=lambda c: (c.created_at, c.comment_id)):
        grouped.setdefault(index(c.created_at), []).append(c)
    lo, hi = min(grouped), max(grouped)
    return {
        make_time_bin(_add_months(origin, i * width_months), width_months): grouped.get(i, [])
        for i in range(lo, hi + 1)
    }


@dataclass(frozen=True)
class Period:
    """Whole calendar years [first_year, last_year], e.g. ``Period.parse("2019-2020")``."""

    first_year: int
    last_year: int

    @classmethod
    def parse(cls, text: str) -> "Period":
        m = re.fullmatch(r"\s*(\d{4})\s*(?:-\s*(\d{4}))?\s*", text)
        if not m:
            raise ConfigError(f"bad period {text!r}; expected YYYY or YYYY-YYYY")
        a = int(m.group(1))
        b = int(m.group(2) or a)
        if b < a:
            raise ConfigError(f"bad period {text!r}: end before start")
        return cls(a, b)

    @property
    def start(self) -> int:
        return _epoch(dt.date(self.first_year, 1, 1))

    @property
    def end(self) -> int:
        return _epoch(dt.date(self.last_year + 1, 1, 1))

    def contains(self, ts: int) -> bool:
        return self.start <= ts < self.end

    def __str__(self) -> str:
        return f"{self.first_year}-{self.last_year}"
