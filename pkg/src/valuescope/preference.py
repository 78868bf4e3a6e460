"""Community preference: training labels, model inputs, evaluation and deltas.

The preference model itself lives behind :class:`PreferenceBackend`; this
module builds its inputs, checks its rankings against vote labels, and turns
its scores into per-rewrite deltas that feed the return-potential curves.
"""

from __future__ import annotations

import datetime as dt
import enum
import logging
import math
import warnings
from collections import defaultdict
from collections.abc import Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .corpus import Comment
from .exceptions import ConfigError, DegenerateWarning, InputError, InsufficientDataError, PipelineOrderError
from .gateway.backends import PreferenceBackend
from .simulation import SyntheticComment

logger = logging.getLogger(__name__)

INPUT_SEPARATOR = " <|endoftext|> "


class InputVariant(str, enum.Enum):
    COMMENT = "comment"
    COMMENT_POST = "comment+post"
    COMMENT_POST_TIME = "comment+post+time"
    FULL = "comment+post+time+author"

    @classmethod
    def parse(cls, value: "str | InputVariant") -> "InputVariant":
        try:
            return cls(value)
        except ValueError:
            names = ", ".join(v.value for v in cls)
            raise ConfigError(f"unknown input variant {value!r}; expected one of {names}") from None

    @property
    def fields(self) -> tuple[str, ...]:
        return ("comment", "post", "time", "author")[: len(self.value.split("+"))]


DEFAULT_VARIANT = InputVariant.COMMENT_POST_TIME


@dataclass(frozen=True)
class PreferenceLabel:
    comment_id: str
    net_votes: int
    label: float


@dataclass(frozen=True)
class PreferenceScore:
    item_id: str
    value: float
    variant: str
    community: str = ""

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ValueError(f"preference score for {self.item_id} is not finite")


@dataclass(frozen=True)
class PreferenceDelta:
    origin_id: str
    synth_id: str
    community: str
    dimension: str
    d_phi: float
    d_psi: float

    def __post_init__(self):
        if not -1.0 <= self.d_phi <= 1.0:
            raise ValueError(f"normness delta {self.d_phi} outside [-1, 1]")


def label_transform(net_votes: int) -> float:
    """Signed log: sign(x) * ln(1 + |x|)."""
    return math.copysign(math.log1p(abs(net_votes)), net_votes) if net_votes else 0.0


def preference_labels(comments: Sequence[Comment]) -> list[PreferenceLabel]:
    return [PreferenceLabel(c.comment_id, c.net_votes, label_transform(c.net_votes)) for c in comments]


def format_time(value: int | float | dt.datetime) -> str:
    """ISO-8601 UTC with a trailing Z, second precision."""
    if isinstance(value, dt.datetime):
        stamp = value.astimezone(dt.timezone.utc) if value.tzinfo else value.replace(tzinfo=dt.timezone.utc)
    else:
        stamp = dt.datetime.fromtimestamp(int(value), tz=dt.timezone.utc)
    return stamp.strftime("%Y-%m-%dT%H:%M:%SZ")


def build_input(
    variant: str | InputVariant,
    comment: str,
    post: str | None = None,
    time: int | float | dt.datetime | None = None,
    author: str | None = None,
) -> str:
    """Concatenate the fields ``variant`` asks for: body, title, time, author."""
    variant = InputVariant.parse(variant)
    values = {"comment": comment, "post": post, "time": time, "author": author}
    parts = []
    for name in variant.fields:
        value = values[name]
        if value is None or (isinstance(value, str) and not value.strip()):
            raise InputError(f"input variant {variant.value!r} needs a non-empty {name}")
        parts.append(format_time(value) if name == "time" else value)
    return INPUT_SEPARATOR.join(parts)


def comment_part(model_input: str) -> str:
    """The comment segment of a built input."""
    return model_input.split(INPUT_SEPARATOR, 1)[0]


def comment_input(comment: Comment, variant: str | InputVariant, body: str | None = None) -> str:
    """Model input for ``comment``, optionally with its body replaced (for rewrites)."""
    return build_input(variant, comment.body if body is None else body, comment.post_title, comment.created_at, comment.author)


# ------------------------------------------------------------------ evaluation


def binary_accuracy(scores: Mapping[str, float], truths: Mapping[str, float], pairs: Sequence[tuple[str, str]]) -> float:
    """Share of pairs whose score order matches the truth order.

    Pairs with tied truths are left out. If every pair is tied the result is
    NaN and a :class:`DegenerateWarning` is issued.
    """
    missing = {x for p in pairs for x in p if x not in scores or x not in truths}
    if missing:
        raise InputError(f"{len(missing)} pair member(s) lack a score or label, e.g. {sorted(missing)[0]}")
    hits = total = 0
    for a, b in pairs:
        truth = np.sign(truths[a] - truths[b])
        if truth == 0:
            continue
        total += 1
        hits += bool(np.sign(scores[a] - scores[b]) == truth)
    if total == 0:
        warnings.warn("binary accuracy undefined: every pair has tied labels", DegenerateWarning, stacklevel=2)
        return float("nan")
    return hits / total


def zscore(values: Sequence[float]) -> np.ndarray:
    """Standardise with the sample standard deviation.

    Constant input gives zeros and a :class:`DegenerateWarning`.
    """
    x = np.asarray(values, dtype=float)
    if x.size < 2:
        raise InsufficientDataError("z-scoring needs at least two values")
    sd = x.std(ddof=1)
    if sd == 0 or not np.isfinite(sd):
        warnings.warn("z-score undefined for constant values; returning zeros", DegenerateWarning, stacklevel=2)
        return np.zeros_like(x)
    return (x - x.mean()) / sd


def standardize_by_community(scores: Sequence[PreferenceScore]) -> list[PreferenceScore]:
    """Z-score each community's scores separately; order is preserved."""
    groups: dict[str, list[int]] = defaultdict(list)
    for k, s in enumerate(scores):
        groups[s.community].append(k)
    out: list[PreferenceScore | None] = [None] * len(scores)
    for community, idx in sorted(groups.items()):
        z = zscore([scores[k].value for k in idx])
        for k, v in zip(idx, z.tolist()):
            s = scores[k]
            out[k] = PreferenceScore(s.item_id, v, s.variant, s.community)
    return out  # type: ignore[return-value]


# --------------------------------------------------------------------- deltas


def score_texts(
    inputs: Mapping[str, str],
    backend: PreferenceBackend,
    variant: str | InputVariant,
    communities: Mapping[str, str] | None = None,
    workers: int = 1,
) -> list[PreferenceScore]:
    """Score prepared model inputs; output sorted by id."""
    variant = InputVariant.parse(variant)
    ids = sorted(inputs)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            values = list(pool.map(lambda i: backend.score(inputs[i]), ids))
    else:
        values = [backend.score(inputs[i]) for i in ids]
    communities = communities or {}
    return [PreferenceScore(i, float(v), variant.value, communities.get(i, "")) for i, v in zip(ids, values)]


def preference_delta(
    origin: Comment,
    rewrite: SyntheticComment,
    backend: PreferenceBackend,
    variant: str | InputVariant,
    phi_origin: float,
    phi_rewrite: float,
    scale: tuple[float, float] = (0.0, 1.0),
) -> PreferenceDelta:
    """Delta between a rewrite and its original under identical context.

    Both texts are scored with the original's title, time and author. The raw
    scores are mapped through ``(value - center) / spread`` before
    subtracting, which lets callers supply the population z-score.
    """
    if rewrite.origin_id != origin.comment_id:
        raise InputError(f"rewrite {rewrite.synth_id} does not derive from {origin.comment_id}")
    if not rewrite.passed:
        raise PipelineOrderError(f"rewrite {rewrite.synth_id} has not passed every filter")
    center, spread = scale
    psi_o = (backend.score(comment_input(origin, variant)) - center) / spread
    psi_r = (backend.score(comment_input(origin, variant, rewrite.text)) - center) / spread
    return PreferenceDelta(origin.comment_id, rewrite.synth_id, origin.community, rewrite.dimension, phi_rewrite - phi_origin, psi_r - psi_o)


def distill(
    originals: Sequence[Comment],
    rewrites: Sequence[SyntheticComment],
    normness: Mapping[str, float],
    backend: PreferenceBackend,
    variant: str | InputVariant = DEFAULT_VARIANT,
    standardize: bool = True,
    workers: int = 1,
) -> tuple[list[PreferenceScore], list[PreferenceDelta]]:
    """Score originals and rewrites, z-score per community, and pair them up.

    Returns every score (standardised when ``standardize``) and one delta per
    rewrite whose pair has normness for both sides. Rewrites that have not
    passed the filters are refused.
    """
    variant = InputVariant.parse(variant)
    by_id = {c.comment_id: c for c in originals}
    unfiltered = [r.synth_id for r in rewrites if not r.passed]
    if unfiltered:
        raise PipelineOrderError(f"{len(unfiltered)} rewrite(s) have not passed every filter, e.g. {unfiltered[0]}")
    orphans = [r.synth_id for r in rewrites if r.origin_id not in by_id]
    if orphans:
        raise InputError(f"{len(orphans)} rewrite(s) reference unknown originals, e.g. {orphans[0]}")

    inputs = {c.comment_id: comment_input(c, variant) for c in originals}
    communities = {c.comment_id: c.community for c in originals}
    for r in rewrites:
        inputs[r.synth_id] = comment_input(by_id[r.origin_id], variant, r.text)
        communities[r.synth_id] = by_id[r.origin_id].community
    scores = score_texts(inputs, backend, variant, communities, workers)
    if standardize:
        scores = standardize_by_community(scores)
    value = {s.item_id: s.value for s in scores}

    deltas = []
    skipped = 0
    for r in sorted(rewrites, key=lambda r: r.synth_id):
        if r.origin_id not in normness or r.synth_id not in normness:
            skipped += 1
            continue
        o = by_id[r.origin_id]
        deltas.append(
            PreferenceDelta(
                r.origin_id,
                r.synth_id,
                o.community,
                r.dimension,
                float(normness[r.synth_id] - normness[r.origin_id]),
                value[r.synth_id] - value[r.origin_id],
            )
        )
    if skipped:
        logger.warning("distill: %d rewrite(s) skipped for lack of normness on one side", skipped)
    return scores, deltas
