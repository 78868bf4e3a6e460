"""Continuous normness scales from pairwise judgments.

A comment's normness is its win-rate: the share of its comparisons in which
the judge found it further toward the high pole of the dimension. With
every pair judged once this is exactly the complete-graph win-rate; with a
sampled graph it is wins / comparisons.
"""

from __future__ import annotations

import logging
import warnings
from collections import Counter, defaultdict
from collections.abc import Callable, Hashable, Iterable, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from math import comb

import numpy as np

from .dimensions import NormDimension, get_dimension
from .exceptions import ConfigError, DegenerateWarning, ValueScopeError
from .gateway.backends import Context, LikertRater, PairwiseJudge

logger = logging.getLogger(__name__)

DEFAULT_MIN_COMPARISONS = 30
DEFAULT_JUDGE_ATTEMPTS = 2
DISCARD_LABELS = ("hard-to-tell", "media-needed")

__all__ = [
    "ComparisonGraph",
    "LikertRating",
    "NormDimension",
    "NormnessScore",
    "PairwiseLabel",
    "contradiction_rate",
    "fleiss_kappa",
    "get_dimension",
    "label_pairs",
    "majority_label",
    "rate_comments",
    "sample_matchings",
    "sample_pairs",
    "stratified_sample",
    "verbosity_scale",
    "win_rate",
]


@dataclass(frozen=True)
class LikertRating:
    comment_id: str
    dimension: str
    rating: int
    community: str = ""

    def __post_init__(self):
        if self.rating not in (1, 2, 3, 4, 5):
            raise ValueError(f"Likert rating must be in 1..5, got {self.rating}")


@dataclass(frozen=True)
class PairwiseLabel:
    """``beta == 1`` means ``j`` was judged higher on the dimension than ``i``."""

    i: str
    j: str
    dimension: str
    beta: int

    def __post_init__(self):
        if self.i == self.j:
            raise ValueError("a comment cannot be compared with itself")
        if self.beta not in (0, 1):
            raise ValueError("beta must be 0 or 1")

    @property
    def winner(self) -> str:
        return self.j if self.beta else self.i

    @property
    def loser(self) -> str:
        return self.i if self.beta else self.j


@dataclass
class ComparisonGraph:
    dimension: str
    comments: frozenset[str]
    labels: list[PairwiseLabel] = field(default_factory=list)
    dropped: int = 0
    failed_attempts: int = 0

    def __post_init__(self):
        self.comments = frozenset(self.comments)
        for lab in self.labels:
            if lab.i not in self.comments or lab.j not in self.comments:
                raise ValueError(f"label ({lab.i}, {lab.j}) references a comment outside the graph")

    @property
    def counts(self) -> Counter:
        c = Counter()
        for lab in self.labels:
            c[lab.i] += 1
            c[lab.j] += 1
        return c

    @property
    def isolated(self) -> list[str]:
        counts = self.counts
        return sorted(c for c in self.comments if counts[c] == 0)


@dataclass(frozen=True)
class NormnessScore:
    comment_id: str
    dimension: str
    value: float
    comparisons: int
    reliable: bool = True


# -------------------------------------------------------------------- sampling


def rate_comments(
    texts: Mapping[str, str],
    dimension: str,
    rater: LikertRater,
    communities: Mapping[str, str] | None = None,
    contexts: Mapping[str, Context] | None = None,
) -> list[LikertRating]:
    """Rate every comment; comments whose rating cannot be parsed are skipped."""
    out = []
    failed = 0
    for cid in sorted(texts):
        ctx = contexts.get(cid, ("", "")) if contexts else ("", "")
        try:
            rating = rater.rate(texts[cid], dimension, ctx)
        except ValueScopeError:
            failed += 1
            continue
        out.append(LikertRating(cid, dimension, rating, (communities or {}).get(cid, "")))
    if failed:
        logger.warning("rate_comments: %d comment(s) could not be rated", failed)
    return out


def stratified_sample(
    ratings: Sequence[LikertRating], k_per_scale: int, seed: int
) -> tuple[list[str], dict[tuple[str, int], int]]:
    """Draw up to ``k_per_scale`` comments per (community, rating) stratum.

    Returns the sampled ids and a shortfall map ``{(community, rating): missing}``
    for strata holding fewer than ``k_per_scale`` comments.
    """
    if k_per_scale <= 0:
        raise ConfigError("k_per_scale must be positive")
    strata: dict[tuple[str, int], list[str]] = defaultdict(list)
    for r in ratings:
        strata[(r.community, r.rating)].append(r.comment_id)
    rng = np.random.default_rng(seed)
    ids: list[str] = []
    shortfall: dict[tuple[str, int], int] = {}
    for community in sorted({c for c, _ in strata}):
        for scale in (1, 2, 3, 4, 5):
            pool = sorted(set(strata.get((community, scale), [])))
            take = min(k_per_scale, len(pool))
            if take < k_per_scale:
                shortfall[(community, scale)] = k_per_scale - take
            if take:
                ids.extend(pool[i] for i in rng.choice(len(pool), size=take, replace=False))
    return ids, shortfall


def _unrank_pairs(index: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Map lexicographic combination indices to (i, j) with i < j."""
    k = index.astype(np.int64)
    i = (n - 2 - np.floor(np.sqrt(-8.0 * k + 4.0 * n * (n - 1) - 7) / 2.0 - 0.5)).astype(np.int64)
    row_start = lambda r: r * n - r * (r + 1) // 2  # noqa: E731
    # guard against float rounding near row boundaries
    i = np.where(row_start(i) > k, i - 1, i)
    i = np.where(row_start(i + 1) <= k, i + 1, i)
    j = k - row_start(i) + i + 1
    return i, j


def sample_pairs(comments: Sequence[str], m: int, seed: int) -> list[tuple[str, str]]:
    """Draw ``m`` distinct unordered pairs uniformly without replacement."""
    ids = sorted(set(comments))
    if len(ids) != len(comments):
        raise ConfigError("comment ids must be unique")
    total = comb(len(ids), 2)
    if m < 0 or m > total:
        raise ConfigError(f"cannot draw {m} distinct pairs from {len(ids)} comments (max {total})")
    if m == 0:
        return []
    rng = np.random.default_rng(seed)
    picks = rng.choice(total, size=m, replace=False)
    i, j = _unrank_pairs(picks, len(ids))
    return [(ids[a], ids[b]) for a, b in zip(i.tolist(), j.tolist())]


def sample_matchings(comments: Sequence[str], rounds: int, seed: int) -> list[tuple[str, str]]:
    """Pairs from ``rounds`` random perfect matchings.

    Every comment lands in exactly ``rounds`` pairs when the count is even
    (one extra pair per round for a single leftover comment otherwise).
    The same pair may recur across rounds.
    """
    ids = sorted(set(comments))
    n = len(ids)
    if rounds < 0:
        raise ConfigError("rounds must be non-negative")
    if n < 2:
        return []
    rng = np.random.default_rng(seed)
    pairs: list[tuple[str, str]] = []
    for _ in range(rounds):
        perm = rng.permutation(n)
        for a, b in zip(perm[0:n - 1:2], perm[1::2]):
            pairs.append((ids[a], ids[b]))
        if n % 2:
            last = perm[-1]
            other = perm[rng.integers(0, n - 1)]
            pairs.append((ids[last], ids[other]))
    return pairs


# -------------------------------------------------------------------- labeling


def label_pairs(
    pairs: Sequence[tuple[str, str]],
    dimension: str | NormDimension,
    judge: PairwiseJudge,
    texts: Mapping[str, str],
    contexts: Mapping[str, Context] | Callable[[str], Context] | None = None,
    seed: int = 0,
    max_attempts: int = DEFAULT_JUDGE_ATTEMPTS,
    workers: int = 1,
) -> ComparisonGraph:
    """Ask ``judge`` about each pair and collect the answers into a graph.

    Presentation order is randomised per pair (seeded) so position bias in
    the judge averages out. A pair whose answer cannot be obtained within
    ``max_attempts`` tries is dropped and counted.
    """
    dim = get_dimension(dimension)
    if max_attempts < 1:
        raise ConfigError("max_attempts must be >= 1")
    if callable(contexts):
        ctx = contexts
    else:
        table = contexts or {}
        ctx = lambda cid: table.get(cid, ("", ""))  # noqa: E731
    swap = np.random.default_rng(seed).random(len(pairs)) < 0.5

    def one(item):
        (a, b), flip = item
        first, second = (b, a) if flip else (a, b)
        failures = 0
        for _ in range(max_attempts):
            try:
                choice = judge.judge(texts[first], texts[second], dim.name, (ctx(first), ctx(second)))
            except ValueScopeError as exc:
                failures += 1
                logger.debug("judge failed on (%s, %s): %s", first, second, exc)
                continue
            return PairwiseLabel(first, second, dim.name, 1 if choice == "second" else 0), failures
        return None, failures

    items = list(zip(pairs, swap.tolist()))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, items))
    else:
        results = [one(item) for item in items]

    members = {c for pair in pairs for c in pair}
    labels = [lab for lab, _ in results if lab is not None]
    graph = ComparisonGraph(
        dimension=dim.name,
        comments=frozenset(members),
        labels=labels,
        dropped=sum(lab is None for lab, _ in results),
        failed_attempts=sum(f for _, f in results),
    )
    if pairs and not labels:
        warnings.warn(f"every pair failed to label for {dim.name}; the comparison graph is empty", RuntimeWarning, stacklevel=2)
    return graph


# ------------------------------------------------------------------ aggregation


def win_rate(graph: ComparisonGraph, min_comparisons: int = DEFAULT_MIN_COMPARISONS) -> list[NormnessScore]:
    """Win-rate per comment: wins / comparisons.

    Comments with no comparison are left out (see ``graph.isolated``); the
    rest are flagged unreliable below ``min_comparisons``.
    """
    ids = sorted(graph.comments)
    index = {c: k for k, c in enumerate(ids)}
    n = len(ids)
    # counts are order-free, so labels are read in one unsorted pass
    flat = np.array([(index[lab.i], index[lab.j], lab.beta) for lab in graph.labels], dtype=np.int64).reshape(-1, 3)
    winners = np.where(flat[:, 2] != 0, flat[:, 1], flat[:, 0])
    wins = np.bincount(winners, minlength=n)
    comps = np.bincount(flat[:, 0], minlength=n) + np.bincount(flat[:, 1], minlength=n)
    isolated = [ids[k] for k in np.flatnonzero(comps == 0)]
    if isolated:
        logger.info("win_rate: %d comment(s) without comparisons excluded", len(isolated))
    return [
        NormnessScore(ids[k], graph.dimension, int(wins[k]) / int(comps[k]), int(comps[k]), bool(comps[k] >= min_comparisons))
        for k in range(n)
        if comps[k] > 0
    ]


def contradiction_rate(graph: ComparisonGraph) -> float:
    """Share of repeatedly judged pairs whose verdicts disagree."""
    outcomes: dict[frozenset, set[str]] = defaultdict(set)
    seen: Counter = Counter()
    for lab in graph.labels:
        key = frozenset((lab.i, lab.j))
        outcomes[key].add(lab.winner)
        seen[key] += 1
    repeated = [k for k, v in seen.items() if v > 1]
    if not repeated:
        return 0.0
    return sum(len(outcomes[k]) > 1 for k in repeated) / len(repeated)


def verbosity_scale(texts: Mapping[str, str], min_comparisons: int = 1) -> list[NormnessScore]:
    """Win-rate of each text's character count against all others.

    A tie is worth half a win. Fewer than two texts gives no comparisons and
    therefore no scores.
    """
    ids = sorted(texts)
    n = len(ids)
    if n < 2:
        return []
    lengths = np.array([len(texts[c]) for c in ids])
    ordered = np.sort(lengths)
    below = np.searchsorted(ordered, lengths, side="left")
    ties = np.searchsorted(ordered, lengths, side="right") - below - 1
    values = (below + 0.5 * ties) / (n - 1)
    return [
        NormnessScore(c, "verbosity", float(v), n - 1, n - 1 >= min_comparisons)
        for c, v in zip(ids, values.tolist())
    ]


# -------------------------------------------------------------------- agreement


def majority_label(votes: Sequence[Hashable], discard: Iterable[Hashable] = DISCARD_LABELS) -> Hashable | None:
    """Strict-majority category of an odd number of votes, or None to discard."""
    if len(votes) == 0 or len(votes) % 2 == 0:
        raise ConfigError("majority_label needs an odd number of votes")
    top, count = Counter(votes).most_common(1)[0]
    if 2 * count <= len(votes) or top in set(discard):
        return None
    return top


def fleiss_kappa(table) -> float:
    """Fleiss' kappa for an items x categories count table.

    Returns NaN (with a :class:`DegenerateWarning`) when every rating falls
    in a single category, where chance agreement is 1.
    """
    counts = np.asarray(table, dtype=float)
    if counts.ndim != 2 or counts.shape[0] == 0:
        raise ConfigError("table must be a non-empty 2-D array")
    raters = counts.sum(axis=1)
    n = raters[0]
    if n < 2 or not np.all(raters == n):
        raise ConfigError("every item needs the same number (>= 2) of ratings")
    n_items = counts.shape[0]
    p_cat = counts.sum(axis=0) / (n_items * n)
    p_item = ((counts**2).sum(axis=1) - n) / (n * (n - 1))
    p_bar = p_item.mean()
    p_exp = float((p_cat**2).sum())
    if np.isclose(p_exp, 1.0):
        warnings.warn("Fleiss' kappa undefined: all ratings in one category", DegenerateWarning, stacklevel=2)
        return float("nan")
    return float((p_bar - p_exp) / (1 - p_exp))
