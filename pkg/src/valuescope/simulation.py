"""Controlled rewrites of seed comments and the four-stage quality filter.

Each seed comment is rewritten at five levels of one dimension. Rewrites then
pass, in order, a preprocessing filter, a lexical filter (refusals, leftover
prompt markers, unchanged text), a fluency filter (perplexity within
``mean +/- k*sd`` of the originals) and a content-preservation filter
(similarity to the original at or above a threshold).
"""

from __future__ import annotations

import logging
import math
import re
import statistics
from collections import defaultdict
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources

from ._io import text_digest
from .corpus import PREFERENCE_TRAIN, Comment, is_url_only
from .dimensions import LEVELS, get_dimension
from .exceptions import ConfigError, PipelineOrderError, ValueScopeError
from .gateway.backends import PerplexityScorer, RewriteGenerator, SimilarityScorer

logger = logging.getLogger(__name__)

STAGES = ("preprocessing", "lexical", "fluency", "content")
DEFAULT_SIMILARITY_THRESHOLD = 0.5
DEFAULT_SIGMA_MULTIPLIER = 1.0


@dataclass
class SyntheticComment:
    origin_id: str
    dimension: str
    target_level: int
    text: str
    perplexity: float | None = None
    similarity: float | None = None
    verdicts: dict[str, bool] = field(default_factory=dict)

    def __post_init__(self):
        if self.target_level not in LEVELS:
            raise ValueError(f"target_level must be in 1..5, got {self.target_level}")

    @property
    def synth_id(self) -> str:
        return f"{self.origin_id}~{self.dimension}~{self.target_level}"

    @property
    def passed(self) -> bool:
        return all(self.verdicts.get(s) is True for s in STAGES)

    def to_record(self) -> dict:
        return {
            "synth_id": self.synth_id,
            "origin_id": self.origin_id,
            "dimension": self.dimension,
            "target_level": self.target_level,
            "text": self.text,
            "perplexity": self.perplexity,
            "similarity": self.similarity,
            "verdicts": [[s, self.verdicts[s]] for s in STAGES if s in self.verdicts],
        }

    @classmethod
    def from_record(cls, rec: dict) -> "SyntheticComment":
        return cls(
            origin_id=rec["origin_id"],
            dimension=rec["dimension"],
            target_level=rec["target_level"],
            text=rec["text"],
            perplexity=rec.get("perplexity"),
            similarity=rec.get("similarity"),
            verdicts={s: v for s, v in rec.get("verdicts", [])},
        )


@dataclass(frozen=True)
class FluencyStats:
    mean: float
    sd: float
    n: int

    def __post_init__(self):
        if self.sd < 0 or self.n < 2:
            raise ValueError("FluencyStats needs sd >= 0 and n >= 2")


@dataclass
class FilterReport:
    initial: int
    stages: list[tuple[str, int, int]] = field(default_factory=list)
    scorer_errors: int = 0

    @property
    def final(self) -> int:
        return self.stages[-1][2] if self.stages else self.initial

    @property
    def retention(self) -> float:
        return self.final / self.initial if self.initial else 0.0

    def to_record(self) -> dict:
        return {
            "initial": self.initial,
            "final": self.final,
            "retention": self.retention,
            "scorer_errors": self.scorer_errors,
            "stages": [{"stage": s, "in": a, "out": b} for s, a, b in self.stages],
        }


# ----------------------------------------------------------------- generation


def generate_rewrites(comment: Comment, dimension: str, generator: RewriteGenerator) -> list[SyntheticComment]:
    """One rewrite per level 1..5; a level whose generation fails is left out."""
    dim = get_dimension(dimension)
    if not dim.rewritable:
        raise ConfigError(f"dimension {dim.name!r} is measured from length and cannot be rewritten")
    out = []
    for level in LEVELS:
        try:
            text = generator.rewrite(comment.body, comment.post_title, dim.name, level)
        except ValueScopeError as exc:
            logger.warning("rewrite of %s at level %d failed: %s", comment.comment_id, level, exc)
            continue
        out.append(SyntheticComment(comment.comment_id, dim.name, level, text))
    return out


# -------------------------------------------------------------------- filters


def _read_patterns(name: str) -> tuple[str, ...]:
    text = resources.files("valuescope.assets").joinpath("filters", name).read_text("utf-8")
    return tuple(line.rstrip("\n") for line in text.splitlines() if line.strip() and not line.lstrip().startswith("#"))


@lru_cache(maxsize=None)
def default_abstain_patterns() -> tuple[str, ...]:
    return _read_patterns("abstain_patterns.txt")


@lru_cache(maxsize=None)
def default_strip_prefixes() -> tuple[str, ...]:
    return _read_patterns("strip_prefixes.txt")


@lru_cache(maxsize=256)
def _compile(patterns: tuple[str, ...], anchored: bool) -> tuple[re.Pattern, ...]:
    return tuple(re.compile(("^\\s*" if anchored else "") + p, re.IGNORECASE) for p in patterns)


def normalize_text(text: str) -> str:
    return " ".join(text.strip().strip("\"'“”").casefold().split())


def preprocessing_filter(synth: SyntheticComment) -> bool:
    ok = bool(synth.text.strip()) and not is_url_only(synth.text)
    synth.verdicts["preprocessing"] = ok
    return ok


def lexical_filter(
    synth: SyntheticComment,
    origin_text: str,
    abstain_patterns: Sequence[str] | None = None,
    strip_prefixes: Sequence[str] | None = None,
) -> tuple[bool, str]:
    """Strip leading markers, then reject refusals and unchanged rewrites.

    Returns the verdict and the cleaned text; the cleaned text is also stored
    on ``synth``.
    """
    abstain = _compile(tuple(default_abstain_patterns() if abstain_patterns is None else abstain_patterns), False)
    prefixes = _compile(tuple(default_strip_prefixes() if strip_prefixes is None else strip_prefixes), True)
    text = synth.text.strip()
    changed = True
    while changed and text:
        changed = False
        for p in prefixes:
            m = p.match(text)
            if m and m.end() > 0:
                text = text[m.end():].lstrip()
                changed = True
    if len(text) >= 2 and text[0] == text[-1] and text[0] in "\"'":
        text = text[1:-1].strip()
    ok = bool(text)
    if ok and any(p.search(text) for p in abstain):
        ok = False
    if ok and normalize_text(text) == normalize_text(origin_text):
        ok = False
    synth.text = text
    synth.verdicts["lexical"] = ok
    return ok, text


def _valid_perplexity(value) -> bool:
    return isinstance(value, (int, float)) and math.isfinite(value) and value > 0


def fluency_stats(originals: Iterable[str | Comment], scorer: PerplexityScorer, max_failure_rate: float = 0.1) -> FluencyStats:
    """Mean and sample standard deviation of perplexity over original comments."""
    texts = [o.body if isinstance(o, Comment) else o for o in originals]
    if len(texts) < 2:
        raise ConfigError("fluency statistics need at least two original comments")
    values = []
    for t in texts:
        try:
            v = scorer.perplexity(t)
        except ValueScopeError:
            continue
        if _valid_perplexity(v):
            values.append(float(v))
    failures = len(texts) - len(values)
    if failures / len(texts) > max_failure_rate or len(values) < 2:
        raise ValueScopeError(f"perplexity scorer failed on {failures}/{len(texts)} originals")
    return FluencyStats(statistics.fmean(values), statistics.stdev(values), len(values))


def fluency_filter(synth: SyntheticComment, stats: FluencyStats, sigmas: float = DEFAULT_SIGMA_MULTIPLIER) -> bool:
    """Pass iff perplexity lies in the closed interval mean +/- sigmas*sd."""
    if synth.perplexity is None:
        raise PipelineOrderError(f"{synth.synth_id}: perplexity not computed before the fluency filter")
    lo = stats.mean - sigmas * stats.sd
    hi = stats.mean + sigmas * stats.sd
    ok = lo <= synth.perplexity <= hi
    synth.verdicts["fluency"] = ok
    return ok


def content_filter(
    origin_text: str,
    synth: SyntheticComment,
    scorer: SimilarityScorer,
    threshold: float = DEFAULT_SIMILARITY_THRESHOLD,
) -> bool:
    """Pass iff similarity(original, rewrite) >= threshold; scorer errors fail."""
    if synth.similarity is None:
        try:
            synth.similarity = float(scorer.similarity(origin_text, synth.text))
        except ValueScopeError as exc:
            logger.warning("similarity failed for %s: %s", synth.synth_id, exc)
            synth.verdicts["content"] = False
            return False
    ok = synth.similarity >= threshold
    synth.verdicts["content"] = ok
    return ok


class CachedPerplexity:
    """Memoises a perplexity scorer by text hash."""

    def __init__(self, inner: PerplexityScorer):
        self.inner = inner
        self.cache: dict[str, float] = {}

    def perplexity(self, text):
        key = text_digest(text)
        if key not in self.cache:
            self.cache[key] = self.inner.perplexity(text)
        return self.cache[key]


class CachedSimilarity:
    def __init__(self, inner: SimilarityScorer):
        self.inner = inner
        self.cache: dict[str, float] = {}

    def similarity(self, a, b):
        key = text_digest(a + "\x00" + b)
        if key not in self.cache:
            self.cache[key] = self.inner.similarity(a, b)
        return self.cache[key]


# -------------------------------------------------------------------- pipeline


@dataclass
class SimulationBackends:
    generator: RewriteGenerator
    perplexity: PerplexityScorer
    similarity: SimilarityScorer


@dataclass
class FilterConfig:
    similarity_threshold: float = DEFAULT_SIMILARITY_THRESHOLD
    sigma_multiplier: float = DEFAULT_SIGMA_MULTIPLIER
    abstain_patterns: tuple[str, ...] | None = None
    strip_prefixes: tuple[str, ...] | None = None
    fluency: FluencyStats | dict[str, FluencyStats] | None = None
    pooled_fluency: bool = False
    max_scorer_failure_rate: float = 0.1

    def validate(self) -> None:
        if not -1.0 <= self.similarity_threshold <= 1.0:
            raise ConfigError("similarity threshold must lie in [-1, 1]")
        if self.sigma_multiplier <= 0:
            raise ConfigError("sigma multiplier must be positive")
        for pats in (self.abstain_patterns, self.strip_prefixes):
            for p in pats or ():
                try:
                    re.compile(p)
                except re.error as exc:
                    raise ConfigError(f"bad filter pattern {p!r}: {exc}") from exc


def filter_rewrites(
    seeds: Sequence[Comment],
    synths: Sequence[SyntheticComment],
    backends: SimulationBackends,
    config: FilterConfig,
    generated_from: int | None = None,
) -> tuple[list[SyntheticComment], FilterReport]:
    """Run the four filters in order over already generated rewrites."""
    config.validate()
    by_id = {s.comment_id: s for s in seeds}
    report = FilterReport(initial=generated_from if generated_from is not None else len(synths))
    if generated_from is not None:
        report.stages.append(("generation", generated_from, len(synths)))

    ppl = backends.perplexity
    stats_for = _fluency_lookup(seeds, ppl, config)

    current = list(synths)
    nxt = [s for s in current if preprocessing_filter(s)]
    report.stages.append(("preprocessing", len(current), len(nxt)))
    current = nxt

    nxt = [s for s in current if lexical_filter(s, by_id[s.origin_id].body, config.abstain_patterns, config.strip_prefixes)[0]]
    report.stages.append(("lexical", len(current), len(nxt)))
    current = nxt

    nxt = []
    for s in current:
        if s.perplexity is None:
            try:
                s.perplexity = float(ppl.perplexity(s.text))
            except ValueScopeError:
                report.scorer_errors += 1
                s.verdicts["fluency"] = False
                continue
        if not _valid_perplexity(s.perplexity):
            s.verdicts["fluency"] = False
            continue
        if fluency_filter(s, stats_for(by_id[s.origin_id].community), config.sigma_multiplier):
            nxt.append(s)
    report.stages.append(("fluency", len(current), len(nxt)))
    current = nxt

    nxt = []
    for s in current:
        had = s.similarity is not None
        ok = content_filter(by_id[s.origin_id].body, s, backends.similarity, config.similarity_threshold)
        if not had and s.similarity is None:
            report.scorer_errors += 1
        if ok:
            nxt.append(s)
    report.stages.append(("content", len(current), len(nxt)))
    return nxt, report


def _fluency_lookup(seeds, scorer, config: FilterConfig):
    if isinstance(config.fluency, FluencyStats):
        fixed = config.fluency
        return lambda community: fixed
    given = dict(config.fluency or {})
    if config.pooled_fluency:
        pooled = fluency_stats(seeds, scorer, config.max_scorer_failure_rate)
        return lambda community: pooled
    groups: dict[str, list[Comment]] = defaultdict(list)
    for s in seeds:
        groups[s.community].append(s)
    stats = {c: given.get(c) or fluency_stats(g, scorer, config.max_scorer_failure_rate) for c, g in groups.items()}
    return lambda community: stats[community]


def run_pipeline(
    seeds: Sequence[Comment],
    dimension: str,
    backends: SimulationBackends,
    config: FilterConfig | None = None,
) -> tuple[list[SyntheticComment], FilterReport]:
    """Generate five rewrites per seed and keep those passing all filters.

    Configuration problems (bad thresholds, an unrewritable dimension,
    missing backends, seeds from the preference-training partition) are
    raised before any generation call.
    """
    config = config or FilterConfig()
    config.validate()
    dim = get_dimension(dimension)
    if not dim.rewritable:
        raise ConfigError(f"dimension {dim.name!r} cannot be rewritten")
    for name in ("generator", "perplexity", "similarity"):
        if getattr(backends, name, None) is None:
            raise ConfigError(f"missing {name} backend")
    leaked = [s.comment_id for s in seeds if s.partition == PREFERENCE_TRAIN]
    if leaked:
        raise ConfigError(f"{len(leaked)} seed(s) belong to the preference-training partition, e.g. {leaked[0]}")

    synths: list[SyntheticComment] = []
    for seed in sorted(seeds, key=lambda s: s.comment_id):
        synths.extend(generate_rewrites(seed, dim.name, backends.generator))
    return filter_rewrites(seeds, synths, backends, config, generated_from=len(seeds) * len(LEVELS))
