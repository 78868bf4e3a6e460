"""Planted-truth worlds for checking the pipeline end to end without models.

A world is a set of comments with known normness in [0, 1], a judge that
orders two comments correctly with probability ``1 - error``, a rewriter
whose level-k rewrite has planted normness at the k-th level midpoint, and a
preference oracle that answers ``g(change in planted normness)`` plus
Gaussian noise. Running the ordinary pipeline on such a world and comparing
what comes out against what was planted measures how well the machinery
recovers a known curve.

Texts are structured tokens (``c00012`` for an original, ``c00012~r3`` for
its level-3 rewrite); nothing here generates language.
"""

from __future__ import annotations

import hashlib
import logging
import math
import warnings
from collections.abc import Mapping
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.stats import rankdata

from .corpus import ANALYSIS, Comment
from .dimensions import LEVELS, get_dimension
from .exceptions import ConfigError, DegenerateWarning, MissingArtifactError
from .gateway.stubs import ConstantPerplexity
from .normness import label_pairs, sample_matchings, win_rate
from .preference import DEFAULT_VARIANT, InputVariant, comment_part, distill
from .rpm import RpmCurve, build_curve, pmr, prd
from .simulation import FilterConfig, SimulationBackends, SyntheticComment, run_pipeline

logger = logging.getLogger(__name__)

LEVEL_MIDPOINTS = {k: (2 * k - 1) / 10 for k in LEVELS}
REWRITE_MARK = "~r"
WORLD_EPOCH = 1_600_000_000


@dataclass(frozen=True)
class Response:
    """Planted preference response on normness change (or normness).

    ``unimodal``: ``height * exp(-(x - peak)^2 / (2 width^2)) - offset``.
    ``linear``: ``slope * x - offset``.
    """

    kind: str = "unimodal"
    peak: float = 0.7
    width: float = 0.3
    height: float = 2.0
    offset: float = 0.25
    slope: float = 1.0

    def __post_init__(self):
        if self.kind not in ("unimodal", "linear"):
            raise ConfigError(f"unknown response kind {self.kind!r}")
        if self.kind == "unimodal" and self.width <= 0:
            raise ConfigError("response width must be positive")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "linear":
            return self.slope * x - self.offset
        return self.height * np.exp(-((x - self.peak) ** 2) / (2 * self.width**2)) - self.offset

    def argmax(self, lo: float, hi: float) -> float:
        grid = np.linspace(lo, hi, 20001)
        return float(grid[int(np.argmax(self(grid)))])

    def integral(self, lo: float, hi: float) -> float:
        return float(quad(lambda t: float(self(t)), lo, hi)[0])


@dataclass(frozen=True)
class SynthConfig:
    n: int = 5000
    error: float = 0.1
    noise: float = 0.5
    comparisons: int = 30
    seed: int = 42
    dimension: str = "formality"
    community: str = "synthetic"
    response: Response = field(default_factory=Response)
    mode: str = "delta"
    n_bins: int = 10
    min_count: int = 50
    min_comparisons: int = 30
    variant: str = DEFAULT_VARIANT.value

    def __post_init__(self):
        if self.n < 2:
            raise ConfigError("a world needs at least two comments")
        if not 0 <= self.error < 0.5:
            raise ConfigError("judge error must lie in [0, 0.5)")
        if self.noise < 0:
            raise ConfigError("noise must be non-negative")
        if self.comparisons < 1:
            raise ConfigError("comparisons must be >= 1")
        if self.mode not in ("delta", "absolute"):
            raise ConfigError("mode must be 'delta' or 'absolute'")
        if not get_dimension(self.dimension).rewritable:
            raise ConfigError(f"dimension {self.dimension!r} cannot be rewritten")
        InputVariant.parse(self.variant)

    @classmethod
    def from_mapping(cls, data: Mapping) -> "SynthConfig":
        data = dict(data or {})
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown synthbench keys: {sorted(unknown)}")
        if "response" in data and not isinstance(data["response"], Response):
            resp = dict(data["response"])
            bad = set(resp) - set(Response.__dataclass_fields__)
            if bad:
                raise ConfigError(f"unknown response keys: {sorted(bad)}")
            data["response"] = Response(**resp)
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def to_record(self) -> dict:
        return asdict(self)


@dataclass
class PlantedWorld:
    config: SynthConfig
    originals: list[Comment]
    truth: dict[str, float]

    @property
    def seed(self) -> int:
        return self.config.seed

    def normness_of(self, text: str) -> float:
        try:
            return self.truth[text]
        except KeyError:
            raise KeyError(f"text {text!r} is not part of the planted world") from None


def _text_seed(root: int, text: str) -> list[int]:
    h = hashlib.sha256(text.encode("utf-8")).digest()
    return [root, int.from_bytes(h[:8], "big")]


class OracleJudge:
    """Right with probability ``1 - error``; ties are a fair coin.

    Draws come from one sequential stream, so results depend on call order;
    label pairs single-threaded for reproducibility.
    """

    deterministic = True

    def __init__(self, world: PlantedWorld, error: float, seed: int):
        self.world = world
        self.error = error
        self.rng = np.random.default_rng(seed)
        self.calls = 0
        self.flips = 0

    def judge(self, first, second, dimension, contexts=(("", ""), ("", ""))):
        a, b = self.world.normness_of(first), self.world.normness_of(second)
        self.calls += 1
        if a == b:
            return "second" if self.rng.random() < 0.5 else "first"
        truth = "second" if b > a else "first"
        if self.error and self.rng.random() < self.error:
            self.flips += 1
            return "first" if truth == "second" else "second"
        return truth


class OracleRewriter:
    """Level-k rewrite of ``c00012`` is ``c00012~rk`` with planted normness at the level midpoint."""

    deterministic = True

    def __init__(self, world: PlantedWorld):
        self.world = world

    def rewrite(self, comment, title, dimension, level):
        text = f"{comment}{REWRITE_MARK}{level}"
        self.world.truth.setdefault(text, LEVEL_MIDPOINTS[level])
        return text


class OracleSimilarity:
    """Rewrites keep their origin token, so they are always judged similar."""

    deterministic = True

    def similarity(self, a, b):
        return 1.0 if b.split(REWRITE_MARK)[0] == a.split(REWRITE_MARK)[0] else 0.0


class OraclePreference:
    """Planted response plus Gaussian noise seeded by the text.

    In ``delta`` mode an original scores 0 and a rewrite scores
    ``g(planted rewrite normness - planted origin normness)``; in
    ``absolute`` mode every text scores ``g(planted normness)``.
    """

    deterministic = True

    def __init__(self, world: PlantedWorld, response: Response, noise: float, seed: int, mode: str = "delta"):
        self.world = world
        self.response = response
        self.noise = noise
        self.seed = seed
        self.mode = mode

    def score(self, text):
        token = comment_part(text)
        phi = self.world.normness_of(token)
        if self.mode == "absolute":
            base = float(self.response(phi))
        elif REWRITE_MARK in token:
            base = float(self.response(phi - self.world.normness_of(token.split(REWRITE_MARK)[0])))
        else:
            base = 0.0
        if self.noise:
            base += self.noise * float(np.random.default_rng(_text_seed(self.seed, token)).standard_normal())
        return base


@dataclass
class OracleBindings:
    judge: OracleJudge
    rewriter: OracleRewriter
    perplexity: ConstantPerplexity
    similarity: OracleSimilarity
    preference: OraclePreference


def plant_world(config: SynthConfig, seed: int | None = None) -> tuple[PlantedWorld, OracleBindings]:
    """Draw planted normness for ``config.n`` originals and wire up the oracles.

    All randomness derives from ``seed`` (default ``config.seed``).
    """
    seed = config.seed if seed is None else seed
    root = np.random.SeedSequence(seed)
    world_seq, judge_seq, pref_seq = root.spawn(3)
    rng = np.random.default_rng(world_seq)
    phi = rng.random(config.n)
    originals = []
    truth = {}
    for k in range(config.n):
        cid = f"c{k:05d}"
        truth[cid] = float(phi[k])
        originals.append(
            Comment(
                comment_id=cid,
                parent_id=f"p{k // 50:04d}",
                post_id=f"p{k // 50:04d}",
                community=config.community,
                author=f"u{k % 97:03d}",
                body=cid,
                created_at=WORLD_EPOCH + 3600 * k,
                retrieved_at=WORLD_EPOCH + 3600 * k + 2 * 86_400,
                net_votes=0,
                post_title=f"planted post {k // 50}",
                partition=ANALYSIS,
            )
        )
    world = PlantedWorld(config, originals, truth)
    pref_seed = int(pref_seq.generate_state(1)[0])
    bindings = OracleBindings(
        judge=OracleJudge(world, config.error, int(judge_seq.generate_state(1)[0])),
        rewriter=OracleRewriter(world),
        perplexity=ConstantPerplexity(50.0),
        similarity=OracleSimilarity(),
        preference=OraclePreference(world, config.response, config.noise, pref_seed, config.mode),
    )
    return world, bindings


# --------------------------------------------------------------------- recovery


def spearman(x, y) -> float:
    """Pearson correlation of average ranks; NaN (with a warning) for a constant input."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("spearman needs two equal-length 1-D inputs")
    if x.size < 2:
        raise ValueError("spearman needs at least two points")
    rx, ry = rankdata(x) - (x.size + 1) / 2, rankdata(y) - (y.size + 1) / 2
    denom = math.sqrt(float(rx @ rx) * float(ry @ ry))
    if denom == 0:
        warnings.warn("spearman undefined for a constant input", DegenerateWarning, stacklevel=2)
        return float("nan")
    return float(rx @ ry) / denom


@dataclass(frozen=True)
class RecoveryReport:
    spearman: float
    spearman_all: float
    pmr_bin_error: int
    prd_sign_match: bool
    pmr_bin: int
    target_bin: int
    prd: float
    planted_integral: float
    n_originals: int
    n_rewrites_kept: int
    n_labels: int
    judge_flips: int
    mode: str

    def to_record(self) -> dict:
        return asdict(self)

    def summary(self) -> str:
        ok = "yes" if self.prd_sign_match else "no"
        return (
            f"spearman(normness, planted) = {self.spearman:.4f} over {self.n_originals} originals "
            f"({self.spearman_all:.4f} over all scored texts); "
            f"PMR bin {self.pmr_bin} vs planted {self.target_bin} (error {self.pmr_bin_error}); "
            f"PRD {self.prd:+.4f}, planted integral {self.planted_integral:+.4f}, sign match {ok}"
        )


@dataclass
class SynthRun:
    world: PlantedWorld
    bindings: OracleBindings
    rewrites: list[SyntheticComment]
    normness: dict[str, float]
    n_labels: int
    curve: RpmCurve | None


def recovery_report(run: SynthRun) -> RecoveryReport:
    """Compare a finished run against the planted truth."""
    if run.curve is None:
        raise MissingArtifactError("rpm stage output missing: no curve to evaluate")
    if not run.normness:
        raise MissingArtifactError("winrate stage output missing: no normness scores")
    world, curve = run.world, run.curve
    originals = [c.comment_id for c in world.originals if c.comment_id in run.normness]
    est = [run.normness[c] for c in originals]
    true = [world.truth[c] for c in originals]
    sp = spearman(est, true)
    every = sorted(run.normness)
    texts = {c.comment_id: c.body for c in world.originals}
    texts.update({r.synth_id: r.text for r in run.rewrites})
    sp_all = spearman([run.normness[i] for i in every], [world.truth[texts[i]] for i in every])

    lo, hi = curve.bins[0].lo, curve.bins[-1].hi
    target = curve.bin_index(world.config.response.argmax(lo, hi))
    best = pmr(curve)
    total = prd(curve)
    response = world.config.response
    integral = sum(response.integral(b.lo, b.hi) for b in curve.reliable)
    if world.config.mode == "absolute":
        # absolute curves plot z-scores, so compare against the response centred on the scored population
        centre = float(np.mean(response(np.array([world.truth[texts[i]] for i in every]))))
        integral -= centre * sum(b.hi - b.lo for b in curve.reliable)
    return RecoveryReport(
        spearman=sp,
        spearman_all=sp_all,
        pmr_bin_error=abs(best.index - int(target)),
        prd_sign_match=bool(np.sign(total) == np.sign(integral)),
        pmr_bin=best.index,
        target_bin=int(target),
        prd=total,
        planted_integral=integral,
        n_originals=len(originals),
        n_rewrites_kept=len(run.rewrites),
        n_labels=run.n_labels,
        judge_flips=run.bindings.judge.flips,
        mode=world.config.mode,
    )


def run_synthbench(config: SynthConfig | None = None) -> tuple[RecoveryReport, SynthRun]:
    """Plant a world and push it through simulate, filter, winrate, preference and rpm."""
    config = config or SynthConfig()
    world, oracles = plant_world(config)
    backends = SimulationBackends(oracles.rewriter, oracles.perplexity, oracles.similarity)
    rewrites, _ = run_pipeline(world.originals, config.dimension, backends, FilterConfig())

    texts = {c.comment_id: c.body for c in world.originals}
    texts.update({r.synth_id: r.text for r in rewrites})
    ids = sorted(texts)
    pair_seed, label_seed = (int(s.generate_state(1)[0]) for s in np.random.SeedSequence([config.seed, 1]).spawn(2))
    pairs = sample_matchings(ids, config.comparisons, pair_seed)
    graph = label_pairs(pairs, config.dimension, oracles.judge, texts, seed=label_seed)
    normness = {s.comment_id: s.value for s in win_rate(graph, config.min_comparisons)}

    scores, deltas = distill(world.originals, rewrites, normness, oracles.preference, config.variant)
    if config.mode == "delta":
        points = [(d.d_phi, d.d_psi) for d in deltas]
        value_range = (-1.0, 1.0)
    else:
        z = {s.item_id: s.value for s in scores}
        points = [(normness[c.comment_id], z[c.comment_id]) for c in world.originals if c.comment_id in normness]
        value_range = (0.0, 1.0)
    curve = build_curve(
        points,
        n_bins=config.n_bins,
        value_range=value_range,
        min_count=config.min_count,
        community=config.community,
        dimension=config.dimension,
        delta_mode=config.mode == "delta",
    )
    run = SynthRun(world, oracles, rewrites, normness, len(graph.labels), curve)
    return recovery_report(run), run
