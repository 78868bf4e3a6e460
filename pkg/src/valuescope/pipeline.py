"""Stage runners behind the command line.

Each stage reads its predecessors' artifacts from the run directory and
writes its own, so any stage can be rerun or resumed on its own. Every file
a stage writes is registered with its sha256 digest in ``manifest.json``.

Run-directory layout::

    manifest.json
    corpus/comments.jsonl, corpus/stats.json
    sample/<dimension>/{ratings.jsonl, sample.json, pairs.jsonl}
    label/<dimension>/{labels.jsonl, summary.json}
    simulation/<community>/<dimension>/{seeds.json, generated.jsonl, kept.jsonl, filter_report.json}
    normness/<community>/<dimension>/{scores.csv, summary.json}
    preference/<community>/<dimension>/{scores.csv, deltas.jsonl}
    rpm/<community>/<dimension>/{curve.csv, summary.json}
    dynamics/{table2.csv, table5.csv, intensity.csv, crystallization.csv, changes.csv, excluded.json}
    synthbench/{recovery.json, summary.txt}
    report/{curves.csv, rpm_summary.csv, table2.csv, table5.csv, summary.json}
"""

from __future__ import annotations

import hashlib
import itertools
import logging
import shutil
import time
import warnings
from collections import Counter
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from ._io import atomic_write_text, file_digest, read_csv, read_json, read_jsonl, write_csv, write_json, write_jsonl
from .config import RunConfig
from .corpus import ANALYSIS, Comment, assign_partition, preprocess, read_dump
from .dimensions import LEVELS, get_dimension
from .dynamics import (
    INTENSITY_HEADER,
    TABLE2_HEADER,
    TABLE5_HEADER,
    dynamics_tables,
    intensity_series,
    table2_rows,
    table5_rows,
    user_shift,
)
from .exceptions import ConfigError, DegenerateWarning, EmptyCurveError, InputError, InsufficientDataError, MissingArtifactError
from .gateway import stubs
from .gateway.backends import (
    ChatLikertRater,
    ChatPairwiseJudge,
    ChatRewriter,
    RemotePerplexity,
    RemotePreference,
    RemoteSimilarity,
)
from .gateway.client import ChatClient, HttpChatTransport, HttpScoringTransport, PriceSheet
from .normness import contradiction_rate, label_pairs, rate_comments, sample_matchings, sample_pairs, stratified_sample, verbosity_scale, win_rate
from .preference import distill
from .rpm import CURVE_HEADER, build_curve, curve_rows, curve_summary
from .simulation import CachedPerplexity, CachedSimilarity, FilterConfig, SimulationBackends, SyntheticComment, filter_rewrites, generate_rewrites
from .synthbench import run_synthbench

logger = logging.getLogger(__name__)

MANIFEST = "manifest.json"
STAGES = ("ingest", "sample", "label", "simulate", "filter", "winrate", "score-preference", "rpm", "dynamics", "synthbench", "report")


def derive_seed(root: int, *names: object) -> int:
    """Stable 32-bit seed for a named sub-task of a run."""
    tags = [int.from_bytes(hashlib.sha256(str(n).encode()).digest()[:4], "big") for n in names]
    return int(np.random.SeedSequence([root, *tags]).generate_state(1)[0])


# ------------------------------------------------------------------- backends


@dataclass
class Backends:
    rater: Any
    judge: Any
    rewriter: Any
    perplexity: Any
    similarity: Any
    preference: Any
    client: ChatClient | None = None

    def cost(self) -> dict:
        if self.client is None:
            return {"requests": 0, "input_tokens": 0, "output_tokens": 0, "usd": 0.0, "approximate": False}
        u = self.client.usage
        return {
            "requests": u.requests,
            "input_tokens": u.input_tokens,
            "output_tokens": u.output_tokens,
            "usd": u.cost(self.client.price),
            "approximate": u.approximate,
        }


def build_backends(cfg: RunConfig) -> Backends:
    b = cfg.backends
    if b.offline:
        return Backends(
            rater=stubs.LexiconRater(),
            judge=stubs.LexiconJudge(),
            rewriter=stubs.LexiconRewriter(),
            perplexity=stubs.HashPerplexity(),
            similarity=stubs.TokenOverlapSimilarity(),
            preference=stubs.LexiconPreference(b.preference_weights, noise=b.preference_noise),
        )
    price = None
    if b.price_input is not None and b.price_output is not None:
        price = PriceSheet(b.price_input, b.price_output)
    client = ChatClient(
        HttpChatTransport(b.chat_url, b.chat_model, b.api_key_env),
        max_retries=b.max_retries,
        max_in_flight=b.max_in_flight,
        price=price,
    )
    return Backends(
        rater=ChatLikertRater(client, b.temperature),
        judge=ChatPairwiseJudge(client, b.temperature, samples=b.judge_samples),
        rewriter=ChatRewriter(client, b.rewrite_temperature),
        perplexity=RemotePerplexity(HttpScoringTransport(b.perplexity_url, "perplexity", b.api_key_env)),
        similarity=RemoteSimilarity(HttpScoringTransport(b.similarity_url, "similarity", b.api_key_env)),
        preference=RemotePreference(HttpScoringTransport(b.preference_url, "preference", b.api_key_env)),
        client=client,
    )


# ------------------------------------------------------------------ workspace


class Workspace:
    """A run directory plus its manifest."""

    def __init__(self, root: str | Path, cfg: RunConfig):
        self.root = Path(root)
        self.cfg = cfg
        self.manifest_path = self.root / MANIFEST
        if self.manifest_path.exists():
            self.manifest = read_json(self.manifest_path)
            if self.manifest.get("run_id") != cfg.run_id():
                raise ConfigError(
                    f"run directory {self.root} was produced by a different configuration "
                    f"(run {self.manifest.get('run_id')}); use a fresh --run-dir"
                )
        else:
            self.manifest = {"run_id": cfg.run_id(), "tool": f"valuescope {__version__}", "config": cfg.snapshot(), "stages": {}}

    def path(self, *parts: str) -> Path:
        return self.root.joinpath(*parts)

    def rel(self, path: Path) -> str:
        return path.relative_to(self.root).as_posix()

    def require(self, stage: str, *parts: str) -> Path:
        p = self.path(*parts)
        if not p.exists():
            raise MissingArtifactError(f"{'/'.join(parts)} not found; run `{stage}` first")
        return p

    def outputs(self) -> dict[str, str]:
        merged: dict[str, str] = {}
        for entry in self.manifest["stages"].values():
            merged.update(entry.get("outputs", {}))
        return merged

    def record(self, stage: str, written: Iterable[Path], seconds: float, cost: dict | None = None, notes: dict | None = None) -> None:
        entry = self.manifest["stages"].setdefault(stage, {"outputs": {}})
        for p in written:
            entry["outputs"][self.rel(p)] = file_digest(p)
        entry["outputs"] = dict(sorted(entry["outputs"].items()))
        entry["seconds"] = round(seconds, 3)
        if cost is not None:
            entry["cost"] = cost
        if notes:
            entry["notes"] = notes
        self.save()

    def save(self) -> None:
        self.root.mkdir(parents=True, exist_ok=True)
        write_json(self.manifest_path, self.manifest)


# -------------------------------------------------------------------- loaders


def load_comments(ws: Workspace) -> list[Comment]:
    return [Comment.from_record(r) for r in read_jsonl(ws.require("ingest", "corpus", "comments.jsonl"))]


def analysis_comments(comments: Sequence[Comment], community: str) -> list[Comment]:
    return [c for c in comments if c.community == community and c.partition == ANALYSIS]


def load_synths(path: Path) -> list[SyntheticComment]:
    return [SyntheticComment.from_record(r) for r in read_jsonl(path)]


def load_normness(ws: Workspace, community: str, dimension: str, originals_only: bool = False) -> dict[str, float]:
    rows = read_csv(ws.require("winrate", "normness", community, dimension, "scores.csv"))
    return {
        r["item_id"]: float(r["value"])
        for r in rows
        if r["reliable"] == "1" and (not originals_only or r["kind"] == "original")
    }


def load_preferences(ws: Workspace, community: str, dimension: str, originals_only: bool = False) -> dict[str, float]:
    rows = read_csv(ws.require("score-preference", "preference", community, dimension, "scores.csv"))
    return {r["item_id"]: float(r["value"]) for r in rows if not originals_only or r["kind"] == "original"}


# --------------------------------------------------------------------- stages


@dataclass
class Selection:
    communities: list[str] = field(default_factory=list)
    dimensions: list[str] = field(default_factory=list)


class Pipeline:
    def __init__(self, cfg: RunConfig, run_dir: str | Path | None = None, backends: Backends | None = None):
        self.cfg = cfg
        self.ws = Workspace(run_dir or cfg.resolve(cfg.run_dir), cfg)
        self._backends = backends

    @property
    def backends(self) -> Backends:
        if self._backends is None:
            self._backends = build_backends(self.cfg)
        return self._backends

    def run(self, stage: str, selection: Selection | None = None) -> dict:
        if stage not in STAGES:
            raise ConfigError(f"unknown stage {stage!r}")
        selection = selection or Selection()
        handler: Callable = getattr(self, "stage_" + stage.replace("-", "_"))
        start = time.perf_counter()
        written, notes = handler(selection)
        cost = self._backends.cost() if self._backends is not None else None
        self.ws.record(stage, written, time.perf_counter() - start, cost, notes)
        logger.info("%s wrote %d file(s)", stage, len(written))
        return notes

    # --------------------------------------------------------------- helpers

    def communities(self, selection: Selection, comments: Sequence[Comment] | None = None) -> list[str]:
        if selection.communities:
            return sorted(selection.communities)
        if self.cfg.communities:
            return sorted(self.cfg.communities)
        comments = comments if comments is not None else load_comments(self.ws)
        return sorted({c.community for c in comments})

    def dimensions(self, selection: Selection, rewritable_only: bool = False) -> list[str]:
        dims = [get_dimension(d).name for d in (selection.dimensions or self.cfg.dimensions)]
        if rewritable_only:
            dims = [d for d in dims if get_dimension(d).rewritable]
        return dims

    def filter_config(self) -> FilterConfig:
        s = self.cfg.simulation
        return FilterConfig(similarity_threshold=s.similarity_threshold, sigma_multiplier=s.sigma_multiplier, pooled_fluency=s.pooled_fluency)

    # ---------------------------------------------------------------- ingest

    def stage_ingest(self, selection: Selection):
        paths = [self.cfg.resolve(p) for p in self.cfg.corpus.dumps]
        if not paths:
            raise ConfigError("corpus.dumps lists no input files")
        missing = [str(p) for p in paths if not p.exists()]
        if missing:
            raise ConfigError(f"dump file(s) not found: {', '.join(missing)}")
        posts, raw, skipped = read_dump(*paths)
        stats: Counter = Counter()
        comments = preprocess(raw, posts, self.cfg.corpus.scrape_time, stats)
        wanted = set(selection.communities or self.cfg.communities)
        if wanted:
            comments = [c for c in comments if c.community in wanted]
        comments = assign_partition(comments, self.cfg.corpus.train_fraction, self.cfg.corpus.partition_salt)
        comments.sort(key=lambda c: (c.community, c.created_at, c.comment_id))
        out = self.ws.path("corpus", "comments.jsonl")
        write_jsonl(out, (c.to_record() for c in comments))
        summary = {
            "posts": len(posts),
            "raw_comments": len(raw),
            "skipped_lines": skipped,
            "exclusions": dict(sorted(stats.items())),
            "kept": len(comments),
            "partitions": dict(sorted(Counter(c.partition for c in comments).items())),
            "communities": dict(sorted(Counter(c.community for c in comments).items())),
        }
        stats_path = self.ws.path("corpus", "stats.json")
        write_json(stats_path, summary)
        return [out, stats_path], {"kept": len(comments), "skipped_lines": skipped}

    # ---------------------------------------------------- training labels chain

    def stage_sample(self, selection: Selection):
        comments = load_comments(self.ws)
        communities = set(self.communities(selection, comments))
        pool = [c for c in comments if c.community in communities and c.partition == ANALYSIS]
        texts = {c.comment_id: c.body for c in pool}
        owner = {c.comment_id: c.community for c in pool}
        contexts = {c.comment_id: (c.post_title, "") for c in pool}
        written, notes = [], {}
        for dim in self.dimensions(selection):
            ratings = rate_comments(texts, dim, self.backends.rater, owner, contexts)
            ids, shortfall = stratified_sample(ratings, self.cfg.sampling.likert_per_scale, derive_seed(self.cfg.seed, "sample", dim))
            pairs = sample_pairs(sorted(ids), self.cfg.sampling.pairs, derive_seed(self.cfg.seed, "pairs", dim))
            base = ("sample", dim)
            p1, p2, p3 = self.ws.path(*base, "ratings.jsonl"), self.ws.path(*base, "sample.json"), self.ws.path(*base, "pairs.jsonl")
            write_jsonl(p1, ({"comment_id": r.comment_id, "community": r.community, "rating": r.rating} for r in ratings))
            write_json(p2, {"ids": sorted(ids), "shortfall": [[c, s, n] for (c, s), n in sorted(shortfall.items())]})
            write_jsonl(p3, ({"i": a, "j": b} for a, b in pairs))
            written += [p1, p2, p3]
            notes[dim] = {"rated": len(ratings), "sampled": len(ids), "pairs": len(pairs)}
        return written, notes

    def stage_label(self, selection: Selection):
        comments = {c.comment_id: c for c in load_comments(self.ws)}
        written, notes = [], {}
        for dim in self.dimensions(selection):
            pairs = [(r["i"], r["j"]) for r in read_jsonl(self.ws.require("sample", "sample", dim, "pairs.jsonl"))]
            texts = {cid: comments[cid].body for pair in pairs for cid in pair}
            contexts = {cid: (comments[cid].post_title, "") for cid in texts}
            graph = label_pairs(
                pairs, dim, self.backends.judge, texts, contexts,
                seed=derive_seed(self.cfg.seed, "label", dim),
                max_attempts=self.cfg.normness.judge_attempts,
                workers=self._label_workers(),
            )
            p1, p2 = self.ws.path("label", dim, "labels.jsonl"), self.ws.path("label", dim, "summary.json")
            write_jsonl(p1, ({"i": lab.i, "j": lab.j, "beta": lab.beta} for lab in graph.labels))
            summary = {"pairs": len(pairs), "labels": len(graph.labels), "dropped": graph.dropped, "failed_attempts": graph.failed_attempts}
            write_json(p2, summary)
            written += [p1, p2]
            notes[dim] = summary
        return written, notes

    def _label_workers(self) -> int:
        # stub judges are cheap and order-independent; keep them single-threaded for identical output
        return 1 if self.cfg.backends.offline else self.cfg.workers

    # ------------------------------------------------------ simulation chain

    def stage_simulate(self, selection: Selection):
        comments = load_comments(self.ws)
        written, notes = [], {}
        for community in self.communities(selection, comments):
            pool = sorted(analysis_comments(comments, community), key=lambda c: c.comment_id)
            for dim in self.dimensions(selection, rewritable_only=True):
                k = min(self.cfg.simulation.seeds_per_community, len(pool))
                rng = np.random.default_rng(derive_seed(self.cfg.seed, "seeds", community, dim))
                seeds = [pool[i] for i in sorted(rng.choice(len(pool), size=k, replace=False))] if k else []
                synths: list[SyntheticComment] = []
                for s in seeds:
                    synths.extend(generate_rewrites(s, dim, self.backends.rewriter))
                base = ("simulation", community, dim)
                p1, p2 = self.ws.path(*base, "seeds.json"), self.ws.path(*base, "generated.jsonl")
                write_json(p1, {"seeds": [s.comment_id for s in seeds], "requested": self.cfg.simulation.seeds_per_community})
                write_jsonl(p2, (s.to_record() for s in synths))
                written += [p1, p2]
                notes[f"{community}/{dim}"] = {"seeds": len(seeds), "generated": len(synths)}
        return written, notes

    def stage_filter(self, selection: Selection):
        comments = load_comments(self.ws)
        by_id = {c.comment_id: c for c in comments}
        backends = SimulationBackends(self.backends.rewriter, CachedPerplexity(self.backends.perplexity), CachedSimilarity(self.backends.similarity))
        written, notes = [], {}
        for community in self.communities(selection, comments):
            for dim in self.dimensions(selection, rewritable_only=True):
                base = ("simulation", community, dim)
                seed_ids = read_json(self.ws.require("simulate", *base, "seeds.json"))["seeds"]
                synths = load_synths(self.ws.require("simulate", *base, "generated.jsonl"))
                seeds = [by_id[i] for i in seed_ids]
                if len(seeds) < 2:
                    raise InsufficientDataError(f"{community}/{dim}: fewer than two seeds; fluency statistics need two")
                kept, report = filter_rewrites(seeds, synths, backends, self.filter_config(), generated_from=len(seeds) * len(LEVELS))
                p1, p2 = self.ws.path(*base, "kept.jsonl"), self.ws.path(*base, "filter_report.json")
                write_jsonl(p1, (s.to_record() for s in kept))
                write_json(p2, report.to_record())
                written += [p1, p2]
                notes[f"{community}/{dim}"] = {"kept": len(kept), "retention": round(report.retention, 6)}
        return written, notes

    # ---------------------------------------------------------------- winrate

    def stage_winrate(self, selection: Selection):
        comments = load_comments(self.ws)
        written, notes = [], {}
        for community in self.communities(selection, comments):
            originals = analysis_comments(comments, community)
            for dim in self.dimensions(selection):
                base = ("normness", community, dim)
                texts = {c.comment_id: c.body for c in originals}
                kinds = dict.fromkeys(texts, "original")
                summary: dict[str, Any] = {"originals": len(originals)}
                if get_dimension(dim).rewritable:
                    kept = load_synths(self.ws.require("filter", "simulation", community, dim, "kept.jsonl"))
                    texts.update({s.synth_id: s.text for s in kept})
                    kinds.update(dict.fromkeys((s.synth_id for s in kept), "rewrite"))
                    contexts = {c.comment_id: (c.post_title, "") for c in originals}
                    titles = {c.comment_id: c.post_title for c in originals}
                    contexts.update({s.synth_id: (titles[s.origin_id], "") for s in kept})
                    pairs = sample_matchings(sorted(texts), self.cfg.normness.comparisons, derive_seed(self.cfg.seed, "matchings", community, dim))
                    graph = label_pairs(
                        pairs, dim, self.backends.judge, texts, contexts,
                        seed=derive_seed(self.cfg.seed, "orient", community, dim),
                        max_attempts=self.cfg.normness.judge_attempts,
                        workers=self._label_workers(),
                    )
                    scores = win_rate(graph, self.cfg.normness.min_comparisons)
                    summary.update(
                        rewrites=len(kept), pairs=len(pairs), labels=len(graph.labels), dropped=graph.dropped,
                        failed_attempts=graph.failed_attempts, isolated=len(graph.isolated),
                        contradiction_rate=contradiction_rate(graph), mode="pairwise",
                    )
                else:
                    scores = verbosity_scale(texts)
                    summary.update(rewrites=0, mode="length")
                summary["reliable"] = sum(s.reliable for s in scores)
                p1, p2 = self.ws.path(*base, "scores.csv"), self.ws.path(*base, "summary.json")
                write_csv(p1, ("item_id", "kind", "value", "comparisons", "reliable"),
                          ([s.comment_id, kinds[s.comment_id], s.value, s.comparisons, int(s.reliable)] for s in scores))
                write_json(p2, summary)
                written += [p1, p2]
                notes[f"{community}/{dim}"] = {"scored": len(scores), "reliable": summary["reliable"]}
        return written, notes

    # ------------------------------------------------------------- preference

    def stage_score_preference(self, selection: Selection):
        comments = load_comments(self.ws)
        variant = self.cfg.preference.variant
        written, notes = [], {}
        for community in self.communities(selection, comments):
            originals = analysis_comments(comments, community)
            for dim in self.dimensions(selection):
                normness = load_normness(self.ws, community, dim)
                rewrites = []
                if get_dimension(dim).rewritable:
                    rewrites = load_synths(self.ws.require("filter", "simulation", community, dim, "kept.jsonl"))
                scores, deltas = distill(originals, rewrites, normness, self.backends.preference, variant, workers=self.cfg.workers)
                kinds = {c.comment_id: "original" for c in originals}
                base = ("preference", community, dim)
                p1, p2 = self.ws.path(*base, "scores.csv"), self.ws.path(*base, "deltas.jsonl")
                write_csv(p1, ("item_id", "kind", "value", "variant"),
                          ([s.item_id, kinds.get(s.item_id, "rewrite"), s.value, s.variant] for s in scores))
                write_jsonl(p2, deltas)
                written += [p1, p2]
                notes[f"{community}/{dim}"] = {"scores": len(scores), "deltas": len(deltas)}
        return written, notes

    # -------------------------------------------------------------------- rpm

    def stage_rpm(self, selection: Selection):
        comments = load_comments(self.ws)
        written, notes = [], {}
        for community in self.communities(selection, comments):
            for dim in self.dimensions(selection):
                prefs = load_preferences(self.ws, community, dim)
                delta_mode = get_dimension(dim).rewritable
                if delta_mode:
                    rows = read_jsonl(self.ws.require("score-preference", "preference", community, dim, "deltas.jsonl"))
                    points = [(r["d_phi"], r["d_psi"]) for r in rows]
                    value_range = (-1.0, 1.0)
                else:
                    normness = load_normness(self.ws, community, dim, originals_only=True)
                    points = [(normness[i], prefs[i]) for i in sorted(normness) if i in prefs]
                    value_range = (0.0, 1.0)
                base = ("rpm", community, dim)
                summary: dict[str, Any]
                if points:
                    curve = build_curve(points, self.cfg.rpm.bins, value_range, self.cfg.rpm.min_count, community, dim, delta_mode, allow_empty=True)
                    rows_out = curve_rows(curve)
                    summary = curve_summary(curve)
                    if not curve.reliable:
                        summary["error"] = str(EmptyCurveError(f"no bin reaches {self.cfg.rpm.min_count} points"))
                else:
                    rows_out = []
                    summary = {"community": community, "dimension": dim, "delta_mode": delta_mode, "pmr": None, "prd": None, "error": "no points"}
                p1, p2 = self.ws.path(*base, "curve.csv"), self.ws.path(*base, "summary.json")
                write_csv(p1, CURVE_HEADER, rows_out)
                write_json(p2, summary)
                written += [p1, p2]
                notes[f"{community}/{dim}"] = {"pmr": summary["pmr"]["center"] if summary.get("pmr") else None, "prd": summary.get("prd")}
        return written, notes

    # --------------------------------------------------------------- dynamics

    def stage_dynamics(self, selection: Selection):
        comments = load_comments(self.ws)
        communities = self.communities(selection, comments)
        dims = self.dimensions(selection)
        pool = [c for c in comments if c.community in set(communities) and c.partition == ANALYSIS]
        normness: dict[str, dict[str, float]] = {}
        prefs: dict[str, dict[str, float]] = {}
        for dim in dims:
            normness[dim], prefs[dim] = {}, {}
            for community in communities:
                normness[dim].update(load_normness(self.ws, community, dim, originals_only=True))
                prefs[dim].update(load_preferences(self.ws, community, dim, originals_only=True))
        d = self.cfg.dynamics
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DegenerateWarning)
            tables = dynamics_tables(pool, normness, prefs, d.bins, d.s1, d.s2, derive_seed(self.cfg.seed, "crystallization"))

        intensity = []
        for dim in dims:
            intensity += intensity_series(pool, normness[dim], prefs[dim], dim, d.bins, d.window_months)

        by_community = {c: [x for x in pool if x.community == c] for c in communities}
        pairs = d.user_pairs or [list(p) for p in itertools.combinations(communities, 2)]
        shifts, excluded = [], list(tables.excluded)
        for a, b in pairs:
            if a not in by_community or b not in by_community:
                raise ConfigError(f"user pair {a}->{b} names a community outside this run")
            for dim in dims:
                try:
                    shifts.append(user_shift(by_community[a], by_community[b], normness[dim], dim, d.min_user_comments))
                except InsufficientDataError as exc:
                    excluded.append(f"user shift {a}->{b}/{dim}: {exc}")

        out = self.ws.path("dynamics")
        files = {
            "table2.csv": (TABLE2_HEADER, table2_rows(tables.fits)),
            "table5.csv": (TABLE5_HEADER, table5_rows(shifts)),
            "intensity.csv": (INTENSITY_HEADER, intensity),
            "crystallization.csv": (
                ("community", "dimension", "bin_lo", "bin_hi", "period", "cr", "subsample_n", "seed", "degenerate"),
                [[r.key.community, r.key.dimension, r.key.bin_lo, r.key.bin_hi, r.period, r.cr, r.subsample_n, r.seed, int(r.degenerate)] for r in tables.crystallization],
            ),
            "changes.csv": (
                ("community", "dimension", "bin_lo", "bin_hi", "ni_s1", "ni_s2", "tc"),
                [[r.key.community, r.key.dimension, r.key.bin_lo, r.key.bin_hi, r.ni_s1, r.ni_s2, r.tc] for r in tables.changes],
            ),
        }
        written = []
        for name, (header, rows) in files.items():
            write_csv(out / name, header, rows)
            written.append(out / name)
        write_json(out / "excluded.json", {"s1": d.s1, "s2": d.s2, "excluded": excluded})
        written.append(out / "excluded.json")
        return written, {"changes": len(tables.changes), "user_shifts": len(shifts), "excluded": len(excluded)}

    # ------------------------------------------------------------- synthbench

    def stage_synthbench(self, selection: Selection):
        report, _ = run_synthbench(self.cfg.synthbench)
        p1, p2 = self.ws.path("synthbench", "recovery.json"), self.ws.path("synthbench", "summary.txt")
        write_json(p1, {"config": self.cfg.synthbench.to_record(), "report": report.to_record()})
        atomic_write_text(p2, report.summary() + "\n")
        return [p1, p2], {"summary": report.summary()}

    # ----------------------------------------------------------------- report

    def stage_report(self, selection: Selection):
        problems = verify_run(self.ws)
        if problems:
            raise InputError("run directory failed verification:\n  " + "\n  ".join(problems))
        summaries = sorted(self.ws.root.glob("rpm/*/*/summary.json"))
        if not summaries:
            raise MissingArtifactError("no rpm outputs found; run `rpm` first")
        curve_rows_all, pmr_rows = [], []
        for path in summaries:
            s = read_json(path)
            community, dim = path.parent.parent.name, path.parent.name
            mode = "delta" if s.get("delta_mode") else "absolute"
            for r in read_csv(path.parent / "curve.csv"):
                curve_rows_all.append([community, dim, mode] + [r[h] for h in CURVE_HEADER])
            pmr = s.get("pmr") or {}
            pmr_rows.append([community, dim, mode, pmr.get("lo", ""), pmr.get("hi", ""), pmr.get("mean", ""), s.get("prd", ""), s.get("error", "")])
        out = self.ws.path("report")
        written = []
        write_csv(out / "curves.csv", ("community", "dimension", "mode") + CURVE_HEADER, curve_rows_all)
        write_csv(out / "rpm_summary.csv", ("community", "dimension", "mode", "pmr_lo", "pmr_hi", "pmr_mean", "prd", "note"), pmr_rows)
        written += [out / "curves.csv", out / "rpm_summary.csv"]
        for name in ("table2.csv", "table5.csv"):
            src = self.ws.path("dynamics", name)
            if src.exists():
                shutil.copyfile(src, out / name)
                written.append(out / name)
        overview = {
            "run_id": self.ws.manifest["run_id"],
            "curves": len(summaries),
            "dynamics": self.ws.path("dynamics", "table2.csv").exists(),
            "stages": sorted(self.ws.manifest["stages"]),
        }
        write_json(out / "summary.json", overview)
        written.append(out / "summary.json")
        return written, overview


def verify_run(ws: Workspace) -> list[str]:
    """Files not registered in the manifest, missing files, and digest mismatches."""
    registered = ws.outputs()
    problems = []
    for path in sorted(p for p in ws.root.rglob("*") if p.is_file()):
        rel = ws.rel(path)
        if rel == MANIFEST or path.name.startswith("."):
            continue
        if rel not in registered:
            problems.append(f"orphan artifact (not in manifest): {rel}")
        elif file_digest(path) != registered[rel]:
            problems.append(f"digest mismatch: {rel}")
    for rel in sorted(registered):
        if not ws.path(rel).exists():
            problems.append(f"registered artifact missing: {rel}")
    return problems


def manifest_digests(run_dir: str | Path) -> dict[str, str]:
    data = read_json(Path(run_dir) / MANIFEST)
    merged: dict[str, str] = {}
    for entry in data["stages"].values():
        merged.update(entry.get("outputs", {}))
    return dict(sorted(merged.items()))


__all__ = ["Backends", "Pipeline", "STAGES", "Selection", "Workspace", "build_backends", "derive_seed", "manifest_digests", "verify_run"]
