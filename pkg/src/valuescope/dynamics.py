"""Norm intensity, crystallization, temporal change and user-level shifts.

Comments are grouped by community, dimension, normness bin and period.
Intensity is the mean preference in a group; crystallization is the inverse
spread of preference after subsampling every bin of a period to the size of
the smallest one. Temporal change is the intensity difference between two
periods and is regressed on intensity alone and on intensity plus
crystallization.
"""

from __future__ import annotations

import logging
import math
import warnings
from collections import defaultdict
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np
from scipy.special import betainc

from .corpus import Comment, Period, TimeBin, time_bin
from .exceptions import ConfigError, DegenerateWarning, InputError, InsufficientDataError, SingularDesignError

logger = logging.getLogger(__name__)

ALPHA = 0.05
DEFAULT_S1 = "2019-2020"
DEFAULT_S2 = "2021-2023"
ANONYMOUS_AUTHORS = frozenset({"", "[deleted]", "[removed]"})


@dataclass(frozen=True)
class BinKey:
    community: str
    dimension: str
    bin_lo: float
    bin_hi: float


@dataclass(frozen=True)
class NormIntensityRecord:
    key: BinKey
    period: str
    ni: float
    n: int

    @property
    def low_n(self) -> bool:
        return self.n < 2


@dataclass(frozen=True)
class CrystallizationRecord:
    key: BinKey
    period: str
    cr: float
    subsample_n: int
    seed: int
    degenerate: bool = False


@dataclass(frozen=True)
class TemporalChangeRecord:
    key: BinKey
    tc: float
    ni_s1: float
    ni_s2: float


@dataclass(frozen=True)
class RegressionFit:
    names: tuple[str, ...]
    coefficients: tuple[float, ...]
    stderr: tuple[float, ...]
    pvalues: tuple[float, ...]
    r2: float
    n: int

    def coef(self, name: str) -> float:
        return self.coefficients[self.names.index(name)]

    def se(self, name: str) -> float:
        return self.stderr[self.names.index(name)]

    def p(self, name: str) -> float:
        return self.pvalues[self.names.index(name)]


@dataclass(frozen=True)
class TTestResult:
    t: float
    df: int
    p: float
    mean: float
    n: int
    degenerate: bool = False


@dataclass(frozen=True)
class UserShiftRecord:
    community_a: str
    community_b: str
    dimension: str
    n_users: int
    mean_delta: float
    t: float
    p: float
    significance: str
    degenerate: bool = False


# ------------------------------------------------------------------- statistics


def student_t_sf(t: float, df: float) -> float:
    """P(T > t) for Student's t with ``df`` degrees of freedom."""
    if df <= 0:
        raise ValueError("df must be positive")
    if math.isinf(t):
        return 0.0 if t > 0 else 1.0
    t2 = t * t
    if t2 < df:
        # near zero df / (df + t^2) rounds to 1; the complementary form keeps precision
        tail = 0.5 - 0.5 * float(betainc(0.5, df / 2, t2 / (df + t2)))
    else:
        tail = 0.5 * float(betainc(df / 2, 0.5, df / (df + t2)))
    return tail if t >= 0 else 1.0 - tail


def two_sided_p(t: float, df: float) -> float:
    return min(1.0, 2.0 * student_t_sf(abs(t), df))


def paired_ttest(deltas: Sequence[float]) -> TTestResult:
    """One-sample t-test of the mean of paired differences against zero.

    Zero spread gives a degenerate result (t and p are NaN) and a
    :class:`DegenerateWarning`.
    """
    x = np.asarray(deltas, dtype=float)
    n = x.size
    if n < 2:
        raise InsufficientDataError("a paired t-test needs at least two differences")
    mean = float(x.mean())
    sd = float(x.std(ddof=1))
    if sd == 0:
        warnings.warn("paired t-test undefined: all differences are equal", DegenerateWarning, stacklevel=2)
        return TTestResult(math.nan, n - 1, math.nan, mean, n, degenerate=True)
    t = mean / (sd / math.sqrt(n))
    return TTestResult(t, n - 1, two_sided_p(t, n - 1), mean, n)


def ols_fit(X, y, names: Sequence[str] | None = None) -> RegressionFit:
    """Least squares with an intercept; p-values from t with n - k df.

    ``X`` is n x p (no intercept column). The returned names start with
    ``"intercept"``.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    if y.shape != (n,):
        raise InputError("X and y disagree on the number of rows")
    names = tuple(names) if names is not None else tuple(f"x{k}" for k in range(p))
    if len(names) != p:
        raise InputError("one name per predictor column is required")
    design = np.column_stack([np.ones(n), X])
    k = p + 1
    if n <= k:
        raise InsufficientDataError(f"regression needs more than {k} rows, got {n}")
    if np.linalg.matrix_rank(design) < k:
        raise SingularDesignError("design matrix is rank deficient")
    beta, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ beta
    ss_res = float(resid @ resid)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    if ss_tot == 0:
        warnings.warn("R^2 undefined: target is constant", DegenerateWarning, stacklevel=2)
        r2 = math.nan
    else:
        r2 = 1.0 - ss_res / ss_tot
    df = n - k
    sigma2 = ss_res / df
    cov = sigma2 * np.linalg.inv(design.T @ design)
    se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    pvals = []
    for b, s in zip(beta, se):
        if s == 0:
            pvals.append(0.0 if b != 0 else 1.0)
        else:
            pvals.append(two_sided_p(float(b / s), df))
    return RegressionFit(("intercept",) + names, tuple(map(float, beta)), tuple(map(float, se)), tuple(pvals), r2, n)


# --------------------------------------------------------------- intensity & CR


def norm_intensity(preferences: Sequence[float], key: BinKey, period: str = "") -> NormIntensityRecord:
    x = np.asarray(preferences, dtype=float)
    if x.size == 0:
        raise InsufficientDataError(f"no comments in {key} / {period}")
    rec = NormIntensityRecord(key, period, float(x.mean()), int(x.size))
    if rec.low_n:
        logger.info("intensity for %s / %s rests on a single comment", key, period)
    return rec


def crystallization(
    bins: Mapping[BinKey, Sequence[float]],
    seed: int,
    period: str = "",
) -> list[CrystallizationRecord]:
    """Inverse spread of preference per bin after equal-size subsampling.

    Every bin is subsampled without replacement to the smallest bin's size;
    ``CR = (m - 1) / sum((x - NI_full)^2)`` over the subsample, where
    ``NI_full`` is the intensity of the whole bin. Bins already at the
    minimum are used whole. A zero sum flags the bin degenerate (CR = NaN).
    """
    if not bins:
        return []
    sizes = {k: len(v) for k, v in bins.items()}
    if min(sizes.values()) < 2:
        empty = [k for k, s in sizes.items() if s < 2]
        raise InsufficientDataError(f"{len(empty)} bin(s) have fewer than two comments, e.g. {empty[0]}")
    m = min(sizes.values())
    rng = np.random.default_rng(seed)
    out = []
    for key in sorted(bins, key=lambda k: (k.community, k.dimension, k.bin_lo)):
        full = np.asarray(bins[key], dtype=float)
        sub = full if full.size == m else full[np.sort(rng.choice(full.size, size=m, replace=False))]
        ss = float(((sub - full.mean()) ** 2).sum())
        if ss == 0:
            warnings.warn(f"crystallization undefined for {key}: no spread", DegenerateWarning, stacklevel=2)
            out.append(CrystallizationRecord(key, period, math.nan, m, seed, degenerate=True))
        else:
            out.append(CrystallizationRecord(key, period, (m - 1) / ss, m, seed))
    return out


def temporal_change(ni_s1: NormIntensityRecord, ni_s2: NormIntensityRecord) -> TemporalChangeRecord:
    if ni_s1.key != ni_s2.key:
        raise InputError(f"intensity records disagree on key: {ni_s1.key} vs {ni_s2.key}")
    return TemporalChangeRecord(ni_s1.key, ni_s1.ni - ni_s2.ni, ni_s1.ni, ni_s2.ni)


def normness_bin(value: float, n_bins: int) -> tuple[float, float]:
    """Equal-width bin of [0, 1] holding ``value``; 1.0 falls in the last bin."""
    k = min(int(value * n_bins), n_bins - 1)
    return round(k / n_bins, 10), round((k + 1) / n_bins, 10)


@dataclass
class DynamicsTables:
    intensity: list[NormIntensityRecord] = field(default_factory=list)
    crystallization: list[CrystallizationRecord] = field(default_factory=list)
    changes: list[TemporalChangeRecord] = field(default_factory=list)
    fits: dict[str, dict[str, RegressionFit | None]] = field(default_factory=dict)
    excluded: list[str] = field(default_factory=list)


def _group(comments, normness, preferences, n_bins, dimension, period: Period | None):
    groups: dict[BinKey, list[float]] = defaultdict(list)
    for c in comments:
        if c.comment_id not in normness or c.comment_id not in preferences:
            continue
        if period is not None and not period.contains(c.created_at):
            continue
        lo, hi = normness_bin(normness[c.comment_id], n_bins)
        groups[BinKey(c.community, dimension, lo, hi)].append(preferences[c.comment_id])
    return groups


def dynamics_tables(
    comments: Sequence[Comment],
    normness: Mapping[str, Mapping[str, float]],
    preferences: Mapping[str, Mapping[str, float]] | Mapping[str, float],
    n_bins: int = 10,
    s1: str = DEFAULT_S1,
    s2: str = DEFAULT_S2,
    seed: int = 0,
) -> DynamicsTables:
    """Intensity, crystallization and temporal change for every dimension.

    ``normness`` maps dimension -> comment id -> normness. ``preferences``
    is either one id -> preference map or, like ``normness``, one map per
    dimension. Predictors of the
    regressions are intensity and crystallization in ``s1``; the target is
    the change from ``s1`` to ``s2``. Bins missing from either period are
    excluded and listed.
    """
    if n_bins < 1:
        raise ConfigError("n_bins must be >= 1")
    p1, p2 = Period.parse(s1), Period.parse(s2)
    out = DynamicsTables()
    per_dimension = bool(preferences) and all(isinstance(v, Mapping) for v in preferences.values())
    for dimension in sorted(normness):
        prefs = preferences.get(dimension, {}) if per_dimension else preferences
        g1 = _group(comments, normness[dimension], prefs, n_bins, dimension, p1)
        g2 = _group(comments, normness[dimension], prefs, n_bins, dimension, p2)
        ni1 = {k: norm_intensity(v, k, str(p1)) for k, v in g1.items()}
        ni2 = {k: norm_intensity(v, k, str(p2)) for k, v in g2.items()}
        out.intensity.extend(ni1[k] for k in sorted(ni1, key=_order))
        out.intensity.extend(ni2[k] for k in sorted(ni2, key=_order))

        cr = {}
        for community in sorted({k.community for k in g1}):
            sub = {k: v for k, v in g1.items() if k.community == community and len(v) >= 2}
            dropped = [k for k, v in g1.items() if k.community == community and len(v) < 2]
            out.excluded.extend(f"{_label(k)} {p1}: fewer than two comments for crystallization" for k in sorted(dropped, key=_order))
            for rec in crystallization(sub, seed, str(p1)):
                cr[rec.key] = rec
                out.crystallization.append(rec)

        rows = []
        for k in sorted(set(ni1) | set(ni2), key=_order):
            if k not in ni1 or k not in ni2:
                out.excluded.append(f"{_label(k)}: missing in {'s1' if k not in ni1 else 's2'}")
                continue
            change = temporal_change(ni1[k], ni2[k])
            out.changes.append(change)
            rec = cr.get(k)
            if rec is not None and not rec.degenerate:
                rows.append((ni1[k].ni, rec.cr, change.tc))
        out.fits[dimension] = _fit_pair(rows, dimension)
    return out


def _order(k: BinKey):
    return (k.community, k.dimension, k.bin_lo)


def _label(k: BinKey) -> str:
    return f"{k.community}/{k.dimension}/[{k.bin_lo:g},{k.bin_hi:g})"


def _fit_pair(rows, dimension) -> dict[str, RegressionFit | None]:
    fits: dict[str, RegressionFit | None] = {"ni": None, "ni_cr": None}
    if not rows:
        return fits
    arr = np.asarray(rows, dtype=float)
    for name, cols, labels in (("ni", [0], ("NI",)), ("ni_cr", [0, 1], ("NI", "CR"))):
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", DegenerateWarning)
                fits[name] = ols_fit(arr[:, cols], arr[:, 2], labels)
        except (InsufficientDataError, SingularDesignError) as exc:
            logger.warning("%s regression for %s skipped: %s", name, dimension, exc)
    return fits


TABLE2_HEADER = ("dimension", "n", "c_ni", "p_ni", "r2_ni", "c_ni_2", "p_ni_2", "c_cr", "p_cr", "r2_ni_cr")


def table2_rows(fits: Mapping[str, Mapping[str, RegressionFit | None]]) -> list[list]:
    rows = []
    for dim in sorted(fits):
        a, b = fits[dim]["ni"], fits[dim]["ni_cr"]
        row = [dim, a.n if a else (b.n if b else 0)]
        row += [a.coef("NI"), a.p("NI"), a.r2] if a else ["", "", ""]
        row += [b.coef("NI"), b.p("NI"), b.coef("CR"), b.p("CR"), b.r2] if b else ["", "", "", "", ""]
        rows.append(row)
    return rows


# ------------------------------------------------------------------ time series


INTENSITY_HEADER = ("community", "dimension", "bin_lo", "bin_hi", "time_label", "time_start", "time_end", "ni", "n")


def intensity_series(
    comments: Sequence[Comment],
    normness: Mapping[str, float],
    preferences: Mapping[str, float],
    dimension: str,
    n_bins: int = 10,
    width_months: int = 6,
) -> list[list]:
    """Intensity per calendar window and normness bin, plus an ``all`` row per window.

    The ``all`` row averages the per-bin intensities of that window.
    """
    rows = []
    by_community: dict[str, list[Comment]] = defaultdict(list)
    for c in comments:
        if c.comment_id in normness and c.comment_id in preferences:
            by_community[c.community].append(c)
    for community in sorted(by_community):
        windows: dict[TimeBin, list[Comment]] = time_bin(by_community[community], width_months)
        for window in sorted(windows):
            groups = _group(windows[window], normness, preferences, n_bins, dimension, None)
            if not groups:
                continue
            nis = []
            for k in sorted(groups, key=_order):
                rec = norm_intensity(groups[k], k)
                nis.append(rec.ni)
                rows.append([community, dimension, k.bin_lo, k.bin_hi, window.label, window.start, window.end, rec.ni, rec.n])
            total = sum(len(v) for v in groups.values())
            rows.append([community, dimension, "all", "all", window.label, window.start, window.end, float(np.mean(nis)), total])
    return rows


# -------------------------------------------------------------------- user shift


def user_shift(
    comments_a: Sequence[Comment],
    comments_b: Sequence[Comment],
    normness: Mapping[str, float],
    dimension: str = "",
    min_comments: int = 2,
    alpha: float = ALPHA,
) -> UserShiftRecord:
    """Mean per-user change in normness from community A to community B.

    Only users with at least ``min_comments`` scored comments on both sides
    count. Significance is ``pos``/``neg`` when the two-sided p-value is
    below ``alpha`` and ``ns`` otherwise, including degenerate tests.
    """
    def per_user(comments):
        vals: dict[str, list[float]] = defaultdict(list)
        for c in comments:
            if c.author not in ANONYMOUS_AUTHORS and c.comment_id in normness:
                vals[c.author].append(normness[c.comment_id])
        return {u: v for u, v in vals.items() if len(v) >= min_comments}

    ua, ub = per_user(comments_a), per_user(comments_b)
    shared = sorted(set(ua) & set(ub))
    name_a = comments_a[0].community if comments_a else "A"
    name_b = comments_b[0].community if comments_b else "B"
    if len(shared) < 2:
        raise InsufficientDataError(f"{name_a}->{name_b}: {len(shared)} shared user(s) with >= {min_comments} comments on both sides")
    deltas = [float(np.mean(ub[u]) - np.mean(ua[u])) for u in shared]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateWarning)
        test = paired_ttest(deltas)
    if test.degenerate or not test.p < alpha:
        sig = "ns"
    else:
        sig = "pos" if test.mean > 0 else "neg"
    return UserShiftRecord(name_a, name_b, dimension, len(shared), test.mean, test.t, test.p, sig, test.degenerate)


TABLE5_HEADER = ("community_a", "community_b", "dimension", "n_users", "mean_delta", "t", "p", "significance", "degenerate")


def table5_rows(records: Sequence[UserShiftRecord]) -> list[list]:
    return [
        [r.community_a, r.community_b, r.dimension, r.n_users, r.mean_delta, r.t, r.p, r.significance, int(r.degenerate)]
        for r in records
    ]
