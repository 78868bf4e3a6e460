"""Return-potential curves over normness deltas.

Deltas are grouped into equal-width bins of normness change; each bin's mean
preference change is one point of the curve. The point of maximum return is
the best reliable bin and the potential return difference is the sum of the
reliable bin means.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigError, EmptyCurveError, InputError
from .preference import PreferenceDelta

DEFAULT_BINS = 10
DEFAULT_RANGE = (-1.0, 1.0)
DEFAULT_MIN_COUNT = 50

CURVE_HEADER = ("bin_lo", "bin_hi", "mean", "count", "stderr", "reliable")


@dataclass(frozen=True)
class RpmBin:
    index: int
    lo: float
    hi: float
    mean: float
    count: int
    stderr: float
    reliable: bool

    @property
    def center(self) -> float:
        return (self.lo + self.hi) / 2

    def contains(self, x: float, last: bool = False) -> bool:
        return self.lo <= x < self.hi or (last and x == self.hi)


@dataclass
class RpmCurve:
    community: str
    dimension: str
    bins: list[RpmBin]
    bin_width: float
    delta_mode: bool = True
    min_count: int = DEFAULT_MIN_COUNT
    out_of_range: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def reliable(self) -> list[RpmBin]:
        return [b for b in self.bins if b.reliable]

    @property
    def total(self) -> int:
        return sum(b.count for b in self.bins)

    def bin_index(self, x: float) -> int | None:
        """Index of the bin holding ``x`` or None when out of range."""
        lo, hi = self.bins[0].lo, self.bins[-1].hi
        if not lo <= x <= hi:
            return None
        edges = [b.lo for b in self.bins] + [hi]
        return min(int(np.searchsorted(edges, x, side="right")) - 1, len(self.bins) - 1)


def _pairs(deltas: Iterable[PreferenceDelta | tuple[float, float]]) -> tuple[np.ndarray, np.ndarray]:
    xs, ys = [], []
    for d in deltas:
        if isinstance(d, PreferenceDelta):
            xs.append(d.d_phi)
            ys.append(d.d_psi)
        else:
            x, y = d
            xs.append(x)
            ys.append(y)
    return np.asarray(xs, dtype=float), np.asarray(ys, dtype=float)


def build_curve(
    deltas: Sequence[PreferenceDelta | tuple[float, float]],
    n_bins: int = DEFAULT_BINS,
    value_range: tuple[float, float] = DEFAULT_RANGE,
    min_count: int = DEFAULT_MIN_COUNT,
    community: str = "",
    dimension: str = "",
    delta_mode: bool = True,
    allow_empty: bool = False,
) -> RpmCurve:
    """Bin ``(normness change, preference change)`` pairs into a curve.

    Bins are half-open ``[lo, hi)`` except the last, which includes its upper
    edge. Points outside ``value_range`` are counted in ``out_of_range``.
    Bins with fewer than ``min_count`` points are kept but marked unreliable.
    Raises :class:`EmptyCurveError` when no bin is reliable unless
    ``allow_empty``.
    """
    if n_bins < 2:
        raise ConfigError("a curve needs at least two bins")
    lo, hi = map(float, value_range)
    if not lo < hi:
        raise ConfigError("value range must have lo < hi")
    if min_count < 1:
        raise ConfigError("min_count must be >= 1")
    x, y = _pairs(deltas)
    if x.size == 0:
        raise InputError("no deltas to bin")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise InputError("deltas must be finite")

    edges = np.round(np.linspace(lo, hi, n_bins + 1), 12)
    inside = (x >= lo) & (x <= hi)
    idx = np.minimum(np.searchsorted(edges, x[inside], side="right") - 1, n_bins - 1)
    yin = y[inside]
    counts = np.bincount(idx, minlength=n_bins)
    sums = np.bincount(idx, weights=yin, minlength=n_bins)

    bins = []
    for k in range(n_bins):
        n = int(counts[k])
        mean = sums[k] / n if n else math.nan
        if n >= 2:
            vals = yin[idx == k]
            stderr = float(vals.std(ddof=1) / math.sqrt(n))
        else:
            stderr = math.nan
        bins.append(RpmBin(k, float(edges[k]), float(edges[k + 1]), float(mean), n, stderr, n >= min_count))

    curve = RpmCurve(community, dimension, bins, (hi - lo) / n_bins, delta_mode, min_count, int((~inside).sum()))
    if not curve.reliable and not allow_empty:
        raise EmptyCurveError(f"no bin reaches {min_count} deltas for {community or '?'}/{dimension or '?'}")
    return curve


def pmr(curve: RpmCurve) -> RpmBin:
    """Reliable bin with the highest mean.

    Ties go to the bin whose centre is closest to zero change, then to the
    lower bin.
    """
    reliable = curve.reliable
    if not reliable:
        raise EmptyCurveError("curve has no reliable bins")
    best = max(b.mean for b in reliable)
    return min((b for b in reliable if b.mean == best), key=lambda b: (abs(b.center), b.center))


def prd(curve: RpmCurve) -> float:
    """Sum of reliable bin means (rewarded change minus penalised change)."""
    reliable = curve.reliable
    if not reliable:
        raise EmptyCurveError("curve has no reliable bins")
    return float(sum(b.mean for b in reliable))


def curve_rows(curve: RpmCurve) -> list[list]:
    return [[b.lo, b.hi, b.mean, b.count, b.stderr, int(b.reliable)] for b in curve.bins]


def curve_summary(curve: RpmCurve) -> dict:
    out = {
        "community": curve.community,
        "dimension": curve.dimension,
        "n_bins": len(curve.bins),
        "bin_width": curve.bin_width,
        "min_count": curve.min_count,
        "delta_mode": curve.delta_mode,
        "in_range": curve.total,
        "out_of_range": curve.out_of_range,
        "reliable_bins": len(curve.reliable),
        "pmr": None,
        "prd": None,
    }
    if curve.reliable:
        best = pmr(curve)
        out["pmr"] = {"index": best.index, "lo": best.lo, "hi": best.hi, "center": best.center, "mean": best.mean}
        out["prd"] = prd(curve)
    return out
