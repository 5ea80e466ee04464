"""Per-user beauty aggregation and network-level mixing metrics."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import UndefinedStatisticError
from .graphstore import GraphSnapshot, TemporalGraph, week_of
from .scoring import spearman_rho


class BeautyProfiles:
    """Per-user beauty aggregates over the weekly timeline.

    Exposes the overall mean, the single-week mean and the cumulative mean
    through a given week. Users without photos have no profile entry.
    """

    def __init__(self, g: TemporalGraph):
        self._weeks: dict[int, np.ndarray] = {}
        self._week_means: dict[int, np.ndarray] = {}
        self._cum_sums: dict[int, np.ndarray] = {}
        self._cum_counts: dict[int, np.ndarray] = {}
        self._overall: dict[int, float] = {}
        for u in g.users:
            photos = g.photos_of(u)
            if not photos:
                continue
            per_week: dict[int, list[float]] = {}
            for p in photos:
                per_week.setdefault(week_of(p.t), []).append(p.beauty)
            weeks = np.array(sorted(per_week), dtype=np.int64)
            sums = np.array([sum(per_week[w]) for w in weeks], dtype=float)
            counts = np.array([len(per_week[w]) for w in weeks], dtype=float)
            self._weeks[u] = weeks
            self._week_means[u] = sums / counts
            self._cum_sums[u] = np.cumsum(sums)
            self._cum_counts[u] = np.cumsum(counts)
            self._overall[u] = float(self._cum_sums[u][-1] / self._cum_counts[u][-1])

    @classmethod
    def from_graph(cls, g: TemporalGraph) -> "BeautyProfiles":
        return cls(g)

    def overall(self, u: int) -> float | None:
        """Mean beauty over all of u's photos."""
        return self._overall.get(u)

    def weekly(self, u: int, w: int) -> float | None:
        """Mean beauty of u's photos uploaded during week w."""
        weeks = self._weeks.get(u)
        if weeks is None:
            return None
        i = np.searchsorted(weeks, w)
        if i == len(weeks) or weeks[i] != w:
            return None
        return float(self._week_means[u][i])

    def cumulative(self, u: int, w: int) -> float | None:
        """Mean beauty of u's photos uploaded in weeks <= w."""
        weeks = self._weeks.get(u)
        if weeks is None:
            return None
        i = np.searchsorted(weeks, w, side="right")
        if i == 0:
            return None
        return float(self._cum_sums[u][i - 1] / self._cum_counts[u][i - 1])

    def overall_map(self) -> dict[int, float]:
        """user -> overall mean beauty, for every user with photos."""
        return dict(self._overall)

    def __contains__(self, u: int) -> bool:
        return u in self._overall

    def __len__(self) -> int:
        return len(self._overall)


def user_beauty(g: TemporalGraph, u: int, up_to: int | None = None) -> float | None:
    """Mean photo beauty of a user, optionally over weeks <= `up_to` only.

    Returns None (not zero) when the user has no photos in range.
    """
    photos = g.photos_of(u)
    if up_to is not None:
        photos = [p for p in photos if week_of(p.t) <= up_to]
    if not photos:
        return None
    return sum(p.beauty for p in photos) / len(photos)


def gini(values) -> float:
    """Gini index via the mean-absolute-difference definition.

    Computed with the O(n log n) sorted identity, which equals
    sum_ij |x_i - x_j| / (2 n^2 mean).
    """
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        raise ValueError("need at least one value")
    if (x < 0).any():
        raise ValueError("values must be non-negative")
    total = x.sum()
    if total == 0.0:
        raise UndefinedStatisticError("all values are zero; Gini undefined")
    x = np.sort(x)
    n = x.size
    ranks = np.arange(1, n + 1, dtype=float)
    return float((2.0 * (ranks * x).sum() - (n + 1) * total) / (n * total))


def lorenz_curve(values) -> list[tuple[float, float]]:
    """Cumulative (population share, resource share) points, ascending order."""
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        raise ValueError("need at least one value")
    if (x < 0).any():
        raise ValueError("values must be non-negative")
    total = x.sum()
    if total == 0.0:
        raise UndefinedStatisticError("all values are zero; Lorenz curve undefined")
    x = np.sort(x)
    n = x.size
    cum = np.cumsum(x) / total
    points = [(0.0, 0.0)]
    points.extend(((k + 1) / n, float(cum[k])) for k in range(n))
    return points


@dataclass(frozen=True, slots=True)
class SpectrumBin:
    center: float
    b_nn: float
    count: int
    variance: float


@dataclass(frozen=True)
class SpectrumCurve:
    """Mean out-neighbor beauty conditioned on own beauty, in fixed-width bins."""

    n_bins: int
    bins: tuple[SpectrumBin, ...]

    def as_rows(self) -> list[tuple[float, float, int, float]]:
        return [(b.center, b.b_nn, b.count, b.variance) for b in self.bins]


def _beauty_bin(value: float, n_bins: int) -> int:
    # half-open bins [lo, hi) over [0, 1]; the last bin is closed
    return min(int(value * n_bins), n_bins - 1)


def correlation_spectrum(
    snapshot: GraphSnapshot, profiles: Mapping[int, float], bins: int = 100
) -> SpectrumCurve:
    """Average out-neighbor beauty of users grouped by their own beauty.

    A user contributes the mean beauty of their profiled out-neighbors;
    neighbors without profiles are excluded from the average, and users with
    no profiled out-neighbor do not contribute at all. Per-bin variance is
    the population variance of the contributed means.
    """
    sums = np.zeros(bins)
    sq_sums = np.zeros(bins)
    counts = np.zeros(bins, dtype=np.int64)
    for u, own in profiles.items():
        nbr_vals = [profiles[v] for v in snapshot.out_neighbors(u) if v in profiles]
        if not nbr_vals:
            continue
        nm = sum(nbr_vals) / len(nbr_vals)
        b = _beauty_bin(own, bins)
        sums[b] += nm
        sq_sums[b] += nm * nm
        counts[b] += 1
    out = []
    width = 1.0 / bins
    for b in range(bins):
        if counts[b] == 0:
            continue
        mean = sums[b] / counts[b]
        var = max(sq_sums[b] / counts[b] - mean * mean, 0.0)
        out.append(SpectrumBin((b + 0.5) * width, float(mean), int(counts[b]), float(var)))
    return SpectrumCurve(n_bins=bins, bins=tuple(out))


def spectrum_slope(curve: SpectrumCurve) -> float:
    """Rank correlation between bin centers and b_nn; the assortativity signal."""
    if len(curve.bins) < 2:
        raise UndefinedStatisticError("need at least two populated bins")
    centers = [b.center for b in curve.bins]
    values = [b.b_nn for b in curve.bins]
    return spearman_rho(centers, values)


@dataclass(frozen=True)
class IllusionReport:
    threshold: float
    global_fraction: float
    node_fractions: dict[int, float]
    share: float

    @property
    def n_nodes(self) -> int:
        return len(self.node_fractions)


def majority_illusion(
    snapshot: GraphSnapshot, profiles: Mapping[int, float], threshold: float | None = None
) -> IllusionReport:
    """Local over-representation of above-threshold beauty in neighborhoods.

    With no explicit threshold the global mean beauty is used. ``q`` is the
    fraction of profiled users above the threshold; the report's share is the
    fraction of nodes (with at least one profiled out-neighbor) whose own
    neighborhood fraction exceeds q.
    """
    if not profiles:
        raise ValueError("need at least one profiled user")
    values = np.fromiter(profiles.values(), dtype=float, count=len(profiles))
    thr = float(values.mean()) if threshold is None else float(threshold)
    q = float((values > thr).mean())
    node_fractions: dict[int, float] = {}
    n_exceeding = 0
    for u in snapshot.users:
        profiled = [v for v in snapshot.out_neighbors(u) if v in profiles]
        if not profiled:
            continue
        frac = sum(1 for v in profiled if profiles[v] > thr) / len(profiled)
        node_fractions[u] = frac
        if frac > q:
            n_exceeding += 1
    share = n_exceeding / len(node_fractions) if node_fractions else 0.0
    return IllusionReport(threshold=thr, global_fraction=q, node_fractions=node_fractions, share=share)


def shuffle_null_model(profiles: Mapping[int, float], seed: int) -> dict[int, float]:
    """Reassign the observed beauty values uniformly at random across users.

    The value multiset is preserved exactly; only the user -> value mapping
    changes. Deterministic for a given seed.
    """
    users = sorted(profiles)
    values = np.array([profiles[u] for u in users], dtype=float)
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(users))
    return {u: float(values[p]) for u, p in zip(users, perm)}


def degree_beauty_correlation(
    snapshot: GraphSnapshot, profiles: Mapping[int, float], direction: str = "in"
) -> float:
    """Rank correlation between nodal degree and user beauty."""
    if direction not in ("in", "out"):
        raise ValueError(f"direction must be 'in' or 'out', got {direction!r}")
    users = sorted(profiles)
    if len(users) < 2:
        raise ValueError("need at least 2 profiled users")
    degree = snapshot.in_degree if direction == "in" else snapshot.out_degree
    degrees = [degree(u) for u in users]
    beauties = [profiles[u] for u in users]
    return spearman_rho(degrees, beauties)
