"""Matching-based causal inference over the weekly event timeline.

Experimental units are (user, week) instances described by covariate vectors
measured at the beginning of the week. Treatment/control groups are built
from link-creation events (beauty-of-new-contact experiments) or from the
standing neighborhood (beauty-imbalance experiments), then balanced with a
greedy standardized-bias pruning procedure before outcomes are compared.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .errors import (
    BalanceRestartError,
    ConfigError,
    UnbalanceableCovariateError,
    UndefinedStatisticError,
)
from .graphstore import TemporalGraph, activity_weeks, week_of

COVARIATE_NAMES = (
    "indegree",
    "outdegree",
    "photos_uploaded",
    "group_memberships",
    "favorites_given",
    "favorites_received",
    "avg_photo_beauty",
    "weeks_since_join",
    "neighbor_photos",
    "neighbor_avg_beauty",
    "new_neighbor_photos",
)

# The imbalance experiment defines treatment via the neighbors' relative
# beauty, so that covariate (and the new-neighbor one, which needs no link
# that week) is left out of its balance check.
IMBALANCE_COVARIATE_NAMES = COVARIATE_NAMES[:9]

MIN_OUTDEGREE = 10
MIN_ACTIVE_WEEKS = 12
BALANCE_THRESHOLD = 0.25


@dataclass(frozen=True, slots=True)
class UserWeekInstance:
    user: int
    week: int
    covariates: tuple[float, ...]


@dataclass(frozen=True)
class InstanceGroup:
    """A set of (user, week) experimental units plus their covariate matrix."""

    users: np.ndarray
    weeks: np.ndarray
    X: np.ndarray
    covariate_names: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.users)

    def subset(self, idx) -> "InstanceGroup":
        return InstanceGroup(self.users[idx], self.weeks[idx], self.X[idx], self.covariate_names)

    def instance(self, i: int) -> UserWeekInstance:
        return UserWeekInstance(int(self.users[i]), int(self.weeks[i]), tuple(self.X[i]))

    def instances(self) -> Iterator[UserWeekInstance]:
        for i in range(len(self)):
            yield self.instance(i)

    @classmethod
    def from_instances(cls, instances, covariate_names) -> "InstanceGroup":
        users = np.array([inst.user for inst in instances], dtype=np.int64)
        weeks = np.array([inst.week for inst in instances], dtype=np.int64)
        X = np.array([inst.covariates for inst in instances], dtype=float)
        if X.size == 0:
            X = X.reshape(0, len(covariate_names))
        return cls(users, weeks, X, tuple(covariate_names))

    @classmethod
    def empty(cls, covariate_names) -> "InstanceGroup":
        return cls(
            np.empty(0, dtype=np.int64),
            np.empty(0, dtype=np.int64),
            np.empty((0, len(covariate_names))),
            tuple(covariate_names),
        )


class WeeklyPanel:
    """Cumulative weekly event counts per user, for O(1) beginning-of-week
    covariate lookups.

    Column ``c`` of each matrix holds the count (or beauty sum) of events
    with week index strictly below ``week_offset + c``.
    """

    def __init__(self, g: TemporalGraph):
        self.users = np.array(g.users, dtype=np.int64)
        self.index = {int(u): i for i, u in enumerate(self.users)}
        n = len(self.users)

        weeks_seen = [0]
        for evs in (g.follows, g.photos, g.favorites, g.groups):
            if evs:
                weeks_seen.append(week_of(evs[0].t))
        self.week_offset = min(weeks_seen)
        self.last_week = g.last_week
        self.n_cols = self.last_week - self.week_offset + 2

        def blank(dtype=np.float64):
            return np.zeros((n, self.n_cols), dtype=dtype)

        photos_cnt = blank()
        beauty_sum = blank()
        favs_given = blank()
        favs_recv = blank()
        groups_cnt = blank()
        out_deg = blank()
        in_deg = blank()

        def col(w: int) -> int:
            return w - self.week_offset + 1

        for p in g.photos:
            i = self.index[p.owner]
            c = col(week_of(p.t))
            photos_cnt[i, c] += 1.0
            beauty_sum[i, c] += p.beauty
        for f in g.favorites:
            favs_given[self.index[f.actor], col(week_of(f.t))] += 1.0
        for u in g.users:
            for f in g.favorites_received(u):
                favs_recv[self.index[u], col(week_of(f.t))] += 1.0
        for ge in g.groups:
            groups_cnt[self.index[ge.member], col(week_of(ge.t))] += 1.0
        for e in g.follows:
            c = col(week_of(e.t))
            out_deg[self.index[e.src], c] += 1.0
            in_deg[self.index[e.dst], c] += 1.0

        active = photos_cnt[:, 1:] > 0  # photo activity per actual week
        self.prior_active = np.zeros((n, self.n_cols), dtype=np.int64)
        self.prior_active[:, 1:] = np.cumsum(active, axis=1)

        for m in (photos_cnt, beauty_sum, favs_given, favs_recv, groups_cnt, out_deg, in_deg):
            np.cumsum(m, axis=1, out=m)
        self.photos_cnt = photos_cnt
        self.beauty_sum = beauty_sum
        self.favs_given = favs_given
        self.favs_recv = favs_recv
        self.groups_cnt = groups_cnt
        self.out_deg = out_deg
        self.in_deg = in_deg

        self.join_week = np.array([g.join_week[int(u)] for u in self.users], dtype=np.int64)

        # per-user out-edge creation weeks and target rows, time-sorted
        self.out_edge_weeks: list[np.ndarray] = [np.empty(0, dtype=np.int64)] * n
        self.out_edge_dst: list[np.ndarray] = [np.empty(0, dtype=np.int64)] * n
        for u in g.users:
            evs = g.out_events(u)
            if not evs:
                continue
            i = self.index[u]
            self.out_edge_weeks[i] = np.array([week_of(e.t) for e in evs], dtype=np.int64)
            self.out_edge_dst[i] = np.array([self.index[e.dst] for e in evs], dtype=np.int64)

    def cut(self, w: int) -> int:
        """Column index holding counts of events strictly before week w."""
        return int(np.clip(w - self.week_offset, 0, self.n_cols - 1))

    def active_in(self, i: int, w: int) -> bool:
        a, b = self.cut(w), self.cut(w + 1)
        return self.photos_cnt[i, b] > self.photos_cnt[i, a]

    def beauty_through(self, i: int, w: int) -> float | None:
        """Mean photo beauty over weeks <= w, or None if no photos yet."""
        c = self.cut(w + 1)
        cnt = self.photos_cnt[i, c]
        if cnt == 0:
            return None
        return float(self.beauty_sum[i, c] / cnt)


def get_panel(g: TemporalGraph) -> WeeklyPanel:
    panel = getattr(g, "_weekly_panel", None)
    if panel is None:
        panel = WeeklyPanel(g)
        g._weekly_panel = panel
    return panel


def eligible_users(g: TemporalGraph) -> set[int]:
    """Users with enough connections and sustained activity to enter the
    experiments: final out-degree >= 10 and photos in >= 12 distinct weeks."""
    out = set()
    for u in g.users:
        if g.out_degree(u) >= MIN_OUTDEGREE and len(activity_weeks(g, u)) >= MIN_ACTIVE_WEEKS:
            out.add(u)
    return out


def neighbor_mean_beauty(g: TemporalGraph, u: int, w: int, neighbor_set: str = "full") -> float | None:
    """Mean cumulative-through-w beauty over a neighbor set of u.

    ``full`` uses followees acquired before week w, ``new`` the followees
    acquired during week w. Neighbors without photos through week w are
    excluded; an empty effective set yields None.
    """
    if neighbor_set == "full":
        nbrs = g.out_neighbors_before(u, w)
    elif neighbor_set == "new":
        nbrs = g.out_links_in_week(u, w)
    else:
        raise ValueError(f"neighbor_set must be 'full' or 'new', got {neighbor_set!r}")
    panel = get_panel(g)
    vals = []
    for v in nbrs:
        b = panel.beauty_through(panel.index[v], w)
        if b is not None:
            vals.append(b)
    if not vals:
        return None
    return sum(vals) / len(vals)


def covariates(g: TemporalGraph, u: int, w: int) -> UserWeekInstance | None:
    """Beginning-of-week covariate vector for one (user, week) instance.

    Counts cover events with week < w; neighbor figures average over the
    followee set acquired before week w; the new-neighbor figure averages
    over followees acquired during week w. Returns None when the vector is
    undefined (no photos before w, or no usable prior neighbors).
    """
    panel = get_panel(g)
    i = panel.index[u]
    vec = _covariate_row(g, panel, i, w)
    if vec is None:
        return None
    return UserWeekInstance(u, w, tuple(vec))


def _covariate_row(g: TemporalGraph, panel: WeeklyPanel, i: int, w: int) -> list[float] | None:
    c = panel.cut(w)
    photos = panel.photos_cnt[i, c]
    if photos == 0:
        return None
    nbr_rows = panel.out_edge_dst[i][: np.searchsorted(panel.out_edge_weeks[i], w)]
    if nbr_rows.size == 0:
        return None
    nbr_photo_counts = panel.photos_cnt[nbr_rows, c]
    with_photos = nbr_photo_counts > 0
    if not with_photos.any():
        return None
    nbr_avg_beauty = float(
        (panel.beauty_sum[nbr_rows, c][with_photos] / nbr_photo_counts[with_photos]).mean()
    )
    lo = np.searchsorted(panel.out_edge_weeks[i], w)
    hi = np.searchsorted(panel.out_edge_weeks[i], w, side="right")
    new_rows = panel.out_edge_dst[i][lo:hi]
    new_nbr_photos = float(panel.photos_cnt[new_rows, c].mean()) if new_rows.size else 0.0
    return [
        float(panel.in_deg[i, c]),
        float(panel.out_deg[i, c]),
        float(photos),
        float(panel.groups_cnt[i, c]),
        float(panel.favs_given[i, c]),
        float(panel.favs_recv[i, c]),
        float(panel.beauty_sum[i, c] / photos),
        float(w - panel.join_week[i]),
        float(nbr_photo_counts.mean()),
        nbr_avg_beauty,
        new_nbr_photos,
    ]


@dataclass(frozen=True)
class GroupBuildResult:
    treatment: InstanceGroup
    control: InstanceGroup
    skipped: dict[str, int] = field(default_factory=dict)


_Q4_VARIANTS = ("any", "exactly_n", "alpha")


def build_groups_q4(
    g: TemporalGraph, variant: str = "any", *, n_links: int = 1, alpha: float = 0.0
) -> GroupBuildResult:
    """Split weekly link creators into treatment and control.

    An instance is a (user, week) pair where an eligible, currently active
    user with 12+ prior active weeks created at least one follow link. Links
    whose target has no photos through the week are ignored for
    classification. Treatment membership depends on the variant:

    - ``any``: at least one new followee with higher cumulative beauty;
    - ``exactly_n``: exactly ``n_links`` such followees;
    - ``alpha``: the new followees' mean beauty is at least (1 + alpha)
      times the user's own.

    Control instances created links but none toward a higher-beauty user.
    """
    if variant not in _Q4_VARIANTS:
        raise ValueError(f"variant must be one of {_Q4_VARIANTS}, got {variant!r}")
    if variant == "exactly_n" and n_links not in (1, 2, 3):
        raise ValueError(f"n_links must be 1, 2 or 3, got {n_links}")
    if variant == "alpha" and alpha < 0:
        raise ValueError(f"alpha must be >= 0, got {alpha}")

    panel = get_panel(g)
    treat_idx: list[tuple[int, int, list[float]]] = []
    control_idx: list[tuple[int, int, list[float]]] = []
    skipped = {"unclassifiable_targets": 0, "undefined_covariates": 0}

    for u in sorted(eligible_users(g)):
        i = panel.index[u]
        link_weeks = np.unique(panel.out_edge_weeks[i])
        for w in link_weeks.tolist():
            if panel.prior_active[i, panel.cut(w)] < MIN_ACTIVE_WEEKS:
                continue
            if not panel.active_in(i, w):
                continue
            own = panel.beauty_through(i, w)
            if own is None:
                continue
            lo = np.searchsorted(panel.out_edge_weeks[i], w)
            hi = np.searchsorted(panel.out_edge_weeks[i], w, side="right")
            targets = panel.out_edge_dst[i][lo:hi]
            cnt_cut = panel.cut(w + 1)
            t_counts = panel.photos_cnt[targets, cnt_cut]
            valid = t_counts > 0
            if not valid.any():
                skipped["unclassifiable_targets"] += 1
                continue
            t_beauty = panel.beauty_sum[targets, cnt_cut][valid] / t_counts[valid]
            n_higher = int((t_beauty > own).sum())
            if variant == "any":
                in_treatment = n_higher >= 1
            elif variant == "exactly_n":
                in_treatment = n_higher == n_links
            else:
                in_treatment = float(t_beauty.mean()) >= (1.0 + alpha) * own
            in_control = n_higher == 0
            if variant != "any" and in_treatment and in_control:
                # alpha == 0 with all-equal beauties: treat as treatment
                in_control = False
            if not in_treatment and not in_control:
                continue
            row = _covariate_row(g, panel, i, w)
            if row is None:
                skipped["undefined_covariates"] += 1
                continue
            (treat_idx if in_treatment else control_idx).append((u, w, row))

    return GroupBuildResult(
        treatment=_pack(treat_idx, COVARIATE_NAMES),
        control=_pack(control_idx, COVARIATE_NAMES),
        skipped=skipped,
    )


def build_groups_q5(
    g: TemporalGraph,
    *,
    control_band: float = 0.1,
    treatment_min_delta: float = 0.3,
    max_week: int | None = None,
) -> GroupBuildResult:
    """Split weekly instances by beauty imbalance with the standing neighborhood.

    delta is the relative deviation of the followees' mean cumulative beauty
    from the user's own: instances with |delta| <= control_band form the
    control group, those with delta >= treatment_min_delta the treatment
    group; the gap zone in between is excluded. ``max_week`` caps instance
    weeks so post-week outcome horizons stay inside the data range.
    """
    if control_band < 0 or treatment_min_delta <= control_band:
        raise ValueError("need 0 <= control_band < treatment_min_delta")
    panel = get_panel(g)
    treat_idx: list[tuple[int, int, list[float]]] = []
    control_idx: list[tuple[int, int, list[float]]] = []
    skipped = {"undefined_beauty": 0, "undefined_covariates": 0, "gap_zone": 0}
    last = panel.last_week if max_week is None else min(max_week, panel.last_week)

    for u in sorted(eligible_users(g)):
        i = panel.index[u]
        edge_weeks = panel.out_edge_weeks[i]
        edge_dst = panel.out_edge_dst[i]
        if edge_weeks.size == 0:
            continue
        for w in range(int(edge_weeks[0]) + 1, last + 1):
            if panel.prior_active[i, panel.cut(w)] < MIN_ACTIVE_WEEKS:
                continue
            if not panel.active_in(i, w):
                continue
            own = panel.beauty_through(i, w)
            if own is None or own == 0.0:
                skipped["undefined_beauty"] += 1
                continue
            nbrs = edge_dst[: np.searchsorted(edge_weeks, w)]
            cnt_cut = panel.cut(w + 1)
            n_counts = panel.photos_cnt[nbrs, cnt_cut]
            with_photos = n_counts > 0
            if not with_photos.any():
                skipped["undefined_beauty"] += 1
                continue
            nbr_mean = float((panel.beauty_sum[nbrs, cnt_cut][with_photos] / n_counts[with_photos]).mean())
            delta = nbr_mean / own - 1.0
            if abs(delta) <= control_band:
                bucket = control_idx
            elif delta >= treatment_min_delta:
                bucket = treat_idx
            else:
                skipped["gap_zone"] += 1
                continue
            row = _covariate_row(g, panel, i, w)
            if row is None:
                skipped["undefined_covariates"] += 1
                continue
            bucket.append((u, w, row[:9]))

    return GroupBuildResult(
        treatment=_pack(treat_idx, IMBALANCE_COVARIATE_NAMES),
        control=_pack(control_idx, IMBALANCE_COVARIATE_NAMES),
        skipped=skipped,
    )


def _pack(rows, names) -> InstanceGroup:
    if not rows:
        return InstanceGroup.empty(names)
    users = np.array([r[0] for r in rows], dtype=np.int64)
    weeks = np.array([r[1] for r in rows], dtype=np.int64)
    X = np.array([r[2] for r in rows], dtype=float)
    return InstanceGroup(users, weeks, X, tuple(names))


def imbalance_delta(own_beauty: float, neighbor_beauty: float) -> float:
    """Relative deviation of neighbor beauty from own beauty."""
    if own_beauty <= 0:
        raise UndefinedStatisticError("own beauty must be positive to define the imbalance")
    return neighbor_beauty / own_beauty - 1.0


def _sb_value(xt: np.ndarray, xc: np.ndarray, name: str = "") -> float:
    if len(xt) < 2:
        raise ValueError("treatment group needs at least 2 instances")
    sd = float(xt.std(ddof=1))
    diff = float(xt.mean() - xc.mean())
    if sd == 0.0:
        if diff == 0.0:
            return 0.0
        raise UnbalanceableCovariateError(
            f"covariate {name or '?'} has zero treatment variance but group means differ by {diff}"
        )
    return diff / sd


def standardized_bias(treatment: InstanceGroup, control: InstanceGroup, covariate) -> float:
    """Mean difference between groups scaled by the treatment-group standard
    deviation (sample convention)."""
    j = treatment.covariate_names.index(covariate) if isinstance(covariate, str) else int(covariate)
    return _sb_value(treatment.X[:, j], control.X[:, j], treatment.covariate_names[j])


@dataclass(frozen=True)
class MatchedGroups:
    treatment: InstanceGroup
    control: InstanceGroup
    sb_before: np.ndarray
    sb_after: np.ndarray
    iterations: int

    @property
    def covariate_names(self) -> tuple[str, ...]:
        return self.treatment.covariate_names


def balance(
    treatment: InstanceGroup,
    control_seed: InstanceGroup,
    *,
    threshold: float = BALANCE_THRESHOLD,
    prune_fraction: float = 0.01,
) -> MatchedGroups:
    """Greedy standardized-bias balancing of the control group.

    Each iteration recomputes every covariate's standardized bias; for every
    covariate over threshold (in absolute value), the most extreme
    ``prune_fraction`` of remaining control instances on that covariate is
    removed (highest values when the bias is negative, lowest when positive).
    Stops when all biases are within threshold; raises BalanceRestartError if
    the control group would shrink below the treatment group first. The
    treatment group is never modified.
    """
    if len(control_seed) < 2 * len(treatment):
        raise ValueError(
            f"control seed must be at least twice the treatment size "
            f"({len(control_seed)} < 2 x {len(treatment)})"
        )
    names = treatment.covariate_names
    Xt = treatment.X
    sb_before = np.array([_sb_value(Xt[:, j], control_seed.X[:, j], names[j]) for j in range(len(names))])

    keep = np.arange(len(control_seed))
    iterations = 0
    while True:
        Xc = control_seed.X[keep]
        sbs = np.array([_sb_value(Xt[:, j], Xc[:, j], names[j]) for j in range(len(names))])
        violating = np.flatnonzero(np.abs(sbs) > threshold)
        if violating.size == 0:
            break
        iterations += 1
        quantum = max(1, math.ceil(prune_fraction * len(keep)))
        alive = np.ones(len(keep), dtype=bool)
        for j in violating:
            vals = Xc[:, j].copy()
            # already-pruned rows must never be selected again this round
            vals[~alive] = -np.inf if sbs[j] < 0 else np.inf
            order = np.argsort(vals, kind="stable")
            chosen = order[-quantum:] if sbs[j] < 0 else order[:quantum]
            alive[chosen] = False
        keep = keep[alive]
        if len(keep) < len(treatment):
            raise BalanceRestartError(
                f"control group exhausted after {iterations} iterations; "
                "restart with a different seed control group",
                iterations=iterations,
            )

    control = control_seed if iterations == 0 else control_seed.subset(keep)
    sb_after = np.array([_sb_value(Xt[:, j], control.X[:, j], names[j]) for j in range(len(names))])
    return MatchedGroups(treatment, control, sb_before, sb_after, iterations)


@dataclass(frozen=True)
class DeltaBOutcome:
    """Mean next-week-over-prior beauty ratio across a group's instances."""

    mean: float
    ratios: np.ndarray
    n_used: int
    n_no_followup: int
    n_zero_prior: int


def delta_b_ratios(g: TemporalGraph, group: InstanceGroup) -> DeltaBOutcome:
    panel = get_panel(g)
    rows = np.array([panel.index[int(u)] for u in group.users], dtype=np.int64)
    weeks = group.weeks
    c_prior = np.clip(weeks + 1 - panel.week_offset, 0, panel.n_cols - 1)
    c_next = np.clip(weeks + 2 - panel.week_offset, 0, panel.n_cols - 1)
    prior_cnt = panel.photos_cnt[rows, c_prior]
    prior_sum = panel.beauty_sum[rows, c_prior]
    next_cnt = panel.photos_cnt[rows, c_next] - prior_cnt
    next_sum = panel.beauty_sum[rows, c_next] - prior_sum
    zero_prior = (prior_cnt == 0) | (prior_sum == 0)
    no_followup = (next_cnt == 0) & ~zero_prior
    used = ~zero_prior & ~no_followup
    ratios = (next_sum[used] / next_cnt[used]) / (prior_sum[used] / prior_cnt[used])
    if ratios.size == 0:
        raise UndefinedStatisticError("no instance has both a prior beauty and follow-up photos")
    return DeltaBOutcome(
        mean=float(ratios.mean()),
        ratios=ratios,
        n_used=int(used.sum()),
        n_no_followup=int(no_followup.sum()),
        n_zero_prior=int(zero_prior.sum()),
    )


def outcome_delta_b(g: TemporalGraph, group: InstanceGroup) -> float:
    """Group mean of (next-week beauty) / (cumulative beauty through the
    instance week); instances without follow-up photos are excluded."""
    return delta_b_ratios(g, group).mean


@dataclass(frozen=True)
class InactivityOutcome:
    horizon: int
    p_treatment: float
    p_control: float
    ratio: float


def inactivity_flags(g: TemporalGraph, group: InstanceGroup, n: int) -> np.ndarray:
    """Boolean per instance: no photo uploads in the n weeks after the
    instance week."""
    if n < 1:
        raise ValueError("horizon must be >= 1")
    panel = get_panel(g)
    rows = np.array([panel.index[int(u)] for u in group.users], dtype=np.int64)
    weeks = group.weeks
    c_start = np.clip(weeks + 1 - panel.week_offset, 0, panel.n_cols - 1)
    c_end = np.clip(weeks + 1 + n - panel.week_offset, 0, panel.n_cols - 1)
    return panel.photos_cnt[rows, c_end] - panel.photos_cnt[rows, c_start] == 0


def outcome_inactivity(
    g: TemporalGraph, treatment: InstanceGroup, control: InstanceGroup, n: int
) -> InactivityOutcome:
    """Ratio of inactive-instance fractions, treatment over control."""
    if len(treatment) == 0 or len(control) == 0:
        raise ValueError("both groups must be non-empty")
    p_t = float(inactivity_flags(g, treatment, n).mean())
    p_c = float(inactivity_flags(g, control, n).mean())
    if p_c == 0.0:
        raise UndefinedStatisticError("control inactivity fraction is zero; ratio undefined")
    return InactivityOutcome(horizon=n, p_treatment=p_t, p_control=p_c, ratio=p_t / p_c)


def _bootstrap_means(values: np.ndarray, n_boot: int, rng, chunk: int = 200) -> np.ndarray:
    n = len(values)
    means = np.empty(n_boot)
    done = 0
    while done < n_boot:
        m = min(chunk, n_boot - done)
        idx = rng.integers(0, n, size=(m, n))
        means[done : done + m] = values[idx].mean(axis=1)
        done += m
    return means


def bootstrap_mean_ci(values, n_boot: int = 1000, seed: int = 0, level: float = 0.95):
    """Percentile bootstrap interval for the mean."""
    values = np.asarray(values, dtype=float)
    rng = np.random.default_rng(seed)
    means = _bootstrap_means(values, n_boot, rng)
    lo, hi = np.quantile(means, [(1 - level) / 2, (1 + level) / 2])
    return float(lo), float(hi)


def bootstrap_diff_ci(a, b, n_boot: int = 1000, seed: int = 0, level: float = 0.95):
    """Percentile bootstrap interval for mean(a) - mean(b), resampling each
    group independently."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    rng = np.random.default_rng(seed)
    diffs = _bootstrap_means(a, n_boot, rng) - _bootstrap_means(b, n_boot, rng)
    lo, hi = np.quantile(diffs, [(1 - level) / 2, (1 + level) / 2])
    return float(lo), float(hi)


def bootstrap_ratio_ci(flags_t, flags_c, n_boot: int = 1000, seed: int = 0, level: float = 0.95):
    """Percentile bootstrap interval for the ratio of two group fractions.

    Resamples with zero control fractions are dropped (and would indicate an
    underpowered control group).
    """
    flags_t = np.asarray(flags_t, dtype=float)
    flags_c = np.asarray(flags_c, dtype=float)
    rng = np.random.default_rng(seed)
    p_t = _bootstrap_means(flags_t, n_boot, rng)
    p_c = _bootstrap_means(flags_c, n_boot, rng)
    finite = p_c > 0
    if not finite.any():
        raise UndefinedStatisticError("all bootstrap control fractions are zero")
    ratios = p_t[finite] / p_c[finite]
    lo, hi = np.quantile(ratios, [(1 - level) / 2, (1 + level) / 2])
    return float(lo), float(hi)


_EXPERIMENT_KINDS = ("q4_any", "q4_exactly_n", "q4_alpha", "q5")


@dataclass(frozen=True)
class ExperimentConfig:
    """Declarative description of one matching experiment run."""

    kind: str
    n_links: int = 1
    alpha: float = 0.0
    control_band: float = 0.1
    treatment_min_delta: float = 0.3
    horizons: tuple[int, ...] = tuple(range(1, 13))
    seed: int = 0
    bootstrap_samples: int = 1000
    balance_threshold: float = BALANCE_THRESHOLD

    def validate(self) -> None:
        problems = []
        if self.kind not in _EXPERIMENT_KINDS:
            problems.append(f"kind: {self.kind!r} not in {_EXPERIMENT_KINDS}")
        if self.kind == "q4_exactly_n" and self.n_links not in (1, 2, 3):
            problems.append(f"n_links: {self.n_links} not in (1, 2, 3)")
        if self.alpha < 0:
            problems.append(f"alpha: {self.alpha} < 0")
        if not (0 <= self.control_band < self.treatment_min_delta):
            problems.append("control_band/treatment_min_delta: need 0 <= band < min_delta")
        if any(h < 1 for h in self.horizons):
            problems.append("horizons: all must be >= 1")
        if self.bootstrap_samples < 10:
            problems.append(f"bootstrap_samples: {self.bootstrap_samples} < 10")
        if not (0 < self.balance_threshold):
            problems.append("balance_threshold: must be positive")
        if problems:
            raise ConfigError(problems)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError([f"unknown field(s): {', '.join(sorted(unknown))}"])
        if "horizons" in raw:
            raw["horizons"] = tuple(raw["horizons"])
        cfg = cls(**raw)
        cfg.validate()
        return cfg


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    status: str  # "ok" or "restart_required"
    n_treatment_built: int
    n_control_built: int
    n_treatment_used: int
    n_control_balanced: int
    iterations: int
    covariate_names: tuple[str, ...]
    sb_before: list[float]
    sb_after: list[float]
    skipped: dict[str, int]
    outcomes: dict

    def to_dict(self) -> dict:
        d = {
            "kind": self.config.kind,
            "seed": self.config.seed,
            "status": self.status,
            "groups": {
                "treatment_built": self.n_treatment_built,
                "control_built": self.n_control_built,
                "treatment_used": self.n_treatment_used,
                "control_balanced": self.n_control_balanced,
            },
            "balance": {
                "iterations": self.iterations,
                "covariates": [
                    {"name": n, "sb_before": b, "sb_after": a}
                    for n, b, a in zip(self.covariate_names, self.sb_before, self.sb_after)
                ],
            },
            "skipped": self.skipped,
            "outcomes": self.outcomes,
        }
        return d


def run_experiment(g: TemporalGraph, cfg: ExperimentConfig) -> ExperimentResult:
    """Build, balance and evaluate one matching experiment.

    When the raw control pool is smaller than twice the treatment group, the
    treatment group is subsampled (seeded) to restore the balance margin.
    Returns a restart-required result instead of raising when pruning
    exhausts the control group.
    """
    cfg.validate()
    if cfg.kind == "q5":
        max_week = get_panel(g).last_week - (max(cfg.horizons) if cfg.horizons else 0)
        built = build_groups_q5(
            g,
            control_band=cfg.control_band,
            treatment_min_delta=cfg.treatment_min_delta,
            max_week=max_week,
        )
    elif cfg.kind == "q4_any":
        built = build_groups_q4(g, "any")
    elif cfg.kind == "q4_exactly_n":
        built = build_groups_q4(g, "exactly_n", n_links=cfg.n_links)
    else:
        built = build_groups_q4(g, "alpha", alpha=cfg.alpha)

    treatment, control = built.treatment, built.control
    n_t_built, n_c_built = len(treatment), len(control)
    if n_t_built < 2 or n_c_built < 4:
        raise UndefinedStatisticError(
            f"too few instances to balance (treatment={n_t_built}, control={n_c_built})"
        )
    if len(control) < 2 * len(treatment):
        rng = np.random.default_rng(cfg.seed)
        target = len(control) // 2
        pick = np.sort(rng.choice(len(treatment), size=target, replace=False))
        treatment = treatment.subset(pick)

    try:
        matched = balance(treatment, control, threshold=cfg.balance_threshold)
    except BalanceRestartError as exc:
        return ExperimentResult(
            config=cfg,
            status="restart_required",
            n_treatment_built=n_t_built,
            n_control_built=n_c_built,
            n_treatment_used=len(treatment),
            n_control_balanced=0,
            iterations=exc.iterations,
            covariate_names=treatment.covariate_names,
            sb_before=[standardized_bias(treatment, control, j) for j in range(treatment.X.shape[1])],
            sb_after=[],
            skipped=built.skipped,
            outcomes={},
        )

    outcomes: dict = {}
    if cfg.kind == "q5":
        inact = []
        for h_i, n in enumerate(cfg.horizons):
            out = outcome_inactivity(g, matched.treatment, matched.control, n)
            ci = bootstrap_ratio_ci(
                inactivity_flags(g, matched.treatment, n),
                inactivity_flags(g, matched.control, n),
                n_boot=cfg.bootstrap_samples,
                seed=cfg.seed + 1000 + h_i,
            )
            inact.append(
                {
                    "horizon": n,
                    "p_treatment": out.p_treatment,
                    "p_control": out.p_control,
                    "ratio": out.ratio,
                    "ratio_ci": list(ci),
                }
            )
        outcomes["inactivity"] = inact
    else:
        d_t = delta_b_ratios(g, matched.treatment)
        d_c = delta_b_ratios(g, matched.control)
        ci_t = bootstrap_mean_ci(d_t.ratios, n_boot=cfg.bootstrap_samples, seed=cfg.seed + 1)
        ci_c = bootstrap_mean_ci(d_c.ratios, n_boot=cfg.bootstrap_samples, seed=cfg.seed + 2)
        ci_diff = bootstrap_diff_ci(
            d_t.ratios, d_c.ratios, n_boot=cfg.bootstrap_samples, seed=cfg.seed + 3
        )
        outcomes["delta_b"] = {
            "treatment": {
                "mean": d_t.mean,
                "ci": list(ci_t),
                "n_used": d_t.n_used,
                "n_no_followup": d_t.n_no_followup,
                "n_zero_prior": d_t.n_zero_prior,
            },
            "control": {
                "mean": d_c.mean,
                "ci": list(ci_c),
                "n_used": d_c.n_used,
                "n_no_followup": d_c.n_no_followup,
                "n_zero_prior": d_c.n_zero_prior,
            },
            "difference": d_t.mean - d_c.mean,
            "difference_ci": list(ci_diff),
        }

    return ExperimentResult(
        config=cfg,
        status="ok",
        n_treatment_built=n_t_built,
        n_control_built=n_c_built,
        n_treatment_used=len(matched.treatment),
        n_control_balanced=len(matched.control),
        iterations=matched.iterations,
        covariate_names=matched.covariate_names,
        sb_before=[float(x) for x in matched.sb_before],
        sb_after=[float(x) for x in matched.sb_after],
        skipped=built.skipped,
        outcomes=outcomes,
    )
