"""Seeded synthetic event-stream generator with plantable effects, plus the
brute-force reference implementations used to cross-check the fast paths.

Generative rules (all driven by one seeded RNG, so identical configs produce
byte-identical streams):

- Per-user quality means come from a clipped normal; an optional mixture
  component fattens the right tail.
- A Gaussian copula couples a latent sociality score (which sets both the
  out-degree quota and the in-stub count via a discrete power law) with the
  quality mean, planting a target rank correlation between degree and beauty.
- Edges pair out-stubs with shuffled in-stubs; a configurable fraction of
  stubs is redirected to beauty-rank neighbors instead, planting assortative
  mixing. Edge creation weeks are uniform over the timeline.
- Photos arrive per user-week as Poisson counts with per-photo noise around
  the user's current quality mean. When influence is enabled, a user who
  follows accounts whose current mean quality exceeds their own shifts their
  mean toward it by the configured fraction of the (positive) gap, starting
  the following week.
- When churn is enabled, users whose eventual followees' quality deviates
  upward from their own face a proportionally elevated weekly hazard of
  permanent inactivity.
- When a superstar fraction is set, the population is instead planted with
  four behavior classes (low / forlorn / regular / superstar) with
  class-specific quality, connectivity and favorites-per-photo levels.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields
from typing import Mapping

import numpy as np
from scipy.special import ndtr

from .errors import ConfigError, UndefinedStatisticError
from .graphstore import (
    SECONDS_PER_WEEK,
    FavoriteEvent,
    FollowEvent,
    GraphSnapshot,
    GroupEvent,
    PhotoEvent,
)
from .metrics import SpectrumBin, SpectrumCurve

CHURN_GAIN = 6.0
CHURN_START_WEEK = 16
ASSORT_WINDOW_FRACTION = 0.03
# hook for compensating rank-noise attenuation; measured negligible at the
# calibration scale (10k users), so no inflation is applied
RHO_INFLATION = 1.0

_CLASS_PROPS = {"forlorn": 0.25, "regular": 0.20}
_CLASS_PARAMS = {
    # (beauty multiplier, degree multiplier, favorites-per-photo multiplier)
    "low": (0.6, 0.6, 0.5),
    "forlorn": (1.5, 0.5, 0.2),
    "regular": (1.0, 1.5, 5.0),
    "superstar": (1.5, 5.0, 40.0),
}


@dataclass(frozen=True)
class SynthConfig:
    n_users: int
    n_weeks: int
    photos_per_user_week: float = 1.0
    beauty_mean: float = 0.45
    beauty_sd: float = 0.12
    heavy_tail: float = 0.0
    photo_sd: float = 0.10
    degree_exponent: float = 2.5
    min_degree: int = 4
    degree_beauty_rho: float = 0.0
    assortativity: float = 0.0
    influence_strength: float = 0.0
    churn_imbalance_strength: float = 0.0
    base_churn: float = 0.0
    superstar_fraction: float = 0.0
    favorites_per_photo: float = 0.1
    groups_per_user: float = 2.0
    seed: int = 0

    def validate(self) -> None:
        problems = []
        if self.n_users < 2:
            problems.append(f"n_users: {self.n_users} < 2")
        if self.n_weeks < 1:
            problems.append(f"n_weeks: {self.n_weeks} < 1")
        if self.photos_per_user_week <= 0:
            problems.append("photos_per_user_week: must be positive")
        if not (0.0 <= self.beauty_mean <= 1.0):
            problems.append(f"beauty_mean: {self.beauty_mean} outside [0, 1]")
        if self.beauty_sd <= 0:
            problems.append("beauty_sd: must be positive")
        if self.photo_sd <= 0:
            problems.append("photo_sd: must be positive")
        if self.degree_exponent <= 1.0:
            problems.append(f"degree_exponent: {self.degree_exponent} <= 1")
        if self.min_degree < 1:
            problems.append(f"min_degree: {self.min_degree} < 1")
        if not (-0.9 <= self.degree_beauty_rho <= 0.9):
            problems.append(f"degree_beauty_rho: {self.degree_beauty_rho} outside [-0.9, 0.9]")
        for name in (
            "heavy_tail",
            "assortativity",
            "influence_strength",
            "churn_imbalance_strength",
            "base_churn",
            "superstar_fraction",
        ):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                problems.append(f"{name}: {v} outside [0, 1]")
        if self.favorites_per_photo < 0:
            problems.append("favorites_per_photo: must be >= 0")
        if self.groups_per_user < 0:
            problems.append("groups_per_user: must be >= 0")
        if problems:
            raise ConfigError(problems)

    @classmethod
    def from_json(cls, path) -> "SynthConfig":
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError([f"unknown field(s): {', '.join(sorted(unknown))}"])
        cfg = cls(**raw)
        cfg.validate()
        return cfg


@dataclass(frozen=True)
class SynthStreams:
    follows: list[FollowEvent]
    photos: list[PhotoEvent]
    favorites: list[FavoriteEvent]
    groups: list[GroupEvent]
    meta: dict = field(default_factory=dict, compare=False)


def _power_law_degrees(u: np.ndarray, min_degree: int, exponent: float, cap: int) -> np.ndarray:
    u = np.clip(u, 0.0, 1.0 - 1e-12)
    d = np.floor(min_degree * (1.0 - u) ** (-1.0 / (exponent - 1.0)))
    return np.minimum(d, cap).astype(np.int64)


def generate(cfg: SynthConfig) -> SynthStreams:
    """Produce the four event streams for a planted-effect population."""
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    n, n_weeks = cfg.n_users, cfg.n_weeks
    horizon_t = n_weeks * SECONDS_PER_WEEK

    z_social = rng.standard_normal(n)
    noise = rng.standard_normal(n)
    classes = np.full(n, "", dtype=object)

    if cfg.superstar_fraction > 0:
        # planted behavior classes override the copula knobs
        share_low = 1.0 - cfg.superstar_fraction - sum(_CLASS_PROPS.values())
        if share_low <= 0:
            raise ConfigError(["superstar_fraction: leaves no room for the low class"])
        labels = (
            ["superstar"] * round(cfg.superstar_fraction * n)
            + ["forlorn"] * round(_CLASS_PROPS["forlorn"] * n)
            + ["regular"] * round(_CLASS_PROPS["regular"] * n)
        )
        labels += ["low"] * (n - len(labels))
        classes = np.array(labels, dtype=object)
        rng.shuffle(classes)
        b_mult = np.array([_CLASS_PARAMS[c][0] for c in classes])
        d_mult = np.array([_CLASS_PARAMS[c][1] for c in classes])
        f_mult = np.array([_CLASS_PARAMS[c][2] for c in classes])
        beauty_mu = np.clip(cfg.beauty_mean * b_mult + 0.5 * cfg.beauty_sd * noise, 0.0, 1.0)
        base_deg = _power_law_degrees(ndtr(z_social), cfg.min_degree, cfg.degree_exponent, n - 1)
        degree = np.maximum((base_deg * d_mult).astype(np.int64), 1)
        fav_rate = cfg.favorites_per_photo * f_mult
    else:
        r = 2.0 * math.sin(math.pi * cfg.degree_beauty_rho / 6.0) * RHO_INFLATION
        r = float(np.clip(r, -0.999, 0.999))
        z_quality = r * z_social + math.sqrt(1.0 - r * r) * noise
        beauty_mu = cfg.beauty_mean + cfg.beauty_sd * z_quality
        if cfg.heavy_tail > 0:
            boosted = rng.random(n) < cfg.heavy_tail
            beauty_mu = beauty_mu + boosted * rng.exponential(cfg.beauty_sd, n)
        beauty_mu = np.clip(beauty_mu, 0.0, 1.0)
        degree = _power_law_degrees(ndtr(z_social), cfg.min_degree, cfg.degree_exponent, n - 1)
        mean_deg = max(float(degree.mean()), 1e-9)
        fav_rate = cfg.favorites_per_photo * degree / mean_deg

    # --- follow edges -------------------------------------------------
    src = np.repeat(np.arange(n, dtype=np.int64), degree)
    dst = rng.permutation(np.repeat(np.arange(n, dtype=np.int64), degree))
    if cfg.assortativity > 0:
        redirect = rng.random(len(src)) < cfg.assortativity
        order = np.argsort(beauty_mu, kind="stable")
        rank_of = np.empty(n, dtype=np.int64)
        rank_of[order] = np.arange(n)
        window = max(3.0, ASSORT_WINDOW_FRACTION * n)
        jitter = np.rint(rng.normal(0.0, window, size=int(redirect.sum()))).astype(np.int64)
        tgt_rank = np.clip(rank_of[src[redirect]] + jitter, 0, n - 1)
        dst = dst.copy()
        dst[redirect] = order[tgt_rank]
    keep = src != dst
    src, dst = src[keep], dst[keep]
    pair_key = src * np.int64(n) + dst
    _, first_idx = np.unique(pair_key, return_index=True)
    first_idx.sort()
    src, dst = src[first_idx], dst[first_idx]
    n_edges = len(src)
    if n_weeks > 1:
        edge_week = rng.integers(1, n_weeks, size=n_edges)
    else:
        edge_week = np.zeros(n_edges, dtype=np.int64)
    edge_t = edge_week * SECONDS_PER_WEEK + rng.integers(0, SECONDS_PER_WEEK, size=n_edges)

    # static imbalance of each user's eventual neighborhood, used by churn
    nbr_sum = np.zeros(n)
    np.add.at(nbr_sum, src, beauty_mu[dst])
    nbr_cnt = np.bincount(src, minlength=n)
    delta_static = np.zeros(n)
    has = (nbr_cnt > 0) & (beauty_mu > 0)
    delta_static[has] = nbr_sum[has] / nbr_cnt[has] / beauty_mu[has] - 1.0
    churn_prob = cfg.base_churn * (
        1.0 + cfg.churn_imbalance_strength * CHURN_GAIN * np.clip(delta_static, 0.0, 1.0)
    )

    edge_order = np.argsort(edge_week, kind="stable")
    e_week_sorted = edge_week[edge_order]
    e_src_sorted = src[edge_order]
    e_dst_sorted = dst[edge_order]
    week_starts = np.searchsorted(e_week_sorted, np.arange(n_weeks + 1))

    # --- weekly photo/favorite simulation ------------------------------
    m = beauty_mu.copy()
    alive = np.ones(n, dtype=bool)
    users_arange = np.arange(n, dtype=np.int64)
    photo_owner_parts: list[np.ndarray] = []
    photo_t_parts: list[np.ndarray] = []
    photo_beauty_parts: list[np.ndarray] = []
    fav_actor_parts: list[np.ndarray] = []
    fav_photo_parts: list[np.ndarray] = []
    fav_t_parts: list[np.ndarray] = []
    next_photo_id = 1

    for w in range(n_weeks):
        counts = rng.poisson(cfg.photos_per_user_week, n) * alive
        total = int(counts.sum())
        owners = np.repeat(users_arange, counts)
        beauties = np.clip(rng.normal(m[owners], cfg.photo_sd), 0.0, 1.0)
        ts = w * SECONDS_PER_WEEK + rng.integers(0, SECONDS_PER_WEEK, size=total)
        ids = next_photo_id + np.arange(total, dtype=np.int64)
        next_photo_id += total
        photo_owner_parts.append(owners)
        photo_t_parts.append(ts)
        photo_beauty_parts.append(beauties)

        fav_counts = rng.poisson(fav_rate[owners]) if total else np.empty(0, dtype=np.int64)
        n_favs = int(fav_counts.sum()) if total else 0
        if n_favs:
            f_photo = np.repeat(ids, fav_counts)
            f_t = np.minimum(
                np.repeat(ts, fav_counts) + rng.integers(0, 4 * SECONDS_PER_WEEK, size=n_favs),
                horizon_t - 1,
            )
            f_actor = rng.integers(0, n, size=n_favs)
            owner_rep = np.repeat(owners, fav_counts)
            clash = f_actor == owner_rep
            f_actor[clash] = (f_actor[clash] + 1) % n
            fav_actor_parts.append(f_actor)
            fav_photo_parts.append(f_photo)
            fav_t_parts.append(f_t)

        if cfg.influence_strength > 0:
            lo_e, hi_e = week_starts[w], week_starts[w + 1]
            if hi_e > lo_e:
                wk_src = e_src_sorted[lo_e:hi_e]
                wk_dst = e_dst_sorted[lo_e:hi_e]
                sums = np.zeros(n)
                np.add.at(sums, wk_src, m[wk_dst])
                cnts = np.bincount(wk_src, minlength=n)
                linked = cnts > 0
                gap = sums[linked] / cnts[linked] - m[linked]
                m[linked] += cfg.influence_strength * np.maximum(gap, 0.0)

        churn_draw = rng.random(n)
        if w >= CHURN_START_WEEK:
            alive &= churn_draw >= churn_prob

    photo_owner = np.concatenate(photo_owner_parts) if photo_owner_parts else np.empty(0, np.int64)
    photo_t = np.concatenate(photo_t_parts) if photo_t_parts else np.empty(0, np.int64)
    photo_beauty = np.concatenate(photo_beauty_parts) if photo_beauty_parts else np.empty(0)
    photo_ids = 1 + np.arange(len(photo_owner), dtype=np.int64)

    # --- group memberships ---------------------------------------------
    grp_counts = rng.poisson(cfg.groups_per_user, n)
    grp_member = np.repeat(users_arange, grp_counts)
    n_grp = len(grp_member)
    grp_pool = max(4, n // 10)
    grp_id = rng.integers(0, grp_pool, size=n_grp)
    grp_t = rng.integers(0, horizon_t, size=n_grp)
    grp_key = grp_member * np.int64(grp_pool) + grp_id
    _, grp_first = np.unique(grp_key, return_index=True)
    grp_first.sort()
    grp_member, grp_id, grp_t = grp_member[grp_first], grp_id[grp_first], grp_t[grp_first]

    # --- materialize canonical, time-sorted event lists ----------------
    e_idx = np.lexsort((dst, src, edge_t))
    follows = [
        FollowEvent(int(src[i]), int(dst[i]), int(edge_t[i])) for i in e_idx
    ]
    p_idx = np.lexsort((photo_ids, photo_owner, photo_t))
    photos = [
        PhotoEvent(int(photo_owner[i]), int(photo_ids[i]), int(photo_t[i]), float(photo_beauty[i]))
        for i in p_idx
    ]
    if fav_actor_parts:
        fav_actor = np.concatenate(fav_actor_parts)
        fav_photo = np.concatenate(fav_photo_parts)
        fav_t = np.concatenate(fav_t_parts)
        f_idx = np.lexsort((fav_photo, fav_actor, fav_t))
        favorites = [
            FavoriteEvent(int(fav_actor[i]), int(fav_photo[i]), int(fav_t[i])) for i in f_idx
        ]
    else:
        favorites = []
    g_idx = np.lexsort((grp_id, grp_member, grp_t))
    groups = [GroupEvent(int(grp_member[i]), int(grp_id[i]), int(grp_t[i])) for i in g_idx]

    meta = {
        "beauty_mu": beauty_mu,
        "degree": degree,
        "delta_static": delta_static,
        "classes": classes if cfg.superstar_fraction > 0 else None,
    }
    return SynthStreams(follows=follows, photos=photos, favorites=favorites, groups=groups, meta=meta)


# --- brute-force oracles ------------------------------------------------


def oracle_gini(values) -> float:
    """Pairwise mean-absolute-difference Gini, evaluated literally."""
    x = np.asarray(values, dtype=float)
    n = len(x)
    if n == 0:
        raise ValueError("need at least one value")
    if n > 10000:
        raise ValueError("oracle capped at 10000 values")
    if (x < 0).any():
        raise ValueError("values must be non-negative")
    mean = x.mean()
    if mean == 0.0:
        raise UndefinedStatisticError("all values are zero; Gini undefined")
    total = 0.0
    for start in range(0, n, 512):
        block = x[start : start + 512]
        total += float(np.abs(block[:, None] - x[None, :]).sum())
    return total / (2.0 * n * n * mean)


def oracle_candidates(snapshot: GraphSnapshot, u: int) -> dict[int, int]:
    """Distance-2 candidate counts via an exhaustive edge-pair scan."""
    edges = list(snapshot.edges())
    if len({a for e in edges for a in e} | {u}) > 200:
        raise ValueError("oracle capped at 200 nodes")
    followees = {d for s, d in edges if s == u}
    intermediaries: dict[int, set[int]] = {}
    for s1, v in edges:
        if s1 != u:
            continue
        for s2, c in edges:
            if s2 != v:
                continue
            if c == u or c in followees:
                continue
            intermediaries.setdefault(c, set()).add(v)
    return {c: len(vs) for c, vs in intermediaries.items()}


def oracle_spectrum(
    snapshot: GraphSnapshot, profiles: Mapping[int, float], bins: int = 100
) -> SpectrumCurve:
    """Direct nested-loop evaluation of the neighbor-beauty spectrum."""
    if len(snapshot.users) > 200:
        raise ValueError("oracle capped at 200 nodes")
    per_bin: dict[int, list[float]] = {}
    for u in sorted(profiles):
        own = profiles[u]
        nbr_vals = []
        for v in snapshot.out_neighbors(u):
            if v in profiles:
                nbr_vals.append(profiles[v])
        if not nbr_vals:
            continue
        nm = sum(nbr_vals) / len(nbr_vals)
        b = int(own * bins)
        if b >= bins:
            b = bins - 1
        per_bin.setdefault(b, []).append(nm)
    out = []
    for b in sorted(per_bin):
        vals = per_bin[b]
        mean = sum(vals) / len(vals)
        var = sum((v - mean) ** 2 for v in vals) / len(vals)
        out.append(SpectrumBin((b + 0.5) / bins, mean, len(vals), var))
    return SpectrumCurve(n_bins=bins, bins=tuple(out))
