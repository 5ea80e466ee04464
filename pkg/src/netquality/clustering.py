"""User behavior classes from K-means over (quality, popularity, connectivity),
with gap-statistic selection of the cluster count."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Mapping

import numpy as np

from .graphstore import TemporalGraph, final_snapshot

FEATURE_NAMES = ("beauty", "favs_per_photo", "followers")
CLASS_LABELS = ("low_quality", "forlorn_beauty", "regular", "superstar")


@dataclass(frozen=True)
class FeatureMatrix:
    users: np.ndarray
    X: np.ndarray  # (n, 3), log1p-transformed then min-max normalized
    degenerate_dims: tuple[int, ...]


def features(g: TemporalGraph, profiles: Mapping[int, float]) -> FeatureMatrix:
    """Per-user (beauty, favorites/photo, follower count) coordinates.

    Only users with at least one photo are included. Each raw value is
    log1p-transformed and min-max normalized over the included population; a
    dimension with no spread collapses to zero and is flagged.
    """
    snap = final_snapshot(g)
    users = sorted(u for u in profiles)
    raw = np.empty((len(users), 3))
    for row, u in enumerate(users):
        n_photos = len(g.photos_of(u))
        raw[row, 0] = profiles[u]
        raw[row, 1] = len(g.favorites_received(u)) / n_photos
        raw[row, 2] = snap.in_degree(u)
    X = np.log1p(raw)
    degenerate = []
    for j in range(3):
        lo, hi = X[:, j].min(), X[:, j].max()
        if hi == lo:
            X[:, j] = 0.0
            degenerate.append(j)
        else:
            X[:, j] = (X[:, j] - lo) / (hi - lo)
    return FeatureMatrix(np.array(users, dtype=np.int64), X, tuple(degenerate))


@dataclass(frozen=True)
class ClusterModel:
    k: int
    centroids: np.ndarray
    assignments: np.ndarray
    inertia: float
    labels: dict[int, str] | None = None


def _plus_plus_init(points: np.ndarray, k: int, rng) -> np.ndarray:
    n = len(points)
    centers = np.empty((k, points.shape[1]))
    centers[0] = points[rng.integers(n)]
    d2 = ((points - centers[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total == 0.0:
            centers[j] = points[rng.integers(n)]
            continue
        probs = d2 / total
        centers[j] = points[rng.choice(n, p=probs)]
        d2 = np.minimum(d2, ((points - centers[j]) ** 2).sum(axis=1))
    return centers


def kmeans(points, k: int, seed: int = 0, max_iter: int = 300) -> ClusterModel:
    """Lloyd iteration from a seeded ++-style initialization.

    Stops when assignments are stable or after ``max_iter`` rounds. A cluster
    left empty is re-seeded to the point currently farthest from its
    assigned centroid.
    """
    points = np.asarray(points, dtype=float)
    n = len(points)
    if not (1 <= k <= n):
        raise ValueError(f"need 1 <= k <= n_points, got k={k}, n={n}")
    rng = np.random.default_rng(seed)
    centers = _plus_plus_init(points, k, rng)
    assign = np.full(n, -1, dtype=np.int64)
    for _ in range(max_iter):
        d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_assign = d2.argmin(axis=1)
        for j in range(k):
            members = new_assign == j
            if members.any():
                centers[j] = points[members].mean(axis=0)
            else:
                worst = d2[np.arange(n), new_assign].argmax()
                centers[j] = points[worst]
                new_assign[worst] = j
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
    d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    assign = d2.argmin(axis=1)
    inertia = float(d2[np.arange(n), assign].sum())
    return ClusterModel(k=k, centroids=centers, assignments=assign, inertia=inertia)


@dataclass(frozen=True)
class GapResult:
    selected_k: int
    ks: tuple[int, ...]
    gaps: np.ndarray
    s_k: np.ndarray
    log_w: np.ndarray


def gap_statistic(points, k_range=range(2, 11), n_refs: int = 10, seed: int = 0) -> GapResult:
    """Pick a cluster count by comparing dispersion against uniform references.

    For each k, the gap is the mean log within-cluster dispersion of
    ``n_refs`` uniform samples from the data's bounding box minus the data's
    own log dispersion. The selected k is the smallest one whose gap is
    within one reference standard error of the next gap; if none qualifies,
    the largest k in range is returned.
    """
    points = np.asarray(points, dtype=float)
    ks = tuple(k_range)
    if not ks:
        raise ValueError("empty k range")
    lo = points.min(axis=0)
    hi = points.max(axis=0)
    seeds = np.random.SeedSequence(seed).spawn(len(ks))
    gaps = np.empty(len(ks))
    s_k = np.empty(len(ks))
    log_w = np.empty(len(ks))
    tiny = np.finfo(float).tiny
    for idx, k in enumerate(ks):
        child = seeds[idx].spawn(n_refs + 2)
        model = kmeans(points, k, seed=child[0])
        log_w[idx] = np.log(max(model.inertia, tiny))
        ref_rng = np.random.default_rng(child[1])
        ref_logs = np.empty(n_refs)
        for b in range(n_refs):
            ref = ref_rng.uniform(lo, hi, size=points.shape)
            ref_logs[b] = np.log(max(kmeans(ref, k, seed=child[2 + b]).inertia, tiny))
        gaps[idx] = ref_logs.mean() - log_w[idx]
        s_k[idx] = ref_logs.std(ddof=1) * np.sqrt(1.0 + 1.0 / n_refs)
    selected = ks[-1]
    for idx in range(len(ks) - 1):
        if gaps[idx] >= gaps[idx + 1] - s_k[idx + 1]:
            selected = ks[idx]
            break
    return GapResult(selected_k=selected, ks=ks, gaps=gaps, s_k=s_k, log_w=log_w)


def label_clusters(model: ClusterModel) -> ClusterModel:
    """Name the four behavior classes from the centroid pattern.

    The highest-connectivity centroid is the superstar class; among the rest
    the highest beauty is forlorn, the lowest beauty is low-quality and the
    remainder is regular. Ties fall back to higher favorites-per-photo, then
    to centroid index. Models with k != 4 are returned unchanged (numbered
    clusters).
    """
    if model.k != 4:
        return model
    c = model.centroids
    remaining = list(range(4))

    def take(key_dim: int, largest: bool) -> int:
        sign = -1.0 if largest else 1.0
        chosen = min(remaining, key=lambda j: (sign * c[j, key_dim], -c[j, 1], j))
        remaining.remove(chosen)
        return chosen

    labels: dict[int, str] = {}
    labels[take(2, largest=True)] = "superstar"
    labels[take(0, largest=True)] = "forlorn_beauty"
    labels[take(0, largest=False)] = "low_quality"
    labels[remaining.pop()] = "regular"
    return replace(model, labels=labels)


def cluster_summary(g: TemporalGraph, fm: FeatureMatrix, model: ClusterModel) -> dict:
    """Per-cluster population shares and descriptive means (photo count and
    weeks with at least one upload)."""
    from .graphstore import activity_weeks

    n = len(fm.users)
    clusters = []
    for j in range(model.k):
        members = fm.users[model.assignments == j]
        photo_counts = [len(g.photos_of(int(u))) for u in members]
        weeks_active = [len(activity_weeks(g, int(u))) for u in members]
        clusters.append(
            {
                "cluster": j,
                "label": model.labels.get(j) if model.labels else None,
                "share": len(members) / n if n else 0.0,
                "centroid": [float(x) for x in model.centroids[j]],
                "mean_photo_count": float(np.mean(photo_counts)) if photo_counts else 0.0,
                "mean_weeks_active": float(np.mean(weeks_active)) if weeks_active else 0.0,
            }
        )
    return {
        "k": model.k,
        "feature_names": list(FEATURE_NAMES),
        "degenerate_dims": list(fm.degenerate_dims),
        "clusters": clusters,
    }
