"""Scalar beauty scores from quality-classifier outputs, plus the validation
statistics used to compare a scorer against human labels."""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import UndefinedStatisticError

_TRIPLE_TOL = 1e-6


@dataclass(frozen=True, slots=True)
class QualityTriple:
    """Class probabilities (low, medium, high); must sum to 1."""

    p_lq: float
    p_mq: float
    p_hq: float

    def __post_init__(self):
        for name, p in (("p_lq", self.p_lq), ("p_mq", self.p_mq), ("p_hq", self.p_hq)):
            if not (0.0 <= p <= 1.0):
                raise ValueError(f"{name}={p} outside [0, 1]")
        total = self.p_lq + self.p_mq + self.p_hq
        if abs(total - 1.0) > _TRIPLE_TOL:
            raise ValueError(f"probabilities sum to {total}, expected 1 within {_TRIPLE_TOL}")


def beauty_score(q: QualityTriple) -> float:
    """Collapse a quality triple to a scalar in [0, 1].

    The medium-class probability is ignored; the score is the high/low
    difference shifted and scaled into the unit interval.
    """
    return (q.p_hq - q.p_lq + 1.0) / 2.0


def rescale_to_5pt(s: float) -> int:
    """Map a score in [0, 1] onto the 1..5 grade scale (equal-width bins,
    top bin closed)."""
    if not (0.0 <= s <= 1.0):
        raise ValueError(f"score {s} outside [0, 1]")
    return min(5, int(s * 5.0) + 1)


def spearman_rho(xs, ys) -> float:
    """Rank correlation with average ranks for ties."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise ValueError("inputs must be 1-D and of equal length")
    if xs.size < 2:
        raise ValueError("need at least 2 observations")
    if np.ptp(xs) == 0.0 or np.ptp(ys) == 0.0:
        raise UndefinedStatisticError("rank variance is zero; correlation undefined")
    rho = stats.spearmanr(xs, ys).statistic
    return float(rho)


def cronbach_alpha(ratings) -> float:
    """Internal-consistency coefficient for an item x rater grade matrix.

    Rater variances and the variance of the per-item total score are taken
    over items with the sample (n-1) convention. A constant total score has
    no defined consistency and is signaled instead of returned.
    """
    m = np.asarray(ratings, dtype=float)
    if m.ndim != 2:
        raise ValueError("ratings must be a 2-D item x rater matrix")
    n_items, n_raters = m.shape
    if n_items < 2 or n_raters < 2:
        raise ValueError("need at least 2 items and 2 raters")
    if np.isnan(m).any():
        raise ValueError("ratings matrix must be complete")
    rater_var = m.var(axis=0, ddof=1)
    total_var = m.sum(axis=1).var(ddof=1)
    if total_var == 0.0:
        raise UndefinedStatisticError("total-score variance is zero; alpha undefined")
    k = n_raters
    return float(k / (k - 1) * (1.0 - rater_var.sum() / total_var))


def decile_curve(predicted, human) -> list[float | None]:
    """Mean human score per predicted-score decile.

    Buckets partition [0, 1] into ten equal intervals, the last one closed.
    Empty buckets are reported as None rather than zero.
    """
    predicted = np.asarray(predicted, dtype=float)
    human = np.asarray(human, dtype=float)
    if predicted.shape != human.shape or predicted.ndim != 1:
        raise ValueError("inputs must be 1-D and of equal length")
    if predicted.size and (predicted.min() < 0.0 or predicted.max() > 1.0):
        raise ValueError("predicted scores must lie in [0, 1]")
    buckets = np.minimum((predicted * 10).astype(int), 9)
    means: list[float | None] = []
    for b in range(10):
        sel = human[buckets == b]
        means.append(float(sel.mean()) if sel.size else None)
    return means


class SyntheticScorer:
    """Deterministic stand-in for a learned quality classifier.

    Produces a reproducible quality triple per photo id by hashing
    (seed, photo id) and normalizing three exponential deviates, so the same
    photo always receives the same triple regardless of call order.
    """

    def __init__(self, seed: int = 0):
        self.seed = int(seed)

    def triple(self, photo_id: int) -> QualityTriple:
        digest = hashlib.blake2b(
            struct.pack("<qq", self.seed, int(photo_id) & (2**63 - 1)), digest_size=24
        ).digest()
        words = struct.unpack("<QQQ", digest)
        # map 64-bit words to (0, 1], then to Exp(1); normalizing yields a
        # uniform draw on the probability simplex
        us = [(w + 1) / 2.0**64 for w in words]
        es = [-np.log(u) for u in us]
        total = sum(es)
        p_lq, p_mq, p_hq = (e / total for e in es)
        return QualityTriple(p_lq, p_mq, p_hq)

    def score(self, photo_id: int) -> float:
        return beauty_score(self.triple(photo_id))
