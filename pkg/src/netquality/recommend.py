"""Single-shot link recommendation: two-path common-neighbor counting vs a
beauty-band rule, plus the evaluation metrics used to compare them."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

from .graphstore import GraphSnapshot, TemporalGraph


@dataclass(frozen=True, slots=True)
class Recommendation:
    recipient: int
    candidate: int
    rule: str
    score: float


def candidates(snapshot: GraphSnapshot, u: int) -> dict[int, int]:
    """Distance-2 candidates of u with their distinct-intermediary counts.

    A candidate c is reachable via a directed two-path u -> v -> c and is
    neither u itself nor an existing followee of u; its count is the number
    of distinct intermediaries v.
    """
    followees = set(snapshot.out_neighbors(u))
    counts: dict[int, int] = {}
    for v in followees:
        for c in snapshot.out_neighbors(v):
            if c == u or c in followees:
                continue
            counts[c] = counts.get(c, 0) + 1
    return counts


def recommend_cn(snapshot: GraphSnapshot, u: int) -> Recommendation | None:
    """Candidate with the most distinct intermediaries; smallest id on ties."""
    pool = candidates(snapshot, u)
    if not pool:
        return None
    best = min(pool, key=lambda c: (-pool[c], c))
    return Recommendation(recipient=u, candidate=best, rule="CN", score=float(pool[best]))


def recommend_bb(
    snapshot: GraphSnapshot, profiles: Mapping[int, float], u: int, band: float = 0.10
) -> Recommendation | None:
    """Highest-beauty candidate whose beauty lies within +-band of u's own.

    The band is multiplicative and inclusive; candidates without a beauty
    profile cannot be checked and are skipped. Returns None when no candidate
    qualifies; raises if the recipient has no profile.
    """
    own = profiles.get(u)
    if own is None:
        raise ValueError(f"recipient {u} has no beauty profile")
    lo, hi = (1.0 - band) * own, (1.0 + band) * own
    best = None
    best_key = None
    for c in candidates(snapshot, u):
        b = profiles.get(c)
        if b is None or not (lo <= b <= hi):
            continue
        key = (-b, c)
        if best_key is None or key < best_key:
            best, best_key = c, key
    if best is None:
        return None
    return Recommendation(recipient=u, candidate=best, rule="BB", score=float(profiles[best]))


@dataclass(frozen=True)
class RecEvaluation:
    b_recs: float
    b_ratio: float
    fav_recs: float
    p_forlorn: float
    n: int

    def to_dict(self) -> dict:
        return {
            "b_recs": self.b_recs,
            "b_ratio": self.b_ratio,
            "fav_recs": self.fav_recs,
            "p_forlorn": self.p_forlorn,
            "n": self.n,
        }


def evaluate(
    recs: Iterable[Recommendation],
    profiles: Mapping[int, float],
    favorites_received: Mapping[int, int],
    forlorn_users: set[int],
) -> RecEvaluation:
    """Average beauty, recipient/candidate beauty ratio, favorites and
    forlorn share over a recommendation list."""
    recs = list(recs)
    if not recs:
        raise ValueError("recommendation list is empty")
    b_recs = b_ratio = fav_recs = forlorn = 0.0
    for r in recs:
        b_u, b_r = profiles.get(r.recipient), profiles.get(r.candidate)
        if b_u is None or b_r is None:
            raise ValueError(f"pair ({r.recipient}, {r.candidate}) is not fully profiled")
        if b_r == 0.0:
            raise ValueError(f"candidate {r.candidate} has zero beauty; ratio undefined")
        b_recs += b_r
        b_ratio += b_u / b_r
        fav_recs += favorites_received.get(r.candidate, 0)
        forlorn += r.candidate in forlorn_users
    n = len(recs)
    return RecEvaluation(b_recs / n, b_ratio / n, fav_recs / n, forlorn / n, n)


def favorites_received_counts(g: TemporalGraph) -> dict[int, int]:
    """Total favorites received per user over the whole dataset."""
    return {u: len(g.favorites_received(u)) for u in g.users}


def simulate(
    snapshot: GraphSnapshot,
    profiles: Mapping[int, float],
    recipients: Iterable[int] | None = None,
    band: float = 0.10,
) -> dict[str, list[Recommendation]]:
    """Issue one CN and one BB recommendation per recipient where possible.

    Default recipients are all profiled users, in id order. Each rule's list
    contains only the recipients for which it produced a recommendation.
    """
    if recipients is None:
        recipients = sorted(profiles)
    out: dict[str, list[Recommendation]] = {"CN": [], "BB": []}
    for u in recipients:
        cn = recommend_cn(snapshot, u)
        if cn is not None:
            out["CN"].append(cn)
        if u in profiles:
            bb = recommend_bb(snapshot, profiles, u, band=band)
            if bb is not None:
                out["BB"].append(bb)
    return out
