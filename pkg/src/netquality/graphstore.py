"""Temporal follower graph with weekly-quantized views.

The graph is built once from four event streams (follows, photos, favorites,
group joins) and is immutable afterwards, so it can be shared freely across
analysis code. All timeline queries are expressed in week indices: fixed
7-day bins counted from the Unix epoch.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping

from .errors import IngestError, UnknownUserError

SECONDS_PER_WEEK = 604800


def week_of(t: int) -> int:
    """Map a unix timestamp (seconds) to its 7-day bin index."""
    if t < 0:
        raise ValueError(f"negative timestamp: {t}")
    return int(t) // SECONDS_PER_WEEK


@dataclass(frozen=True, slots=True)
class FollowEvent:
    src: int
    dst: int
    t: int


@dataclass(frozen=True, slots=True)
class PhotoEvent:
    owner: int
    photo: int
    t: int
    beauty: float


@dataclass(frozen=True, slots=True)
class FavoriteEvent:
    actor: int
    photo: int
    t: int


@dataclass(frozen=True, slots=True)
class GroupEvent:
    member: int
    group: int
    t: int


@dataclass(frozen=True)
class GraphSnapshot:
    """Follow edges created strictly before the start of `week`."""

    week: int
    out_adj: Mapping[int, tuple[int, ...]]
    in_adj: Mapping[int, tuple[int, ...]]
    users: tuple[int, ...]

    def out_neighbors(self, u: int) -> tuple[int, ...]:
        return self.out_adj.get(u, ())

    def in_neighbors(self, u: int) -> tuple[int, ...]:
        return self.in_adj.get(u, ())

    def out_degree(self, u: int) -> int:
        return len(self.out_adj.get(u, ()))

    def in_degree(self, u: int) -> int:
        return len(self.in_adj.get(u, ()))

    @property
    def n_edges(self) -> int:
        return sum(len(v) for v in self.out_adj.values())

    def edges(self) -> Iterator[tuple[int, int]]:
        for u in sorted(self.out_adj):
            for v in self.out_adj[u]:
                yield (u, v)


@dataclass(eq=False)
class TemporalGraph:
    """Immutable event-sourced view of a follower network.

    Canonical event lists are deduplicated and sorted with a total order, so
    two graphs ingested from the same records (in any stream order) compare
    equal. Per-user indexes are derived once at construction.
    """

    follows: list[FollowEvent]
    photos: list[PhotoEvent]
    favorites: list[FavoriteEvent]
    groups: list[GroupEvent]
    users: tuple[int, ...] = field(default_factory=tuple)
    join_week: dict[int, int] = field(default_factory=dict)
    ingest_warnings: list[str] = field(default_factory=list)

    def __post_init__(self):
        self._out: dict[int, list[FollowEvent]] = {}
        self._in: dict[int, list[FollowEvent]] = {}
        self._photos_by_owner: dict[int, list[PhotoEvent]] = {}
        self._photo_owner: dict[int, int] = {}
        self._favs_given: dict[int, list[FavoriteEvent]] = {}
        self._favs_received: dict[int, list[FavoriteEvent]] = {}
        self._groups_by_member: dict[int, list[GroupEvent]] = {}
        for e in self.follows:
            self._out.setdefault(e.src, []).append(e)
            self._in.setdefault(e.dst, []).append(e)
        for p in self.photos:
            self._photos_by_owner.setdefault(p.owner, []).append(p)
            self._photo_owner[p.photo] = p.owner
        for f in self.favorites:
            self._favs_given.setdefault(f.actor, []).append(f)
            self._favs_received.setdefault(self._photo_owner[f.photo], []).append(f)
        for ge in self.groups:
            self._groups_by_member.setdefault(ge.member, []).append(ge)
        # per-user follow week arrays for fast prefix queries
        self._out_weeks: dict[int, list[int]] = {
            u: [week_of(e.t) for e in evs] for u, evs in self._out.items()
        }

    def __eq__(self, other) -> bool:
        if not isinstance(other, TemporalGraph):
            return NotImplemented
        return (
            self.users == other.users
            and self.follows == other.follows
            and self.photos == other.photos
            and self.favorites == other.favorites
            and self.groups == other.groups
        )

    @property
    def n_users(self) -> int:
        return len(self.users)

    @property
    def n_edges(self) -> int:
        return len(self.follows)

    @property
    def last_week(self) -> int:
        """Largest week index of any event; 0 for an empty graph."""
        weeks = [week_of(evs[-1].t) for evs in (self.follows, self.photos, self.favorites, self.groups) if evs]
        return max(weeks) if weeks else 0

    def has_user(self, u: int) -> bool:
        return u in self.join_week

    def photos_of(self, u: int) -> list[PhotoEvent]:
        return self._photos_by_owner.get(u, [])

    def out_events(self, u: int) -> list[FollowEvent]:
        return self._out.get(u, [])

    def in_events(self, u: int) -> list[FollowEvent]:
        return self._in.get(u, [])

    def favorites_given(self, u: int) -> list[FavoriteEvent]:
        return self._favs_given.get(u, [])

    def favorites_received(self, u: int) -> list[FavoriteEvent]:
        return self._favs_received.get(u, [])

    def groups_of(self, u: int) -> list[GroupEvent]:
        return self._groups_by_member.get(u, [])

    def out_degree(self, u: int) -> int:
        return len(self._out.get(u, ()))

    def in_degree(self, u: int) -> int:
        return len(self._in.get(u, ()))

    def out_neighbors_before(self, u: int, w: int) -> list[int]:
        """Targets of u's follow edges created strictly before week `w`."""
        weeks = self._out_weeks.get(u)
        if not weeks:
            return []
        k = bisect.bisect_left(weeks, w)
        return [e.dst for e in self._out[u][:k]]

    def out_links_in_week(self, u: int, w: int) -> list[int]:
        """Targets of u's follow edges created during week `w`."""
        weeks = self._out_weeks.get(u)
        if not weeks:
            return []
        lo = bisect.bisect_left(weeks, w)
        hi = bisect.bisect_right(weeks, w)
        return [e.dst for e in self._out[u][lo:hi]]


def ingest(
    follows: Iterable[FollowEvent],
    photos: Iterable[PhotoEvent],
    favorites: Iterable[FavoriteEvent],
    groups: Iterable[GroupEvent],
) -> TemporalGraph:
    """Materialize a TemporalGraph from the four event streams.

    Stream order is irrelevant: events are sorted into a canonical order and
    duplicates are collapsed (earliest timestamp wins for repeated follow,
    favorite and group-join pairs). A favorite referencing an unknown photo
    is dropped with a warning; a photo id used twice is an error.
    """
    warnings: list[str] = []

    earliest_follow: dict[tuple[int, int], FollowEvent] = {}
    for e in follows:
        if e.src == e.dst:
            raise IngestError(f"self-follow for user {e.src}")
        key = (e.src, e.dst)
        prev = earliest_follow.get(key)
        if prev is None or e.t < prev.t:
            earliest_follow[key] = e
    follow_list = sorted(earliest_follow.values(), key=lambda e: (e.t, e.src, e.dst))

    photo_list: list[PhotoEvent] = []
    seen_photos: set[int] = set()
    for p in photos:
        if p.photo in seen_photos:
            raise IngestError(f"duplicate photo id {p.photo}")
        if not (0.0 <= p.beauty <= 1.0):
            raise IngestError(f"photo {p.photo}: beauty {p.beauty} outside [0, 1]")
        seen_photos.add(p.photo)
        photo_list.append(p)
    photo_list.sort(key=lambda p: (p.t, p.owner, p.photo))

    earliest_fav: dict[tuple[int, int], FavoriteEvent] = {}
    n_dropped = 0
    for f in favorites:
        if f.photo not in seen_photos:
            n_dropped += 1
            continue
        key = (f.actor, f.photo)
        prev = earliest_fav.get(key)
        if prev is None or f.t < prev.t:
            earliest_fav[key] = f
    if n_dropped:
        warnings.append(f"dropped {n_dropped} favorite(s) referencing unknown photos")
    fav_list = sorted(earliest_fav.values(), key=lambda f: (f.t, f.actor, f.photo))

    earliest_group: dict[tuple[int, int], GroupEvent] = {}
    for ge in groups:
        key = (ge.member, ge.group)
        prev = earliest_group.get(key)
        if prev is None or ge.t < prev.t:
            earliest_group[key] = ge
    group_list = sorted(earliest_group.values(), key=lambda g: (g.t, g.member, g.group))

    join_week: dict[int, int] = {}

    def note(u: int, t: int) -> None:
        w = week_of(t)
        if u not in join_week or w < join_week[u]:
            join_week[u] = w

    photo_owner = {p.photo: p.owner for p in photo_list}
    for e in follow_list:
        note(e.src, e.t)
        note(e.dst, e.t)
    for p in photo_list:
        note(p.owner, p.t)
    for f in fav_list:
        note(f.actor, f.t)
        note(photo_owner[f.photo], f.t)
    for ge in group_list:
        note(ge.member, ge.t)

    return TemporalGraph(
        follows=follow_list,
        photos=photo_list,
        favorites=fav_list,
        groups=group_list,
        users=tuple(sorted(join_week)),
        join_week=join_week,
        ingest_warnings=warnings,
    )


def snapshot_at(g: TemporalGraph, w: int) -> GraphSnapshot:
    """Adjacency restricted to follow edges created strictly before week `w`."""
    cutoff = w * SECONDS_PER_WEEK
    out_adj: dict[int, list[int]] = {}
    in_adj: dict[int, list[int]] = {}
    for e in g.follows:
        if e.t >= cutoff:
            break  # canonical follow list is time-sorted
        out_adj.setdefault(e.src, []).append(e.dst)
        in_adj.setdefault(e.dst, []).append(e.src)
    return GraphSnapshot(
        week=w,
        out_adj={u: tuple(sorted(vs)) for u, vs in out_adj.items()},
        in_adj={u: tuple(sorted(vs)) for u, vs in in_adj.items()},
        users=g.users,
    )


def final_snapshot(g: TemporalGraph) -> GraphSnapshot:
    """Snapshot containing every follow edge in the dataset."""
    return snapshot_at(g, g.last_week + 1)


def activity_weeks(g: TemporalGraph, u: int) -> set[int]:
    """Weeks in which `u` uploaded at least one photo."""
    if not g.has_user(u):
        raise UnknownUserError(f"unknown user {u}")
    return {week_of(p.t) for p in g.photos_of(u)}
