"""Readers and writers for the four event-stream files.

Each stream is a CSV with a header row, or a JSONL file with identical field
names. follows: ``src,dst,t``; photos: ``owner,photo,t,beauty`` or
``owner,photo,t,p_lq,p_mq,p_hq`` (triples are collapsed to a scalar score at
load time); favorites: ``actor,photo,t``; groups: ``member,group,t``.
Ids are unsigned 64-bit decimals, timestamps unsigned seconds.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterator

from .errors import MalformedRecordError
from .graphstore import (
    FavoriteEvent,
    FollowEvent,
    GroupEvent,
    PhotoEvent,
    TemporalGraph,
    ingest,
)
from .scoring import QualityTriple, beauty_score

_MAX_ID = 2**64 - 1

STREAM_NAMES = ("follows", "photos", "favorites", "groups")


def _parse_id(raw, path, line, fieldname) -> int:
    try:
        value = int(raw)
    except (TypeError, ValueError):
        raise MalformedRecordError(path, line, f"{fieldname}: not an integer: {raw!r}") from None
    if not (0 <= value <= _MAX_ID):
        raise MalformedRecordError(path, line, f"{fieldname}: {value} outside unsigned 64-bit range")
    return value


def _parse_t(raw, path, line) -> int:
    t = _parse_id(raw, path, line, "t")
    return t


def _parse_float(raw, path, line, fieldname) -> float:
    try:
        return float(raw)
    except (TypeError, ValueError):
        raise MalformedRecordError(path, line, f"{fieldname}: not a number: {raw!r}") from None


def _records(path: Path) -> Iterator[tuple[int, dict]]:
    """Yield (line_number, record_dict) from a CSV or JSONL file."""
    if path.suffix == ".jsonl":
        with open(path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise MalformedRecordError(path, line_no, f"invalid JSON: {exc.msg}") from None
                if not isinstance(rec, dict):
                    raise MalformedRecordError(path, line_no, "record is not an object")
                yield line_no, rec
    else:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None:
                return
            for rec in reader:
                if None in rec or any(v is None for v in rec.values()):
                    raise MalformedRecordError(path, reader.line_num, "wrong number of fields")
                yield reader.line_num, rec


def _require(rec: dict, fields: tuple[str, ...], path, line) -> None:
    missing = [f for f in fields if f not in rec]
    if missing:
        raise MalformedRecordError(path, line, f"missing field(s): {', '.join(missing)}")


def read_follows(path) -> list[FollowEvent]:
    path = Path(path)
    events = []
    for line, rec in _records(path):
        _require(rec, ("src", "dst", "t"), path, line)
        src = _parse_id(rec["src"], path, line, "src")
        dst = _parse_id(rec["dst"], path, line, "dst")
        if src == dst:
            raise MalformedRecordError(path, line, f"self-follow for user {src}")
        events.append(FollowEvent(src, dst, _parse_t(rec["t"], path, line)))
    return events


def read_photos(path) -> list[PhotoEvent]:
    path = Path(path)
    events = []
    for line, rec in _records(path):
        _require(rec, ("owner", "photo", "t"), path, line)
        owner = _parse_id(rec["owner"], path, line, "owner")
        photo = _parse_id(rec["photo"], path, line, "photo")
        t = _parse_t(rec["t"], path, line)
        if "beauty" in rec:
            beauty = _parse_float(rec["beauty"], path, line, "beauty")
        elif "p_lq" in rec or "p_hq" in rec:
            _require(rec, ("p_lq", "p_mq", "p_hq"), path, line)
            try:
                triple = QualityTriple(
                    _parse_float(rec["p_lq"], path, line, "p_lq"),
                    _parse_float(rec["p_mq"], path, line, "p_mq"),
                    _parse_float(rec["p_hq"], path, line, "p_hq"),
                )
            except ValueError as exc:
                raise MalformedRecordError(path, line, str(exc)) from None
            beauty = beauty_score(triple)
        else:
            raise MalformedRecordError(path, line, "missing field(s): beauty or p_lq,p_mq,p_hq")
        if not (0.0 <= beauty <= 1.0):
            raise MalformedRecordError(path, line, f"beauty {beauty} outside [0, 1]")
        events.append(PhotoEvent(owner, photo, t, beauty))
    return events


def read_favorites(path) -> list[FavoriteEvent]:
    path = Path(path)
    events = []
    for line, rec in _records(path):
        _require(rec, ("actor", "photo", "t"), path, line)
        events.append(
            FavoriteEvent(
                _parse_id(rec["actor"], path, line, "actor"),
                _parse_id(rec["photo"], path, line, "photo"),
                _parse_t(rec["t"], path, line),
            )
        )
    return events


def read_groups(path) -> list[GroupEvent]:
    path = Path(path)
    events = []
    for line, rec in _records(path):
        _require(rec, ("member", "group", "t"), path, line)
        events.append(
            GroupEvent(
                _parse_id(rec["member"], path, line, "member"),
                _parse_id(rec["group"], path, line, "group"),
                _parse_t(rec["t"], path, line),
            )
        )
    return events


def stream_path(data_dir, name: str) -> Path:
    """Resolve `<dir>/<name>.csv` or the `.jsonl` variant."""
    data_dir = Path(data_dir)
    for suffix in (".csv", ".jsonl"):
        candidate = data_dir / f"{name}{suffix}"
        if candidate.exists():
            return candidate
    raise FileNotFoundError(str(data_dir / f"{name}.csv"))


def load_dataset(data_dir) -> TemporalGraph:
    """Read the four streams from a directory and ingest them."""
    return ingest(
        read_follows(stream_path(data_dir, "follows")),
        read_photos(stream_path(data_dir, "photos")),
        read_favorites(stream_path(data_dir, "favorites")),
        read_groups(stream_path(data_dir, "groups")),
    )


def _fmt(x) -> str:
    return repr(x) if isinstance(x, float) else str(x)


def write_follows(path, events: list[FollowEvent]) -> None:
    _write_csv(path, ("src", "dst", "t"), ((e.src, e.dst, e.t) for e in events))


def write_photos(path, events: list[PhotoEvent]) -> None:
    _write_csv(path, ("owner", "photo", "t", "beauty"), ((p.owner, p.photo, p.t, p.beauty) for p in events))


def write_favorites(path, events: list[FavoriteEvent]) -> None:
    _write_csv(path, ("actor", "photo", "t"), ((f.actor, f.photo, f.t) for f in events))


def write_groups(path, events: list[GroupEvent]) -> None:
    _write_csv(path, ("member", "group", "t"), ((g.member, g.group, g.t) for g in events))


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(x) for x in row])


def write_dataset(data_dir, streams) -> list[Path]:
    """Write a SynthStreams-like object as the four CSV files."""
    data_dir = Path(data_dir)
    data_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, writer, events in (
        ("follows", write_follows, streams.follows),
        ("photos", write_photos, streams.photos),
        ("favorites", write_favorites, streams.favorites),
        ("groups", write_groups, streams.groups),
    ):
        p = data_dir / f"{name}.csv"
        writer(p, events)
        paths.append(p)
    return paths
