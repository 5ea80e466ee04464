"""Analytics for quality-attributed follower networks."""

__version__ = "0.1.0"

from .errors import (
    BalanceRestartError,
    ConfigError,
    IngestError,
    MalformedRecordError,
    NetqualityError,
    UnbalanceableCovariateError,
    UndefinedStatisticError,
    UnknownUserError,
)
from .graphstore import (
    FavoriteEvent,
    FollowEvent,
    GraphSnapshot,
    GroupEvent,
    PhotoEvent,
    TemporalGraph,
    activity_weeks,
    final_snapshot,
    ingest,
    snapshot_at,
    week_of,
)

__all__ = [
    "BalanceRestartError",
    "ConfigError",
    "FavoriteEvent",
    "FollowEvent",
    "GraphSnapshot",
    "GroupEvent",
    "IngestError",
    "MalformedRecordError",
    "NetqualityError",
    "PhotoEvent",
    "TemporalGraph",
    "UnbalanceableCovariateError",
    "UndefinedStatisticError",
    "UnknownUserError",
    "activity_weeks",
    "final_snapshot",
    "ingest",
    "snapshot_at",
    "week_of",
]
