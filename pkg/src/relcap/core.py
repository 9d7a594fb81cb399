"""Core records, schemas, targets, and season-based splitting.

Everything downstream speaks in (player_id, season) keys. A record is one
player's one season: box-score stats, contract-irrelevant controls, and the
categorical metadata (team, agent) that the relational side consumes. The
regression target is log-dollars, ln(1 + salary), so a $34M and a $3.4M
contract sit a constant distance apart instead of a 10x one.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

from .errors import ConfigError, DataError, EvaluationError

# Target cap: exp(40) - 1 is ~2.35e17 dollars; anything above 40 in log space
# is a bug upstream, not a salary.
_MAX_LOG_TARGET = 40.0

Key = tuple[str, int]


@dataclass(frozen=True)
class PlayerSeasonRecord:
    """One player's one season.

    stats and controls are name -> float with NaN marking "not observed";
    the key set must match the dataset schema exactly. meta carries the
    categorical references (team_id, agent_id) used by the graph builder.
    """

    player_id: str
    season: int
    stats: dict[str, float]
    controls: dict[str, float]
    meta: dict[str, str]
    salary_usd: float
    is_synthetic: bool = False

    @property
    def key(self) -> Key:
        return (self.player_id, self.season)


@dataclass(frozen=True)
class FeatureSchema:
    """Ordered column layout for the tabular side.

    Column order is load-bearing: design matrices, importances, and trait
    profiles all index into it. stats and controls are numeric; meta columns
    are categorical and only enter baseline models, never graph-informed ones.
    """

    stat_columns: tuple[str, ...]
    control_columns: tuple[str, ...]
    meta_columns: tuple[str, ...] = ("team_id", "agent_id")

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for name in (*self.stat_columns, *self.control_columns, *self.meta_columns):
            if name in seen:
                raise ConfigError(f"duplicate column name in schema: {name!r}")
            seen.add(name)

    def columns(self) -> list[tuple[str, str]]:
        """All columns in order as (name, kind); kind is numeric or categorical."""
        out = [(c, "numeric") for c in self.stat_columns]
        out += [(c, "numeric") for c in self.control_columns]
        out += [(c, "categorical") for c in self.meta_columns]
        return out


class Dataset:
    """An ordered collection of records that all conform to one schema.

    Construction enforces the structural rules (unique keys, exact schema
    conformance). Value-level problems such as negative salaries are left to
    datagen.validate, which reports instead of raising, so a loaded file can
    be audited without tripping over the first bad row.

    Besides the per-season records, a dataset optionally carries the event
    tables (awards, injuries) the graph builder consumes, and entity rosters
    used for orphan-reference checks. Rosters map kind -> set of known ids.
    """

    def __init__(
        self,
        records: Sequence[PlayerSeasonRecord],
        schema: FeatureSchema,
        awards: Sequence[tuple] = (),
        injuries: Sequence[tuple] = (),
        rosters: dict[str, set[str]] | None = None,
    ):
        self.schema = schema
        self.records = list(records)
        self.awards = [tuple(a) for a in awards]
        self.injuries = [tuple(i) for i in injuries]
        self.rosters = rosters
        stat_set = set(schema.stat_columns)
        ctrl_set = set(schema.control_columns)
        meta_set = set(schema.meta_columns)
        seen: set[Key] = set()
        for rec in self.records:
            if rec.key in seen:
                raise DataError(f"duplicate (player_id, season) key: {rec.key}")
            seen.add(rec.key)
            if set(rec.stats) != stat_set:
                raise DataError(
                    f"record {rec.key} stat columns {sorted(rec.stats)} "
                    f"do not match schema {sorted(stat_set)}"
                )
            if set(rec.controls) != ctrl_set:
                raise DataError(
                    f"record {rec.key} control columns {sorted(rec.controls)} "
                    f"do not match schema {sorted(ctrl_set)}"
                )
            if not meta_set <= set(rec.meta):
                missing = meta_set - set(rec.meta)
                raise DataError(f"record {rec.key} missing meta columns {sorted(missing)}")
        self._by_key = {rec.key: rec for rec in self.records}

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[PlayerSeasonRecord]:
        return iter(self.records)

    def __getitem__(self, key: Key) -> PlayerSeasonRecord:
        return self._by_key[key]

    def __contains__(self, key: Key) -> bool:
        return key in self._by_key

    def keys(self) -> list[Key]:
        return [rec.key for rec in self.records]

    def seasons(self) -> list[int]:
        return sorted({rec.season for rec in self.records})

    def players(self) -> set[str]:
        return {rec.player_id for rec in self.records}

    def subset(self, keys: Iterable[Key]) -> "Dataset":
        """New dataset restricted to the given keys, preserving record order.

        Event tables and rosters are carried over as-is: events describe
        players, not player-season rows, and stay meaningful for any subset.
        """
        wanted = set(keys)
        return Dataset(
            [r for r in self.records if r.key in wanted],
            self.schema,
            awards=self.awards,
            injuries=self.injuries,
            rosters=self.rosters,
        )

    def fingerprint(self) -> str:
        """SHA-256 over a canonical text rendering of records and events.

        Stable across write/load round trips; used to stamp every artifact
        produced from this dataset.
        """
        h = hashlib.sha256()
        h.update(repr([self.schema.stat_columns, self.schema.control_columns, self.schema.meta_columns]).encode())
        for rec in sorted(self.records, key=lambda r: r.key):
            stats = [(c, repr(rec.stats[c])) for c in self.schema.stat_columns]
            ctrls = [(c, repr(rec.controls[c])) for c in self.schema.control_columns]
            meta = [(c, rec.meta[c]) for c in self.schema.meta_columns]
            h.update(repr((rec.key, stats, ctrls, meta, repr(rec.salary_usd))).encode())
        h.update(repr(sorted(self.awards)).encode())
        h.update(repr(sorted(self.injuries)).encode())
        return h.hexdigest()


@dataclass(frozen=True)
class SplitSpec:
    """Season-level forecast split: strictly ordered, non-overlapping buckets.

    Every train season must precede every validation season, and every
    validation season must precede every test season. This is what makes the
    split a forecast instead of a shuffle.
    """

    train_seasons: frozenset[int]
    val_seasons: frozenset[int]
    test_seasons: frozenset[int]

    def __init__(self, train_seasons: Iterable[int], val_seasons: Iterable[int], test_seasons: Iterable[int]):
        object.__setattr__(self, "train_seasons", frozenset(train_seasons))
        object.__setattr__(self, "val_seasons", frozenset(val_seasons))
        object.__setattr__(self, "test_seasons", frozenset(test_seasons))
        self._check()

    def _check(self) -> None:
        tr, va, te = self.train_seasons, self.val_seasons, self.test_seasons
        if not tr:
            raise ConfigError("train_seasons must be non-empty")
        if not te:
            raise ConfigError("test_seasons must be non-empty")
        if tr & va or tr & te or va & te:
            raise ConfigError("split season sets must be disjoint")
        if va:
            if max(tr) >= min(va):
                raise ConfigError("every train season must precede every val season")
            if max(va) >= min(te):
                raise ConfigError("every val season must precede every test season")
        elif max(tr) >= min(te):
            raise ConfigError("every train season must precede every test season")

    def bucket(self, season: int) -> str | None:
        if season in self.train_seasons:
            return "train"
        if season in self.val_seasons:
            return "val"
        if season in self.test_seasons:
            return "test"
        return None


DEFAULT_SPLIT = SplitSpec(train_seasons={2020, 2021, 2022}, val_seasons={2023}, test_seasons={2024})


@dataclass
class SeasonSplit:
    """Result of split_by_season. dropped counts records in no bucket."""

    train: Dataset
    val: Dataset
    test: Dataset
    dropped: int

    def __iter__(self):
        # Allows `train, val, test = split_by_season(...)`.
        return iter((self.train, self.val, self.test))


def make_target(salary_usd: float) -> float:
    """Regression target: ln(1 + salary). Rejects negative salaries."""
    if not math.isfinite(salary_usd):
        raise DataError(f"salary must be finite, got {salary_usd!r}")
    if salary_usd < 0:
        raise DataError(f"salary must be non-negative, got {salary_usd!r}")
    return math.log1p(salary_usd)


def invert_target(y_log: float) -> float:
    """Back to dollars: exp(y) - 1. Guards against absurd log values."""
    if not math.isfinite(y_log):
        raise DataError(f"log target must be finite, got {y_log!r}")
    if y_log > _MAX_LOG_TARGET:
        raise DataError(f"log target {y_log!r} exceeds overflow guard {_MAX_LOG_TARGET}")
    return math.expm1(y_log)


def split_by_season(dataset: Dataset, spec: SplitSpec) -> SeasonSplit:
    """Partition a dataset by the season of each record.

    Records whose season falls in none of the three buckets are dropped and
    counted, never silently reassigned.
    """
    buckets: dict[str, list[PlayerSeasonRecord]] = {"train": [], "val": [], "test": []}
    dropped = 0
    for rec in dataset:
        name = spec.bucket(rec.season)
        if name is None:
            dropped += 1
        else:
            buckets[name].append(rec)
    return SeasonSplit(
        train=Dataset(buckets["train"], dataset.schema),
        val=Dataset(buckets["val"], dataset.schema),
        test=Dataset(buckets["test"], dataset.schema),
        dropped=dropped,
    )


def shared_test_intersection(prediction_sets: Sequence) -> list[Key]:
    """Keys covered by every prediction set, sorted.

    Accepts anything with a .keys() method (prediction sets, datasets) or a
    plain iterable of keys. Comparisons across models are only meaningful on
    this intersection; an empty one is an error, not an empty report.
    """
    if not prediction_sets:
        raise EvaluationError("no prediction sets given")
    key_sets: list[set[Key]] = []
    labels: list[str] = []
    for i, ps in enumerate(prediction_sets):
        keys = ps.keys() if hasattr(ps, "keys") else ps
        key_sets.append(set(keys))
        label = getattr(ps, "label", None) or getattr(ps, "model", None)
        labels.append(str(label) if label else f"set{i}")
    shared = set.intersection(*key_sets)
    if not shared:
        coverage = ", ".join(f"{lbl}={len(ks)}" for lbl, ks in zip(labels, key_sets))
        raise EvaluationError(f"shared test intersection is empty; per-set coverage: {coverage}")
    return sorted(shared)
