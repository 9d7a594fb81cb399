"""Shared fixtures: tiny hand-built datasets and graph views."""

from __future__ import annotations

import numpy as np
import pytest

from relcap.core import Dataset, PlayerSeasonRecord
from relcap.datagen import CONTROL_COLUMNS, SCHEMA, STAT_COLUMNS
from relcap.kg import import_graph, season_view

_TYPE_BY_PREFIX = {
    "player": "Player",
    "ps": "PlayerSeason",
    "team": "Team",
    "agent": "Agent",
    "award": "Award",
    "injury": "Injury",
}


def make_record(
    player: str,
    season: int,
    team: str = "t01",
    agent: str = "g01",
    salary: float = 5_000_000.0,
    **stat_overrides,
) -> PlayerSeasonRecord:
    stats = {c: 1.0 for c in STAT_COLUMNS}
    controls = {c: float(len(player)) for c in CONTROL_COLUMNS}
    controls["draft_year"] = float(season - 3)
    controls["years_since_draft"] = 3.0
    for k, v in stat_overrides.items():
        if k in stats:
            stats[k] = v
        else:
            controls[k] = v
    return PlayerSeasonRecord(
        player_id=player,
        season=season,
        stats=stats,
        controls=controls,
        meta={"team_id": team, "agent_id": agent},
        salary_usd=salary,
    )


def tiny_dataset(records=None, awards=(), injuries=()) -> Dataset:
    if records is None:
        records = [
            make_record("a", 2023),
            make_record("a", 2024),
            make_record("b", 2023, team="t02"),
            make_record("b", 2024),
        ]
    return Dataset(
        records=tuple(records),
        schema=SCHEMA,
        awards=tuple(awards),
        injuries=tuple(injuries),
        rosters={
            "team_id": {r.meta["team_id"] for r in records},
            "agent_id": {r.meta["agent_id"] for r in records},
        },
    )


def view_from_edges(tmp_path, edges, season=2024, variant="V2Full_SG"):
    """Build a GraphView from bare (src, relation, dst) triples via the
    graph import path; node types inferred from key prefixes."""
    nodes = {}
    for src, _, dst in edges:
        for key in (src, dst):
            nodes[key] = _TYPE_BY_PREFIX[key.split(":")[0]]
    d = tmp_path / "gv"
    d.mkdir(exist_ok=True)
    with open(d / "nodes.tsv", "w") as fh:
        fh.write("node_key\tnode_type\n")
        for key in sorted(nodes):
            fh.write(f"{key}\t{nodes[key]}\n")
    with open(d / "edges.tsv", "w") as fh:
        fh.write("src\trelation\tdst\tevent_season\tmultiplicity\n")
        for src, rel, dst in edges:
            fh.write(f"{src}\t{rel}\t{dst}\t\t1\n")
    graph = import_graph(d, include_events=True)
    return season_view(graph, variant, season)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
