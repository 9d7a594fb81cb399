"""Typed knowledge graph, temporal admissibility, and per-variant views.

Node keys are strings with a type prefix: ``player:p001``, ``ps:p001:2020``,
``team:t07``, ``agent:a12``, ``award:league_mvp``, ``injury:acl_tear``. A
PlayerSeason key embeds its season, so admissibility needs nothing beyond the
edge itself.

Event edges attach to every later player-season of the winner/patient: a
player with three past injuries of one type carries three parallel edges to
that injury node (distinct event seasons). The SG view collapses parallels to
multiplicity 1; the MG view keeps the count as an edge multiplicity.

Nothing in this module reads salaries. That is the point.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple

import numpy as np

from .core import Dataset
from .errors import ConfigError, DataError

NODE_TYPES = ("Player", "PlayerSeason", "Team", "Agent", "Award", "Injury")
RELATIONS = (
    "PLAYS_SEASON",
    "MEMBER_OF_TEAM",
    "REPRESENTED_BY",
    "WON_PREVIOUSLY",
    "HAS_INJURY_HISTORY",
    "TEAMMATE_IN_SEASON",
)
EVENT_RELATIONS = frozenset({"WON_PREVIOUSLY", "HAS_INJURY_HISTORY"})
VARIANTS = ("V1_static_player", "V2_playerseason", "V2Full_SG", "V2Full_MG")


class Edge(NamedTuple):
    src: str
    relation: str
    dst: str
    event_season: int | None = None
    multiplicity: int = 1


def ps_key(player_id: str, season: int) -> str:
    return f"ps:{player_id}:{season}"


def parse_ps_key(key: str) -> tuple[str, int]:
    _, pid, season = key.split(":")
    return pid, int(season)


def season_of_key(key: str) -> int | None:
    """Season label of a node key; None for timeless nodes."""
    if key.startswith("ps:"):
        return int(key.rsplit(":", 1)[1])
    return None


def admissible(edge: Edge, prediction_season: int) -> bool:
    """The temporal mask A(e, s).

    Both endpoints must not postdate the prediction season, and an event edge
    must additionally describe a strictly earlier event: a same-season award
    is look-ahead (most hardware is announced after contracts are signed).
    """
    for key in (edge.src, edge.dst):
        season = season_of_key(key)
        if season is not None and season > prediction_season:
            return False
    if edge.event_season is not None:
        return edge.event_season < prediction_season
    return True


@dataclass
class KnowledgeGraph:
    nodes: dict[str, str]  # node_key -> node type
    edges: list[Edge]
    include_events: bool

    def counts(self) -> dict[str, int]:
        by_rel: dict[str, int] = {}
        for e in self.edges:
            by_rel[e.relation] = by_rel.get(e.relation, 0) + 1
        return by_rel


def build_graph(dataset: Dataset, include_events: bool) -> KnowledgeGraph:
    """One PlayerSeason node per record; affiliation edges; optional events.

    Salary never enters: node keys, types, and edges are functions of the
    identity and event tables only.
    """
    nodes: dict[str, str] = {}
    edges: list[Edge] = []
    seasons_of_player: dict[str, list[int]] = {}

    for rec in dataset:
        if ":" in rec.player_id:
            raise DataError(f"player_id may not contain ':': {rec.player_id!r}")
        pk = f"player:{rec.player_id}"
        sk = ps_key(rec.player_id, rec.season)
        nodes[pk] = "Player"
        nodes[sk] = "PlayerSeason"
        edges.append(Edge(pk, "PLAYS_SEASON", sk))
        seasons_of_player.setdefault(rec.player_id, []).append(rec.season)
        team = rec.meta.get("team_id", "")
        if team:
            tk = f"team:{team}"
            nodes[tk] = "Team"
            edges.append(Edge(sk, "MEMBER_OF_TEAM", tk))
        agent = rec.meta.get("agent_id", "")
        if agent:
            ak = f"agent:{agent}"
            nodes[ak] = "Agent"
            edges.append(Edge(sk, "REPRESENTED_BY", ak))

    if include_events:
        known = set(seasons_of_player)
        for pid, season_awarded, award_name in dataset.awards:
            if pid not in known:
                raise DataError(f"awards reference unknown player {pid!r}")
            ek = f"award:{award_name}"
            for s in seasons_of_player[pid]:
                if s > season_awarded:
                    nodes.setdefault(ek, "Award")
                    edges.append(Edge(ps_key(pid, s), "WON_PREVIOUSLY", ek, event_season=season_awarded))
        for pid, season_of_injury, injury_type, _games in dataset.injuries:
            if pid not in known:
                raise DataError(f"injuries reference unknown player {pid!r}")
            ek = f"injury:{injury_type}"
            for s in seasons_of_player[pid]:
                if s > season_of_injury:
                    nodes.setdefault(ek, "Injury")
                    edges.append(Edge(ps_key(pid, s), "HAS_INJURY_HISTORY", ek, event_season=season_of_injury))

    return KnowledgeGraph(nodes=nodes, edges=edges, include_events=include_events)


@dataclass
class GraphView:
    """An admissibility-filtered, variant-shaped graph ready for trainers.

    Node features are [type one-hot | log1p(weighted degree) | season offset]
    and deliberately contain no entity identifiers.
    """

    variant: str
    prediction_season: int
    node_keys: list[str]
    index: dict[str, int]
    node_types: np.ndarray
    node_seasons: np.ndarray  # -1 for timeless nodes
    rel_edges: dict[str, tuple[np.ndarray, np.ndarray, np.ndarray]]  # rel -> (src, dst, mult)
    features: np.ndarray
    isolated: set[str]
    fingerprint: str
    _edge_table: list[tuple[str, str, str, int]] = field(repr=False, default_factory=list)
    _csr: tuple[np.ndarray, np.ndarray] | None = field(repr=False, default=None)

    @property
    def n(self) -> int:
        return len(self.node_keys)

    def relations(self) -> list[str]:
        return sorted(self.rel_edges)

    def undirected_csr(self) -> tuple[np.ndarray, np.ndarray]:
        """Simple (deduplicated, both-direction) adjacency for walk samplers."""
        if self._csr is None:
            pairs: set[tuple[int, int]] = set()
            for src, dst, _mult in self.rel_edges.values():
                for a, b in zip(src.tolist(), dst.tolist()):
                    if a != b:
                        pairs.add((a, b))
                        pairs.add((b, a))
            if pairs:
                arr = np.array(sorted(pairs), dtype=np.int64)
                indptr = np.zeros(self.n + 1, dtype=np.int64)
                np.add.at(indptr, arr[:, 0] + 1, 1)
                indptr = np.cumsum(indptr)
                self._csr = (indptr, arr[:, 1].copy())
            else:
                self._csr = (np.zeros(self.n + 1, dtype=np.int64), np.zeros(0, dtype=np.int64))
        return self._csr

    def triples(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, list[str]]:
        """(head, rel, tail) index arrays over sorted relation names."""
        rels = self.relations()
        heads, rel_ids, tails = [], [], []
        for ri, rel in enumerate(rels):
            src, dst, _ = self.rel_edges[rel]
            heads.append(src)
            rel_ids.append(np.full(len(src), ri, dtype=np.int64))
            tails.append(dst)
        if heads:
            return np.concatenate(heads), np.concatenate(rel_ids), np.concatenate(tails), rels
        return (np.zeros(0, dtype=np.int64),) * 3 + (rels,)  # type: ignore[return-value]


def _assemble_view(
    variant: str,
    prediction_season: int,
    node_items: list[tuple[str, str]],
    edge_table: list[tuple[str, str, str, int]],
) -> GraphView:
    node_items = sorted(node_items)
    node_keys = [k for k, _ in node_items]
    index = {k: i for i, k in enumerate(node_keys)}
    node_types = np.array([NODE_TYPES.index(t) for _, t in node_items], dtype=np.int8)
    node_seasons = np.array([season_of_key(k) if season_of_key(k) is not None else -1 for k in node_keys], dtype=np.int32)

    merged: dict[tuple[str, str, str], int] = {}
    for src, rel, dst, mult in edge_table:
        merged[(src, rel, dst)] = merged.get((src, rel, dst), 0) + mult
    rel_edges: dict[str, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}
    by_rel: dict[str, list[tuple[int, int, int]]] = {}
    for (src, rel, dst), mult in sorted(merged.items()):
        by_rel.setdefault(rel, []).append((index[src], index[dst], mult))
    for rel, rows in by_rel.items():
        arr = np.array(rows, dtype=np.int64)
        rel_edges[rel] = (arr[:, 0].copy(), arr[:, 1].copy(), arr[:, 2].astype(np.float64))

    degree = np.zeros(len(node_keys), dtype=np.float64)
    for src, dst, mult in rel_edges.values():
        np.add.at(degree, src, mult)
        np.add.at(degree, dst, mult)
    isolated = {node_keys[i] for i in np.nonzero(degree == 0)[0]}

    ps_mask = node_seasons >= 0
    if ps_mask.any():
        lo = int(node_seasons[ps_mask].min())
        hi = int(node_seasons[ps_mask].max())
        span = max(1, hi - lo)
        offset = np.where(ps_mask, (node_seasons - lo) / span, 0.0)
    else:
        offset = np.zeros(len(node_keys))

    features = np.zeros((len(node_keys), len(NODE_TYPES) + 2), dtype=np.float64)
    features[np.arange(len(node_keys)), node_types.astype(int)] = 1.0
    features[:, len(NODE_TYPES)] = np.log1p(degree)
    features[:, len(NODE_TYPES) + 1] = offset

    h = hashlib.sha256()
    h.update(repr((variant, prediction_season)).encode())
    h.update(repr(node_items).encode())
    h.update(repr(sorted(merged.items())).encode())
    return GraphView(
        variant=variant,
        prediction_season=prediction_season,
        node_keys=node_keys,
        index=index,
        node_types=node_types,
        node_seasons=node_seasons,
        rel_edges=rel_edges,
        features=features,
        isolated=isolated,
        fingerprint=h.hexdigest(),
        _edge_table=[(s, r, d, m) for (s, r, d), m in sorted(merged.items())],
    )


def season_view(graph: KnowledgeGraph, variant: str, up_to_season: int) -> GraphView:
    """Admissibility-filtered view of the graph for one prediction season.

    V1 collapses player-seasons onto career Player nodes (affiliation edges
    become the union over seasons; events are not part of the static career
    topology). V2 keeps the anchor nodes, affiliation-only. The V2Full pair
    adds event edges: SG deduplicates parallels, MG keeps their count.
    """
    if variant not in VARIANTS:
        raise ConfigError(f"unknown view variant {variant!r}")
    if variant in ("V2Full_SG", "V2Full_MG") and not graph.include_events:
        raise ConfigError(f"{variant} requires a graph built with include_events=True")

    live = [e for e in graph.edges if admissible(e, up_to_season)]
    want_events = variant in ("V2Full_SG", "V2Full_MG")
    if not want_events:
        live = [e for e in live if e.relation not in EVENT_RELATIONS]

    def node_ok(key: str) -> bool:
        season = season_of_key(key)
        return season is None or season <= up_to_season

    node_items = [(k, t) for k, t in graph.nodes.items() if node_ok(k)]
    if not want_events:
        node_items = [(k, t) for k, t in node_items if t not in ("Award", "Injury")]

    if variant == "V1_static_player":
        collapsed: set[tuple[str, str, str]] = set()
        for e in live:
            if e.relation == "PLAYS_SEASON":
                continue  # collapses to a self-loop
            src = e.src
            if src.startswith("ps:"):
                src = f"player:{parse_ps_key(src)[0]}"
            dst = e.dst
            if dst.startswith("ps:"):
                dst = f"player:{parse_ps_key(dst)[0]}"
            collapsed.add((src, e.relation, dst))
        node_items = [(k, t) for k, t in node_items if t != "PlayerSeason"]
        # career topology is a union: a team kept across seasons is one edge
        return _assemble_view(variant, up_to_season, node_items, [(s, r, d, 1) for s, r, d in sorted(collapsed)])

    if variant == "V2Full_SG":
        table = sorted({(e.src, e.relation, e.dst) for e in live})
        return _assemble_view(variant, up_to_season, node_items, [(s, r, d, 1) for s, r, d in table])
    # V2Full_MG counts parallel edges; V2_playerseason has no parallels.
    return _assemble_view(variant, up_to_season, node_items, [(e.src, e.relation, e.dst, 1) for e in live])


@dataclass
class MaskResult:
    """Training view with test anchors removed, plus what was removed."""

    train_view: GraphView
    removed_keys: list[str]


def inductive_mask(view: GraphView, test_node_keys: Iterable[str]) -> MaskResult:
    """Remove test PlayerSeason nodes (and incident edges) for training.

    Features and degrees are recomputed on the reduced graph, so a masked
    view is exactly what an inductive trainer would have seen at fit time.
    """
    removed = sorted(set(test_node_keys))
    missing = [k for k in removed if k not in view.index]
    if missing:
        raise ConfigError(f"test keys not present in view: {missing[:5]}")
    gone = set(removed)
    node_items = [
        (k, NODE_TYPES[view.node_types[i]]) for i, k in enumerate(view.node_keys) if k not in gone
    ]
    if not any(t == "PlayerSeason" for _, t in node_items):
        raise ConfigError("inductive mask removed every PlayerSeason node; nothing left to train on")
    table = [(s, r, d, m) for s, r, d, m in view._edge_table if s not in gone and d not in gone]
    train_view = _assemble_view(view.variant, view.prediction_season, node_items, table)
    return MaskResult(train_view=train_view, removed_keys=removed)


def export_graph(graph: KnowledgeGraph, out_dir: str | Path) -> Path:
    """TSV edge list + node-type file, for debugging and cross-language use."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "nodes.tsv", "w") as fh:
        fh.write("node_key\tnode_type\n")
        for key in sorted(graph.nodes):
            fh.write(f"{key}\t{graph.nodes[key]}\n")
    with open(out / "edges.tsv", "w") as fh:
        fh.write("src_key\trelation\tdst_key\tevent_season\tmultiplicity\n")
        for e in sorted(graph.edges):
            es = "" if e.event_season is None else str(e.event_season)
            fh.write(f"{e.src}\t{e.relation}\t{e.dst}\t{es}\t{e.multiplicity}\n")
    return out


def import_graph(data_dir: str | Path, include_events: bool | None = None) -> KnowledgeGraph:
    d = Path(data_dir)
    nodes: dict[str, str] = {}
    with open(d / "nodes.tsv") as fh:
        next(fh)
        for line in fh:
            key, node_type = line.rstrip("\n").split("\t")
            if node_type not in NODE_TYPES:
                raise DataError(f"unknown node type {node_type!r} for {key!r}")
            nodes[key] = node_type
    edges: list[Edge] = []
    with open(d / "edges.tsv") as fh:
        next(fh)
        for line in fh:
            src, rel, dst, es, mult = line.rstrip("\n").split("\t")
            if rel not in RELATIONS:
                raise DataError(f"unknown relation {rel!r}")
            edges.append(Edge(src, rel, dst, int(es) if es else None, int(mult)))
    if include_events is None:
        include_events = any(e.relation in EVENT_RELATIONS for e in edges)
    return KnowledgeGraph(nodes=nodes, edges=edges, include_events=include_events)
