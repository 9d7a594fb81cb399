"""Feature profiling of rescue vs misguidance cohorts.

For each tabular feature we ask whether the instances a graph model rescued
look systematically different from the ones it misled, using Cliff's delta
for effect size and the Mann-Whitney U test for significance. Positive delta
means the rescue cohort runs larger on that feature. Profiling is strictly
descriptive and ex post: nothing computed here feeds back into any model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path

import numpy as np
from scipy.stats import rankdata

from .core import Dataset, Key
from .datagen import CONTROL_COLUMNS, STAT_COLUMNS
from .errors import EvaluationError

EXACT_MAX_N = 20  # exact U distribution up to this combined cohort size


def cliffs_delta(r_values, m_values) -> float:
    """Mean signum of all pairwise differences, rescue minus misguidance.
    Ties contribute zero. Exact double sum; cohorts are desk-scale."""
    r = np.asarray(r_values, dtype=np.float64)
    m = np.asarray(m_values, dtype=np.float64)
    if r.size == 0 or m.size == 0:
        raise EvaluationError("cliffs_delta requires two nonempty cohorts")
    return float(np.sign(np.subtract.outer(r, m)).mean())


def _u_statistic(r, m) -> float:
    """Rank-sum U for the first cohort, midranks on ties."""
    pooled = np.concatenate([r, m])
    ranks = rankdata(pooled, method="average")
    n_r = r.size
    return float(ranks[:n_r].sum() - n_r * (n_r + 1) / 2.0)


def _exact_two_sided_p(u_obs: float, n_r: int, n_m: int) -> float:
    """Full enumeration of all C(n_r+n_m, n_r) rank assignments (no ties)."""
    n = n_r + n_m
    offset = n_r * (n_r + 1) // 2
    at_most = 0
    at_least = 0
    total = 0
    for combo in combinations(range(1, n + 1), n_r):
        u = sum(combo) - offset
        total += 1
        if u <= u_obs:
            at_most += 1
        if u >= u_obs:
            at_least += 1
    p = 2.0 * min(at_most, at_least) / total
    return min(1.0, p)


def _approx_two_sided_p(u_obs: float, r, m) -> float:
    """Normal approximation with tie-corrected variance and a 0.5
    continuity correction."""
    n_r, n_m = r.size, m.size
    n = n_r + n_m
    mu = n_r * n_m / 2.0
    _, tie_counts = np.unique(np.concatenate([r, m]), return_counts=True)
    tie_term = float((tie_counts.astype(np.float64) ** 3 - tie_counts).sum())
    var = (n_r * n_m / 12.0) * ((n + 1) - tie_term / (n * (n - 1)))
    if var <= 0:
        return 1.0
    z = max(abs(u_obs - mu) - 0.5, 0.0) / math.sqrt(var)
    return min(1.0, math.erfc(z / math.sqrt(2.0)))


def mann_whitney_u(r_values, m_values) -> tuple[float, float]:
    """(U for the rescue cohort, two-sided p). Exact distribution by full
    enumeration when the pooled size is at most 20 and tie-free; otherwise
    the tie-corrected normal approximation."""
    r = np.asarray(r_values, dtype=np.float64)
    m = np.asarray(m_values, dtype=np.float64)
    if r.size == 0 or m.size == 0:
        raise EvaluationError("mann_whitney_u requires two nonempty cohorts")
    u = _u_statistic(r, m)
    pooled = np.concatenate([r, m])
    no_ties = np.unique(pooled).size == pooled.size
    if pooled.size <= EXACT_MAX_N and no_ties:
        p = _exact_two_sided_p(u, r.size, m.size)
    else:
        p = _approx_two_sided_p(u, r, m)
    return u, p


# ---------------------------------------------------------------------------
# trait profiles
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TraitRow:
    feature: str
    n_r: int
    n_m: int
    delta: float
    u: float
    p: float
    passes_filter: bool
    rank: int  # 1-based within top_traits, 0 otherwise


@dataclass
class TraitProfile:
    graph_model: str
    baseline: str
    rows: list[TraitRow] = field(default_factory=list)
    flagged: bool = False

    @property
    def top_traits(self) -> list[TraitRow]:
        return [row for row in self.rows if row.rank > 0]


def feature_table_from_dataset(dataset: Dataset, keys) -> dict[str, dict[Key, float]]:
    """Numeric stats and controls per instance; missing values stay NaN."""
    wanted = set(keys)
    table: dict[str, dict[Key, float]] = {c: {} for c in STAT_COLUMNS + CONTROL_COLUMNS}
    for rec in dataset.records:
        key = (rec.player_id, rec.season)
        if key not in wanted:
            continue
        for col in STAT_COLUMNS:
            table[col][key] = rec.stats[col]
        for col in CONTROL_COLUMNS:
            table[col][key] = rec.controls[col]
    return table


def top_traits(
    feature_table: dict[str, dict[Key, float]],
    rescue_keys,
    misguidance_keys,
    p_max: float = 0.10,
    delta_min: float = 0.25,
    k: int = 8,
    graph_model: str = "",
    baseline: str = "",
) -> TraitProfile:
    """Per-feature delta and p over the two cohorts, the dual filter
    (p <= p_max and |delta| >= delta_min), and the top-K by |delta| with the
    feature name as tiebreak.

    Missing values are dropped pairwise per feature, so cohort sizes vary by
    row; a feature whose values vanish entirely from either cohort is
    omitted. An empty rescue or misguidance cohort yields an empty, flagged
    profile.
    """
    rescue_keys = list(rescue_keys)
    misguidance_keys = list(misguidance_keys)
    if not rescue_keys or not misguidance_keys:
        return TraitProfile(graph_model=graph_model, baseline=baseline, flagged=True)
    stats: list[tuple[str, int, int, float, float, float]] = []
    for feature in sorted(feature_table):
        values = feature_table[feature]
        r = np.array([values[k_] for k_ in rescue_keys if k_ in values], dtype=np.float64)
        m = np.array([values[k_] for k_ in misguidance_keys if k_ in values], dtype=np.float64)
        r = r[~np.isnan(r)]
        m = m[~np.isnan(m)]
        if r.size == 0 or m.size == 0:
            continue
        delta = cliffs_delta(r, m)
        u, p = mann_whitney_u(r, m)
        stats.append((feature, r.size, m.size, delta, u, p))
    stats.sort(key=lambda s: (-abs(s[3]), s[0]))
    rows = []
    next_rank = 1
    for feature, n_r, n_m, delta, u, p in stats:
        passes = p <= p_max and abs(delta) >= delta_min
        rank = 0
        if passes and next_rank <= k:
            rank = next_rank
            next_rank += 1
        rows.append(TraitRow(feature, n_r, n_m, delta, u, p, passes, rank))
    return TraitProfile(graph_model=graph_model, baseline=baseline, rows=rows)


def write_traits_csv(profiles: list[TraitProfile], path: str | Path, meta: dict | None = None) -> None:
    if meta:
        header = "# " + " ".join(f"{k}={v}" for k, v in meta.items()) + "\n"
    else:
        header = ""
    with open(path, "w") as fh:
        fh.write(header)
        fh.write("model,baseline,feature,n_R,n_M,delta,U,p,passes_filter,rank\n")
        for prof in profiles:
            for row in prof.rows:
                fh.write(
                    f"{prof.graph_model},{prof.baseline},{row.feature},{row.n_r},{row.n_m},"
                    f"{row.delta!r},{row.u!r},{row.p!r},{int(row.passes_filter)},{row.rank}\n"
                )
