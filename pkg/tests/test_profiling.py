import math
from itertools import combinations

import numpy as np
import pytest

from relcap.errors import EvaluationError
from relcap.profiling import (
    TraitProfile,
    _approx_two_sided_p,
    cliffs_delta,
    feature_table_from_dataset,
    mann_whitney_u,
    top_traits,
    write_traits_csv,
)

from conftest import make_record, tiny_dataset


# ---------------------------------------------------------------------------
# Cliff's delta
# ---------------------------------------------------------------------------


def test_delta_same_multiset_is_zero():
    assert cliffs_delta([1, 2, 3], [3, 1, 2]) == 0.0


def test_delta_complete_dominance():
    assert cliffs_delta([4, 5, 6], [1, 2, 3]) == 1.0
    assert cliffs_delta([1, 2, 3], [4, 5, 6]) == -1.0


def test_delta_hand_enumeration():
    # pairs (1,2)->-1 (1,4)->-1 (3,2)->+1 (3,4)->-1
    assert cliffs_delta([1, 3], [2, 4]) == -0.5


def test_delta_antisymmetry_and_bounds():
    rng = np.random.default_rng(3)
    for _ in range(50):
        r = rng.integers(0, 6, size=rng.integers(1, 12)).astype(float)
        m = rng.integers(0, 6, size=rng.integers(1, 12)).astype(float)
        d = cliffs_delta(r, m)
        assert -1.0 <= d <= 1.0
        assert d == -cliffs_delta(m, r)


def test_delta_matches_brute_force():
    rng = np.random.default_rng(11)
    for _ in range(100):
        r = rng.normal(size=rng.integers(1, 20))
        m = rng.normal(size=rng.integers(1, 20))
        brute = np.mean([np.sign(x - y) for x in r for y in m])
        assert cliffs_delta(r, m) == pytest.approx(brute, abs=1e-12)


def test_delta_empty_cohort_rejected():
    with pytest.raises(EvaluationError):
        cliffs_delta([], [1.0])
    with pytest.raises(EvaluationError):
        cliffs_delta([1.0], [])


# ---------------------------------------------------------------------------
# Mann-Whitney U
# ---------------------------------------------------------------------------


def test_u_minimal_example():
    u, p = mann_whitney_u([1, 2], [3, 4])
    assert u == 0.0
    assert p == pytest.approx(2 / 6, abs=1e-12)


def test_u_three_vs_three_extreme():
    u, p = mann_whitney_u([1, 2, 3], [4, 5, 6])
    assert u == 0.0
    # most extreme of C(6,3)=20 equally likely labelings, doubled
    assert p == pytest.approx(2 / 20, abs=1e-12)


def test_u_midrank_ties():
    # pooled {1,2,2,2,3}: the 2s share midrank 3; U_R = (1+3+3) - 6 = 1,
    # i.e. zero wins plus two half-credit ties
    u, _ = mann_whitney_u([1, 2, 2], [2, 3])
    assert u == 1.0


def test_u_identical_singletons():
    u, p = mann_whitney_u([5.0], [5.0])
    assert u == 0.5
    assert p == 1.0


def test_u_midpoint_p_capped_at_one():
    _, p = mann_whitney_u([1, 4], [2, 3])
    assert p == 1.0


def test_u_delta_identity_without_ties():
    rng = np.random.default_rng(23)
    for _ in range(60):
        r = rng.normal(size=rng.integers(1, 10))
        m = rng.normal(size=rng.integers(1, 10))
        u, _ = mann_whitney_u(r, m)
        assert 2 * u / (r.size * m.size) - 1 == pytest.approx(cliffs_delta(r, m), abs=1e-12)


def test_u_symmetry():
    # U_R + U_M = n_R * n_M, and the two-sided p is orientation-free
    rng = np.random.default_rng(29)
    for _ in range(20):
        r = rng.normal(size=6)
        m = rng.normal(size=5)
        u_r, p_r = mann_whitney_u(r, m)
        u_m, p_m = mann_whitney_u(m, r)
        assert u_r + u_m == pytest.approx(30.0, abs=1e-9)
        assert p_r == pytest.approx(p_m, abs=1e-12)


def test_u_exact_matches_full_permutation():
    # brute force: relabel the pooled sample every way and count U values at
    # least as extreme as observed
    rng = np.random.default_rng(31)
    for _ in range(25):
        n_r = int(rng.integers(1, 6))
        n_m = int(rng.integers(1, 6))
        pooled = rng.permutation(np.arange(1.0, n_r + n_m + 1))
        r, m = pooled[:n_r], pooled[n_r:]
        u_obs, p = mann_whitney_u(r, m)
        us = []
        idx = range(n_r + n_m)
        for pick in combinations(idx, n_r):
            pick = set(pick)
            rr = np.array([pooled[i] for i in pick])
            mm = np.array([pooled[i] for i in idx if i not in pick])
            u, _ = mann_whitney_u(rr, mm)
            us.append(u)
        us = np.array(us)
        expect = 2.0 * min((us <= u_obs).mean(), (us >= u_obs).mean())
        assert p == pytest.approx(min(1.0, expect), abs=1e-12)


def test_u_exact_and_approx_agree_at_crossover():
    rng = np.random.default_rng(37)
    for _ in range(5):
        r = rng.normal(size=10)
        m = rng.normal(size=10)
        _, p_exact = mann_whitney_u(r, m)  # 20 values, no ties: exact path
        u, _ = mann_whitney_u(r, m)
        p_approx = _approx_two_sided_p(u, r, m)
        assert abs(p_exact - p_approx) <= 0.01


def test_u_large_samples_use_approximation():
    rng = np.random.default_rng(41)
    r = rng.normal(1.0, 1.0, size=40)
    m = rng.normal(0.0, 1.0, size=40)
    u, p = mann_whitney_u(r, m)
    assert 0.0 <= p <= 1.0
    assert p < 0.05  # a full-sigma shift at n=40 per side is unmissable


def test_u_monotone_transform_invariance():
    rng = np.random.default_rng(43)
    r = rng.normal(size=7)
    m = rng.normal(size=6)
    u1, p1 = mann_whitney_u(r, m)
    d1 = cliffs_delta(r, m)
    f = lambda x: np.exp(3 * x) + 1  # strictly increasing
    u2, p2 = mann_whitney_u(f(r), f(m))
    assert u2 == u1
    assert p2 == p1
    assert cliffs_delta(f(r), f(m)) == d1


def test_u_empty_cohort_rejected():
    with pytest.raises(EvaluationError):
        mann_whitney_u([], [1.0])


# ---------------------------------------------------------------------------
# top_traits
# ---------------------------------------------------------------------------


def _planted_table(n_r=10, n_m=14, seed=0):
    """age separates the cohorts cleanly; noise does not."""
    rng = np.random.default_rng(seed)
    rescue = [(f"r{i}", 2024) for i in range(n_r)]
    misguid = [(f"m{i}", 2024) for i in range(n_m)]
    table = {
        "age_now": {},
        "noise": {},
        "flat": {},
    }
    for i, k in enumerate(rescue):
        table["age_now"][k] = 33.0 + i * 0.25
        table["noise"][k] = float(rng.normal())
        table["flat"][k] = 7.0
    for i, k in enumerate(misguid):
        table["age_now"][k] = 22.0 + i * 0.25
        table["noise"][k] = float(rng.normal())
        table["flat"][k] = 7.0
    return table, rescue, misguid


def test_planted_age_signal_ranks_first():
    table, rescue, misguid = _planted_table()
    prof = top_traits(table, rescue, misguid, graph_model="g", baseline="weak")
    assert not prof.flagged
    top = prof.top_traits
    assert top and top[0].feature == "age_now"
    assert top[0].delta > 0.25
    assert top[0].p <= 0.10
    assert top[0].rank == 1


def test_sign_convention_flips_with_direction():
    # rescue cohort systematically SMALLER on the feature -> negative delta
    table, rescue, misguid = _planted_table()
    prof = top_traits(table, misguid, rescue, graph_model="g", baseline="weak")
    row = next(r for r in prof.rows if r.feature == "age_now")
    assert row.delta < -0.25


def test_constant_feature_excluded_from_top():
    table, rescue, misguid = _planted_table()
    prof = top_traits(table, rescue, misguid)
    flat = next(r for r in prof.rows if r.feature == "flat")
    assert flat.delta == 0.0
    assert not flat.passes_filter
    assert flat.rank == 0


def test_empty_cohort_flags_profile():
    table, rescue, misguid = _planted_table()
    prof = top_traits(table, [], misguid)
    assert prof.flagged
    assert prof.rows == []
    assert prof.top_traits == []


def test_k_caps_top_traits():
    # ten features, every one perfectly separating
    rescue = [(f"r{i}", 2024) for i in range(6)]
    misguid = [(f"m{i}", 2024) for i in range(6)]
    table = {}
    for j in range(10):
        col = {}
        for i, k in enumerate(rescue):
            col[k] = 100.0 + j + i
        for i, k in enumerate(misguid):
            col[k] = float(i)
        table[f"f{j:02d}"] = col
    prof = top_traits(table, rescue, misguid, k=8)
    assert len(prof.top_traits) == 8
    # all deltas tie at +1, so ranking falls to the feature name
    assert [r.feature for r in prof.top_traits] == [f"f{j:02d}" for j in range(8)]
    assert [r.rank for r in prof.top_traits] == list(range(1, 9))


def test_missing_values_dropped_pairwise():
    table, rescue, misguid = _planted_table()
    table["age_now"][rescue[0]] = float("nan")
    table["age_now"][rescue[1]] = float("nan")
    prof = top_traits(table, rescue, misguid)
    row = next(r for r in prof.rows if r.feature == "age_now")
    assert (row.n_r, row.n_m) == (8, 14)
    noise = next(r for r in prof.rows if r.feature == "noise")
    assert (noise.n_r, noise.n_m) == (10, 14)


def test_feature_all_missing_in_one_cohort_is_omitted():
    table, rescue, misguid = _planted_table()
    for k in rescue:
        table["noise"][k] = float("nan")
    prof = top_traits(table, rescue, misguid)
    assert all(r.feature != "noise" for r in prof.rows)


def test_rows_sorted_by_effect_size_then_name():
    table, rescue, misguid = _planted_table()
    prof = top_traits(table, rescue, misguid)
    keys = [(-abs(r.delta), r.feature) for r in prof.rows]
    assert keys == sorted(keys)


# ---------------------------------------------------------------------------
# feature table extraction and CSV
# ---------------------------------------------------------------------------


def test_feature_table_from_dataset():
    ds = tiny_dataset(
        records=[
            make_record("a", 2024, pts=21.0),
            make_record("b", 2024, fg3_pct=float("nan")),
            make_record("c", 2023),
        ]
    )
    table = feature_table_from_dataset(ds, [("a", 2024), ("b", 2024)])
    assert table["pts"][("a", 2024)] == 21.0
    assert math.isnan(table["fg3_pct"][("b", 2024)])
    assert ("c", 2023) not in table["pts"]
    assert "age_now" in table and "round_pick" in table
    assert "team_id" not in table


def test_traits_csv(tmp_path):
    table, rescue, misguid = _planted_table()
    prof = top_traits(table, rescue, misguid, graph_model="g", baseline="weak")
    path = tmp_path / "traits.csv"
    write_traits_csv([prof], path)
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "model,baseline,feature,n_R,n_M,delta,U,p,passes_filter,rank"
    first = lines[1].split(",")
    assert first[:3] == ["g", "weak", "age_now"]
    assert first[8] == "1" and first[9] == "1"
    assert len(lines) == 1 + len(prof.rows)


def test_empty_profile_csv(tmp_path):
    prof = TraitProfile(graph_model="g", baseline="weak", flagged=True)
    path = tmp_path / "traits.csv"
    write_traits_csv([prof], path)
    assert path.read_text().strip().split("\n") == [
        "model,baseline,feature,n_R,n_M,delta,U,p,passes_filter,rank"
    ]
