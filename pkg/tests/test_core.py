import math

import pytest

from relcap.core import (
    DEFAULT_SPLIT,
    Dataset,
    FeatureSchema,
    PlayerSeasonRecord,
    SplitSpec,
    invert_target,
    make_target,
    shared_test_intersection,
    split_by_season,
)
from relcap.errors import ConfigError, DataError, EvaluationError

SCHEMA = FeatureSchema(stat_columns=("pts", "ast"), control_columns=("age_now",))


def rec(pid, season, pts=10.0, ast=3.0, age=25.0, salary=1_000_000.0):
    return PlayerSeasonRecord(
        player_id=pid,
        season=season,
        stats={"pts": pts, "ast": ast},
        controls={"age_now": age},
        meta={"team_id": "T1", "agent_id": "A1"},
        salary_usd=salary,
    )


class TestTarget:
    def test_zero_salary_maps_to_zero(self):
        assert make_target(0.0) == 0.0

    def test_log_target_value(self):
        # oracle: decimal.Decimal(34_000_001).ln() at 50 digits
        assert make_target(34_000_000.0) == pytest.approx(
            17.341871111992199767131125332421357, rel=1e-14
        )

    def test_invert_value(self):
        # oracle: decimal.Decimal(17).exp() - 1 at 50 digits
        assert invert_target(17.0) == pytest.approx(24154951.753575298214775, rel=1e-14)

    def test_round_trip(self):
        for s in [0.0, 1.0, 912.0, 5_849_000.0, 34_000_000.0, 4.8e8]:
            assert invert_target(make_target(s)) == pytest.approx(s, rel=1e-12, abs=1e-9)

    def test_negative_salary_rejected(self):
        with pytest.raises(DataError):
            make_target(-1.0)

    def test_nan_salary_rejected(self):
        with pytest.raises(DataError):
            make_target(float("nan"))

    def test_overflow_guard(self):
        with pytest.raises(DataError):
            invert_target(40.5)
        # 40 exactly is still allowed
        assert invert_target(40.0) > 0


class TestDataset:
    def test_duplicate_key_rejected(self):
        with pytest.raises(DataError, match="duplicate"):
            Dataset([rec("p1", 2020), rec("p1", 2020)], SCHEMA)

    def test_same_player_different_seasons_ok(self):
        ds = Dataset([rec("p1", 2020), rec("p1", 2021)], SCHEMA)
        assert len(ds) == 2
        assert ("p1", 2021) in ds

    def test_schema_conformance_enforced(self):
        bad = PlayerSeasonRecord(
            player_id="p9",
            season=2020,
            stats={"pts": 1.0},  # missing ast
            controls={"age_now": 30.0},
            meta={"team_id": "T1", "agent_id": "A1"},
            salary_usd=0.0,
        )
        with pytest.raises(DataError, match="stat columns"):
            Dataset([bad], SCHEMA)

    def test_nan_stat_is_conformant(self):
        ds = Dataset([rec("p1", 2020, pts=float("nan"))], SCHEMA)
        assert math.isnan(ds[("p1", 2020)].stats["pts"])

    def test_schema_rejects_duplicate_columns(self):
        with pytest.raises(ConfigError):
            FeatureSchema(stat_columns=("pts", "pts"), control_columns=())

    def test_column_order_is_stats_then_controls_then_meta(self):
        names = [name for name, _ in SCHEMA.columns()]
        assert names == ["pts", "ast", "age_now", "team_id", "agent_id"]
        kinds = dict(SCHEMA.columns())
        assert kinds["pts"] == "numeric"
        assert kinds["team_id"] == "categorical"


class TestSplitSpec:
    def test_default_split(self):
        assert DEFAULT_SPLIT.train_seasons == {2020, 2021, 2022}
        assert DEFAULT_SPLIT.val_seasons == {2023}
        assert DEFAULT_SPLIT.test_seasons == {2024}

    def test_overlap_rejected(self):
        with pytest.raises(ConfigError):
            SplitSpec({2020, 2021}, {2021}, {2022})

    def test_train_after_val_rejected(self):
        with pytest.raises(ConfigError):
            SplitSpec({2023}, {2022}, {2024})

    def test_val_after_test_rejected(self):
        with pytest.raises(ConfigError):
            SplitSpec({2020}, {2024}, {2023})

    def test_interleaved_rejected(self):
        # max(train) must precede min(val) even when some train seasons are early
        with pytest.raises(ConfigError):
            SplitSpec({2019, 2023}, {2022}, {2024})

    def test_empty_train_rejected(self):
        with pytest.raises(ConfigError):
            SplitSpec(set(), {2023}, {2024})


class TestSplitBySeason:
    def test_partition_and_drop_count(self):
        ds = Dataset(
            [rec("p1", 2019), rec("p1", 2020), rec("p2", 2021), rec("p1", 2023), rec("p3", 2024)],
            SCHEMA,
        )
        res = split_by_season(ds, DEFAULT_SPLIT)
        assert res.train.keys() == [("p1", 2020), ("p2", 2021)]
        assert res.val.keys() == [("p1", 2023)]
        assert res.test.keys() == [("p3", 2024)]
        assert res.dropped == 1  # the 2019 season is in no bucket

    def test_tuple_unpacking(self):
        ds = Dataset([rec("p1", 2020), rec("p1", 2024)], SCHEMA)
        train, val, test = split_by_season(ds, DEFAULT_SPLIT)
        assert len(train) == 1 and len(val) == 0 and len(test) == 1


class TestSharedIntersection:
    class FakeSet:
        def __init__(self, label, keys):
            self.label = label
            self._keys = keys

        def keys(self):
            return list(self._keys)

    def test_intersection_sorted(self):
        a = self.FakeSet("a", [("p2", 2024), ("p1", 2024)])
        b = self.FakeSet("b", [("p1", 2024), ("p2", 2024), ("p3", 2024)])
        assert shared_test_intersection([a, b]) == [("p1", 2024), ("p2", 2024)]

    def test_plain_iterables_accepted(self):
        assert shared_test_intersection([[("p1", 2024)], {("p1", 2024)}]) == [("p1", 2024)]

    def test_empty_intersection_is_error_with_coverage(self):
        a = self.FakeSet("alpha", [("p1", 2024)])
        b = self.FakeSet("beta", [("p2", 2024)])
        with pytest.raises(EvaluationError, match="alpha=1.*beta=1"):
            shared_test_intersection([a, b])
