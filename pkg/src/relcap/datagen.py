"""Synthetic league generator with known latent structure, plus CSV ingestion.

The generator builds a small league whose salary process is known exactly:

  * rookie-scale players are priced by a rule, a step function of draft pick
    with an age escalator. No noise, no latent effects. Their salaries are
    reconstructible from (overall_pick, age_now) alone.
  * veterans are priced off their (quantized, stored) box-score stats plus
    three latent channels: per-agent quality, per-team premium, and a
    social-capital term held only by declining-legacy players.
  * breakout players' stats jump one season before their salary does, so a
    stats-only model is systematically early on them.
  * declining-legacy players earn more than their stats justify; the surplus
    is proportional to their (latent) award count, and they are routed toward
    top-tier agents so the premium is visible in the relational structure but
    not in any numeric column.

Everything latent is recorded in LatentTruth, which is written to its own
JSON file and never enters any model-visible table.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .core import Dataset, FeatureSchema, PlayerSeasonRecord, invert_target
from .errors import ConfigError, DataError

STAT_COLUMNS = ("gp", "min", "pts", "reb", "ast", "stl", "blk", "tov", "fg_pct", "fg3_pct", "ft_pct", "per")
CONTROL_COLUMNS = ("age_now", "draft_year", "overall_pick", "round_pick", "years_since_draft")
META_COLUMNS = ("team_id", "agent_id")

SCHEMA = FeatureSchema(stat_columns=STAT_COLUMNS, control_columns=CONTROL_COLUMNS, meta_columns=META_COLUMNS)

INJURY_TYPES = ("acl_tear", "ankle_sprain", "hamstring_strain", "back_spasms", "knee_soreness", "foot_fracture")
AWARD_NAMES = ("league_mvp", "finals_mvp", "all_league_team", "defensive_poy")

# Log-salary anchors for the rookie pay rule: lottery, rest of first round,
# second round. Dollar values ~ $2.2M / $1.5M / $1.1M before the age escalator;
# the whole band sits below the veteran mid-range so scale contracts read as
# cheap years regardless of production.
_ROOKIE_STEPS = (14.6, 14.2, 13.9)
_ROOKIE_AGE_ESCALATOR = 0.04

# Veteran pricing: log-salary = base + slope * production(stats), clipped.
_VET_BASE = 13.32
_VET_SLOPE = 0.82
_VET_LOG_FLOOR = 13.71  # ~$0.9M minimum contract
_VET_LOG_CAP = 17.77    # ~$52M supermax

_PROD_WEIGHTS = {
    "pts": 0.085,
    "ast": 0.05,
    "reb": 0.045,
    "stl": 0.12,
    "blk": 0.10,
    "tov": -0.05,
    "min": 0.02,
    "per": 0.04,
}


@dataclass(frozen=True)
class LeagueConfig:
    """Knobs for the synthetic league.

    breakout_rate and decline_rate are per-season trigger probabilities: each
    season, an eligible veteran flips into that trajectory with the given
    probability (first trigger wins, the class then sticks).
    """

    n_players: int = 240
    n_teams: int = 30
    n_agents: int = 40
    seasons: tuple[int, ...] = (2019, 2020, 2021, 2022, 2023, 2024)
    rookie_rate: float = 0.06
    agent_quality_effect: float = 0.40
    team_premium_effect: float = 0.25
    veteran_capital_effect: float = 0.5
    noise_sd: float = 0.08
    breakout_rate: float = 0.05
    decline_rate: float = 0.04
    seed: int = 7

    def __post_init__(self) -> None:
        for name in ("n_players", "n_teams", "n_agents"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        for name in ("rookie_rate", "breakout_rate", "decline_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1], got {v}")
        if self.noise_sd < 0:
            raise ConfigError(f"noise_sd must be >= 0, got {self.noise_sd}")
        ss = self.seasons
        if len(ss) < 2 or any(b - a != 1 for a, b in zip(ss, ss[1:])):
            raise ConfigError("seasons must be a contiguous ascending run of >= 2 years")

    @property
    def rookies_per_season(self) -> int:
        return int(round(self.rookie_rate * self.n_players))


@dataclass
class LatentTruth:
    """Ground truth the models never see; only tests and audits read this."""

    agent_quality: dict[str, float] = field(default_factory=dict)
    team_premium: dict[str, float] = field(default_factory=dict)
    trajectory_class: dict[str, str] = field(default_factory=dict)
    social_capital: dict[str, float] = field(default_factory=dict)
    breakout_season: dict[str, int] = field(default_factory=dict)
    decline_season: dict[str, int] = field(default_factory=dict)


@dataclass
class ValidationReport:
    """Invariant violations found in a dataset; empty means clean."""

    violations: list[tuple[str, str]] = field(default_factory=list)

    def add(self, kind: str, message: str) -> None:
        self.violations.append((kind, message))

    @property
    def is_clean(self) -> bool:
        return not self.violations

    def counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for kind, _ in self.violations:
            out[kind] = out.get(kind, 0) + 1
        return out


def rookie_log_salary(overall_pick: float, age_now: float) -> float:
    """The rookie pay rule: step in draft pick, linear escalator in age.

    Depends on nothing else by design; the cold-start acceptance check leans
    on this being exactly reconstructible from two control columns.
    """
    if overall_pick <= 14:
        base = _ROOKIE_STEPS[0]
    elif overall_pick <= 30:
        base = _ROOKIE_STEPS[1]
    else:
        base = _ROOKIE_STEPS[2]
    return base + _ROOKIE_AGE_ESCALATOR * (age_now - 19.0)


def production_score(stats: dict[str, float]) -> float:
    """Linear box-score production index over the stored (quantized) stats."""
    return sum(w * stats[name] for name, w in _PROD_WEIGHTS.items())


def veteran_log_salary(
    stats: dict[str, float],
    agent_quality: float,
    team_premium: float,
    social_capital: float,
    config: LeagueConfig,
    noise: float = 0.0,
) -> float:
    """Veteran pricing: stats production plus the three latent channels."""
    y = _VET_BASE + _VET_SLOPE * production_score(stats)
    y += config.agent_quality_effect * agent_quality
    y += config.team_premium_effect * team_premium
    y += config.veteran_capital_effect * social_capital
    y += config.noise_sd * noise
    return min(max(y, _VET_LOG_FLOOR), _VET_LOG_CAP)


def _salary_dollars(y_log: float) -> float:
    return float(int(round(invert_target(y_log))))


def _quant(x: float, digits: int) -> float:
    return float(np.round(x, digits))


def _age_curve(age: float) -> float:
    return -0.004 * (age - 27.0) ** 2


@dataclass
class _Player:
    pid: str
    draft_age: int
    draft_year: int
    overall_pick: int
    ability: float
    reb_prof: float
    ast_prof: float
    def_prof: float
    shoot_prof: float
    first_season: int
    last_season: int
    klass: str = "steady"
    trigger_season: int | None = None
    capital: float = 0.0
    agent: str = ""
    teams: dict[int, str] = field(default_factory=dict)
    agents: dict[int, str] = field(default_factory=dict)


def _gen_stats(rng: np.random.Generator, eff: float, pl: _Player) -> dict[str, float]:
    """One season of box-score stats at effective ability eff (quantized)."""
    n = rng.normal(size=10)
    stats = {
        "gp": float(int(np.clip(round(70 + 4 * n[0]), 30, 82))),
        "min": _quant(np.clip(24 + 5 * eff + 1.2 * n[1], 8, 40), 1),
        "pts": _quant(np.clip(14 + 6.5 * eff + 1.3 * n[2], 1, 40), 1),
        "reb": _quant(np.clip(6 + 2.2 * pl.reb_prof + 0.8 * eff + 0.5 * n[3], 0.5, 16), 1),
        "ast": _quant(np.clip(4 + 2.0 * pl.ast_prof + 0.7 * eff + 0.4 * n[4], 0.3, 12), 1),
        "stl": _quant(np.clip(0.9 + 0.35 * eff + 0.25 * n[5], 0.1, 3), 1),
        "blk": _quant(np.clip(0.7 + 0.3 * pl.def_prof + 0.2 * eff + 0.2 * n[6], 0.0, 3.5), 1),
        "tov": _quant(np.clip(1.5 + 0.4 * eff + 0.3 * n[7], 0.3, 5.5), 1),
        "fg_pct": _quant(np.clip(0.46 + 0.02 * eff + 0.02 * n[8], 0.35, 0.65), 3),
        "ft_pct": _quant(np.clip(0.78 + 0.03 * pl.shoot_prof + 0.02 * n[9], 0.5, 0.95), 3),
    }
    # Low-volume shooters report no three-point percentage; keeps the
    # imputation path exercised on synthetic data.
    if rng.random() < 0.05:
        stats["fg3_pct"] = float("nan")
    else:
        stats["fg3_pct"] = _quant(np.clip(0.35 + 0.02 * pl.shoot_prof + 0.015 * rng.normal(), 0.2, 0.5), 3)
    stats["per"] = _quant(np.clip(15 + 4.5 * eff + 0.8 * rng.normal(), 5, 35), 1)
    return {name: stats[name] for name in STAT_COLUMNS}


def generate_league(config: LeagueConfig) -> tuple[Dataset, LatentTruth]:
    """Build the synthetic league. Pure function of config (seed included)."""
    rng = np.random.default_rng(np.random.SeedSequence(config.seed))
    seasons = config.seasons
    s0, s1 = seasons[0], seasons[-1]
    n_rk = config.rookies_per_season
    n_entrants = n_rk * len(seasons)
    if n_entrants >= config.n_players:
        raise ConfigError(
            f"infeasible config: {n_entrants} rookie entrants >= {config.n_players} players"
        )
    n_vets = config.n_players - n_entrants
    pad = len(str(config.n_players))

    teams = [f"t{i + 1:02d}" for i in range(config.n_teams)]
    agents = [f"a{i + 1:02d}" for i in range(config.n_agents)]
    truth = LatentTruth(
        agent_quality={a: float(rng.normal()) for a in agents},
        team_premium={t: float(rng.normal()) for t in teams},
    )
    top_agents = sorted(agents, key=lambda a: truth.agent_quality[a], reverse=True)
    top_agents = top_agents[: max(1, len(agents) // 3)]

    players: list[_Player] = []
    next_id = 1

    def new_player(first_season: int, is_vet: bool) -> _Player:
        nonlocal next_id
        pid = f"p{next_id:0{pad}d}"
        next_id += 1
        # Entrants are draft-age; the initial veteran pool spans wider.
        draft_age = int(rng.integers(19, 27 if is_vet else 23))
        if is_vet:
            ysd0 = int(rng.integers(4, min(11, 33 - draft_age) + 1))
            draft_year = s0 - ysd0
            ability = float(np.clip(rng.normal(0.0, 1.0), -2.5, 2.5))
        else:
            draft_year = first_season
            ability = float(np.clip(rng.normal(-0.5, 0.8), -2.5, 2.5))
        return _Player(
            pid=pid,
            draft_age=draft_age,
            draft_year=draft_year,
            overall_pick=int(rng.integers(1, 61)),
            ability=ability,
            reb_prof=float(rng.normal()),
            ast_prof=float(rng.normal()),
            def_prof=float(rng.normal()),
            shoot_prof=float(rng.normal()),
            first_season=first_season,
            last_season=s1 if is_vet else min(s1, first_season + 3),
        )

    for _ in range(n_vets):
        players.append(new_player(s0, is_vet=True))
    for season in seasons:
        for _ in range(n_rk):
            pl = new_player(season, is_vet=False)
            pl.klass = "rookie-scale"
            players.append(pl)

    # Trajectory triggers for veterans: walk the seasons, first trigger wins.
    for pl in players:
        if pl.klass == "rookie-scale":
            truth.trajectory_class[pl.pid] = pl.klass
            continue
        for season in seasons:
            age = pl.draft_age + (season - pl.draft_year)
            if age >= 31 and rng.random() < config.decline_rate:
                pl.klass = "declining-legacy"
                pl.trigger_season = season
                break
            if age <= 29 and season > s0 and rng.random() < config.breakout_rate:
                pl.klass = "breakout"
                pl.trigger_season = season
                break
        truth.trajectory_class[pl.pid] = pl.klass
        if pl.klass == "breakout":
            truth.breakout_season[pl.pid] = pl.trigger_season
        elif pl.klass == "declining-legacy":
            truth.decline_season[pl.pid] = pl.trigger_season

    # Award history and social capital for declining-legacy players. Awards
    # predate the trigger season so the premium reads as accumulated stature.
    awards: list[tuple[str, int, str]] = []
    for pl in players:
        if pl.klass != "declining-legacy":
            truth.social_capital[pl.pid] = 0.0
            continue
        lo = max(s0 - 5, pl.draft_year + 1)
        hi = pl.trigger_season - 1
        span = list(range(lo, hi + 1))
        want = 1 + int(min(3, rng.poisson(1.2)))
        take = min(want, len(span))
        if take == 0:
            span, take = [pl.trigger_season - 1], 1
        won = sorted(rng.choice(span, size=take, replace=False).tolist())
        for season_awarded in won:
            awards.append((pl.pid, int(season_awarded), str(rng.choice(AWARD_NAMES))))
        pl.capital = 0.35 + 0.3 * take
        truth.social_capital[pl.pid] = pl.capital

    # Affiliations: agents are sticky, teams churn. Declining-legacy players
    # are routed to top-tier agents so stature is visible relationally.
    for pl in players:
        if pl.klass == "declining-legacy" and rng.random() < 0.75:
            agent = str(rng.choice(top_agents))
        else:
            agent = str(rng.choice(agents))
        team = str(rng.choice(teams))
        for season in range(pl.first_season, pl.last_season + 1):
            if season > pl.first_season:
                if rng.random() < 0.18:
                    team = str(rng.choice(teams))
                if rng.random() < 0.05:
                    agent = str(rng.choice(agents))
            pl.teams[season] = team
            pl.agents[season] = agent

    # Stats and salaries, season by season.
    records: list[PlayerSeasonRecord] = []
    for pl in players:
        for season in range(pl.first_season, pl.last_season + 1):
            ysd = season - pl.draft_year
            age = pl.draft_age + ysd
            # young players ramp toward their veteran production level
            eff = pl.ability + _age_curve(age) - 0.35 * max(0, 3 - ysd)
            if pl.klass == "declining-legacy" and pl.trigger_season is not None and season >= pl.trigger_season:
                eff -= 0.18 * (season - pl.trigger_season + 1)
            bumped = (
                pl.klass == "breakout"
                and pl.trigger_season is not None
                and season >= pl.trigger_season
            )
            # Stat noise is drawn once; the breakout shadow (pre-jump stats
            # used to price the jump season) reuses the same draws.
            stat_rng_state = rng.bit_generator.state
            stats = _gen_stats(rng, eff + (1.2 if bumped else 0.0), pl)
            if bumped and season == pl.trigger_season:
                rng.bit_generator.state = stat_rng_state
                shadow = _gen_stats(rng, eff, pl)
                priced_stats = shadow
            else:
                priced_stats = stats

            if pl.klass == "rookie-scale":
                y = rookie_log_salary(pl.overall_pick, age)
            else:
                y = veteran_log_salary(
                    priced_stats,
                    truth.agent_quality[pl.agents[season]],
                    truth.team_premium[pl.teams[season]],
                    pl.capital,
                    config,
                    noise=float(rng.normal()) if config.noise_sd > 0 else 0.0,
                )
            records.append(
                PlayerSeasonRecord(
                    player_id=pl.pid,
                    season=season,
                    stats=stats,
                    controls={
                        "age_now": float(age),
                        "draft_year": float(pl.draft_year),
                        "overall_pick": float(pl.overall_pick),
                        "round_pick": 1.0 if pl.overall_pick <= 30 else 2.0,
                        "years_since_draft": float(ysd),
                    },
                    meta={"team_id": pl.teams[season], "agent_id": pl.agents[season]},
                    salary_usd=_salary_dollars(y),
                    is_synthetic=True,
                )
            )

    # In-window hardware: the top two scorers of each season.
    by_season: dict[int, list[PlayerSeasonRecord]] = {}
    for rec in records:
        by_season.setdefault(rec.season, []).append(rec)
    for season in seasons:
        ranked = sorted(by_season.get(season, []), key=lambda r: (-r.stats["pts"], r.player_id))
        for rec in ranked[:2]:
            awards.append((rec.player_id, season, "all_league_team"))

    injuries: list[tuple[str, int, str, int]] = []
    for pl in players:
        for season in range(pl.first_season, pl.last_season + 1):
            if rng.random() < 0.08:
                injuries.append(
                    (pl.pid, season, str(rng.choice(INJURY_TYPES)), int(rng.integers(3, 41)))
                )

    records.sort(key=lambda r: r.key)
    awards.sort()
    injuries.sort()
    dataset = Dataset(
        records,
        SCHEMA,
        awards=awards,
        injuries=injuries,
        rosters={"team_id": set(teams), "agent_id": set(agents)},
    )
    return dataset, truth


# ---------------------------------------------------------------------------
# CSV layout
# ---------------------------------------------------------------------------

_FILES = ("player_seasons.csv", "salaries.csv", "affiliations.csv", "awards.csv", "injuries.csv")


def _fmt(x: float) -> str:
    if isinstance(x, float) and math.isnan(x):
        return ""
    if float(x).is_integer():
        return str(int(x))
    return repr(float(x))


def write_csv(dataset: Dataset, out_dir: str | Path, truth: LatentTruth | None = None) -> Path:
    """Write the five-file layout (plus latent_truth.json for synthetic data)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    recs = sorted(dataset.records, key=lambda r: r.key)

    with open(out / "player_seasons.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["player_id", "season", *dataset.schema.stat_columns, *dataset.schema.control_columns])
        for r in recs:
            w.writerow(
                [r.player_id, r.season]
                + [_fmt(r.stats[c]) for c in dataset.schema.stat_columns]
                + [_fmt(r.controls[c]) for c in dataset.schema.control_columns]
            )
    with open(out / "salaries.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["player_id", "season", "salary_usd"])
        for r in recs:
            w.writerow([r.player_id, r.season, _fmt(r.salary_usd)])
    with open(out / "affiliations.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["player_id", "season", "team_id", "agent_id"])
        for r in recs:
            w.writerow([r.player_id, r.season, r.meta["team_id"], r.meta["agent_id"]])
    with open(out / "awards.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["player_id", "season_awarded", "award_name"])
        for row in sorted(dataset.awards):
            w.writerow(row)
    with open(out / "injuries.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["player_id", "season_of_injury", "injury_type", "games_missed"])
        for row in sorted(dataset.injuries):
            w.writerow(row)
    if truth is not None:
        with open(out / "latent_truth.json", "w") as fh:
            json.dump(asdict(truth), fh, indent=2, sort_keys=True)
    return out


def _parse_float(text: str, file: str, line_no: int, column: str) -> float:
    if text == "":
        return float("nan")
    try:
        return float(text)
    except ValueError:
        raise DataError(f"{file}:{line_no}: unparseable number {text!r} in column {column}") from None


def _read_rows(path: Path) -> tuple[list[str], list[tuple[int, list[str]]]]:
    if not path.exists():
        raise DataError(f"missing required file: {path.name}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path.name}: empty file") from None
        return header, [(i, row) for i, row in enumerate(reader, start=2) if row]


def load_csv(data_dir: str | Path) -> Dataset:
    """Load the five-file layout back into a Dataset.

    Schema is inferred from player_seasons.csv headers: the known control
    columns are tagged as controls, everything else between the key columns
    and the controls is a stat.
    """
    d = Path(data_dir)
    ps_header, ps_rows = _read_rows(d / "player_seasons.csv")
    if ps_header[:2] != ["player_id", "season"]:
        raise DataError("player_seasons.csv must start with player_id, season")
    feature_cols = ps_header[2:]
    stat_cols = tuple(c for c in feature_cols if c not in CONTROL_COLUMNS)
    ctrl_cols = tuple(c for c in feature_cols if c in CONTROL_COLUMNS)
    schema = FeatureSchema(stat_columns=stat_cols, control_columns=ctrl_cols, meta_columns=META_COLUMNS)

    features: dict[tuple[str, int], tuple[dict, dict]] = {}
    for line_no, row in ps_rows:
        pid, season = row[0], int(row[1])
        if (pid, season) in features:
            raise DataError(f"player_seasons.csv:{line_no}: duplicate (player_id, season) ({pid}, {season})")
        vals = {c: _parse_float(v, "player_seasons.csv", line_no, c) for c, v in zip(feature_cols, row[2:])}
        features[(pid, season)] = (
            {c: vals[c] for c in stat_cols},
            {c: vals[c] for c in ctrl_cols},
        )

    sal_header, sal_rows = _read_rows(d / "salaries.csv")
    if "salary_usd" not in sal_header:
        raise DataError("salaries.csv: missing salary column `salary_usd`")
    salaries: dict[tuple[str, int], float] = {}
    for line_no, row in sal_rows:
        key = (row[0], int(row[1]))
        if key in salaries:
            raise DataError(f"salaries.csv:{line_no}: duplicate (player_id, season) {key}")
        salaries[key] = _parse_float(row[2], "salaries.csv", line_no, "salary_usd")

    aff_header, aff_rows = _read_rows(d / "affiliations.csv")
    affiliations: dict[tuple[str, int], tuple[str, str]] = {}
    for line_no, row in aff_rows:
        key = (row[0], int(row[1]))
        if key in affiliations:
            raise DataError(f"affiliations.csv:{line_no}: duplicate (player_id, season) {key}")
        affiliations[key] = (row[2], row[3])

    _, award_rows = _read_rows(d / "awards.csv")
    awards = [(row[0], int(row[1]), row[2]) for _, row in award_rows]
    _, injury_rows = _read_rows(d / "injuries.csv")
    injuries = [(row[0], int(row[1]), row[2], int(row[3])) for _, row in injury_rows]

    rosters = None
    truth_path = d / "latent_truth.json"
    if truth_path.exists():
        with open(truth_path) as fh:
            blob = json.load(fh)
        rosters = {
            "team_id": set(blob.get("team_premium", {})),
            "agent_id": set(blob.get("agent_quality", {})),
        }

    records = []
    for key in sorted(features):
        if key not in salaries:
            raise DataError(f"salaries.csv: no salary row for {key}")
        if key not in affiliations:
            raise DataError(f"affiliations.csv: no affiliation row for {key}")
        stats, controls = features[key]
        team, agent = affiliations[key]
        records.append(
            PlayerSeasonRecord(
                player_id=key[0],
                season=key[1],
                stats=stats,
                controls=controls,
                meta={"team_id": team, "agent_id": agent},
                salary_usd=salaries[key],
                is_synthetic=truth_path.exists(),
            )
        )
    return Dataset(records, schema, awards=sorted(awards), injuries=sorted(injuries), rosters=rosters)


def validate(dataset: Dataset) -> ValidationReport:
    """Report invariant violations without mutating or raising.

    Checks: negative salaries, years_since_draft consistency (when both
    columns exist), and orphan team/agent references (when rosters are known).
    """
    report = ValidationReport()
    has_ysd = (
        "years_since_draft" in dataset.schema.control_columns
        and "draft_year" in dataset.schema.control_columns
    )
    for rec in dataset:
        if rec.salary_usd < 0:
            report.add("negative_salary", f"{rec.key}: salary {rec.salary_usd}")
        if has_ysd:
            ysd = rec.controls["years_since_draft"]
            dy = rec.controls["draft_year"]
            if not (math.isnan(ysd) or math.isnan(dy)) and ysd != rec.season - dy:
                report.add(
                    "inconsistent_years_since_draft",
                    f"{rec.key}: years_since_draft {ysd} != season {rec.season} - draft_year {int(dy)}",
                )
        if dataset.rosters:
            for col in ("team_id", "agent_id"):
                known = dataset.rosters.get(col)
                if known is not None and rec.meta[col] not in known:
                    report.add("orphan_id", f"{rec.key}: {col} {rec.meta[col]!r} not in roster")
    return report
