"""Command-line front end: generate leagues, run the model suite, reformat
run artifacts into reports, and validate data directories.

Batch-oriented by design. Every artifact is reproducible from the flags that
produced it: randomness flows from --seed (league generation) and the fixed
suite seeds (model training), never from the clock. RELCAP_THREADS bounds the
fitting thread pool; it changes wall time, not results.

Exit codes: 0 success, 2 usage or configuration error, 3 data error,
4 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .core import DEFAULT_SPLIT, Dataset, shared_test_intersection, split_by_season
from .datagen import LeagueConfig, generate_league, load_csv, validate, write_csv
from .errors import (
    ConfigError,
    DataError,
    EvaluationError,
    LeakageError,
    NumericError,
    RelcapError,
)
from .evaluate import (
    MISGUIDANCE,
    NEUTRAL,
    RESCUE,
    TriStateReport,
    cold_start_subset,
    compute_tau,
    r2,
    rmse,
    select_cases,
    tri_state_report,
    write_cases_csv,
    write_metrics_csv,
    write_tri_state_csv,
)
from .pipeline import (
    CONFIG_NAMES,
    REGRESSORS,
    SUITE_SEEDS,
    ModelConfig,
    baseline_residual_pool,
    run_suite,
    write_manifest,
)
from .profiling import feature_table_from_dataset, top_traits, write_traits_csv

BASELINE_NAMES = ("weak_baseline", "strong_baseline")

# Lowercase state names double as the rate-column prefixes in tri_state.csv.
_TRI_STATES = ("rescue", "neutral", "misguidance")

# Outlier features mirrored into the scatter plot data. Both are control
# columns, so they exist for every record.
_SCATTER_FEATURES = ("age_now", "years_since_draft")

_RUN_ARTIFACTS = (
    "manifest.json",
    "run.json",
    "metrics.csv",
    "tri_state.csv",
    "cases.csv",
    "traits.csv",
    "outliers.csv",
)


# ---------------------------------------------------------------------------
# configuration plumbing
# ---------------------------------------------------------------------------

# CLI destination -> LeagueConfig field. Season bounds are handled separately
# because the dataclass wants the expanded tuple.
_LEAGUE_FIELDS = {
    "players": "n_players",
    "teams": "n_teams",
    "agents": "n_agents",
    "rookie_rate": "rookie_rate",
    "agent_quality_effect": "agent_quality_effect",
    "team_premium_effect": "team_premium_effect",
    "veteran_capital_effect": "veteran_capital_effect",
    "noise_sd": "noise_sd",
    "breakout_rate": "breakout_rate",
    "decline_rate": "decline_rate",
    "seed": "seed",
}

_LEAGUE_KEYS = frozenset(_LEAGUE_FIELDS) | {"start_season", "end_season"}
_RUN_KEYS = frozenset({"models", "seeds", "emit"})


def _load_config_file(path: str | None, allowed: frozenset[str]) -> dict:
    """Optional JSON config file; explicit flags always win over its values."""
    if path is None:
        return {}
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    try:
        payload = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {p} is not valid JSON: {exc}") from None
    if not isinstance(payload, dict):
        raise ConfigError(f"config file {p} must hold a JSON object")
    unknown = sorted(set(payload) - set(allowed))
    if unknown:
        raise ConfigError(f"config file {p} has unknown keys: {', '.join(unknown)}")
    return payload


def _setting(args: argparse.Namespace, file_cfg: dict, name: str):
    flag = getattr(args, name, None)
    if flag is not None:
        return flag
    return file_cfg.get(name)


def _league_config(args: argparse.Namespace, file_cfg: dict) -> LeagueConfig:
    kwargs = {}
    for dest, field in _LEAGUE_FIELDS.items():
        value = _setting(args, file_cfg, dest)
        if value is not None:
            kwargs[field] = value
    start = _setting(args, file_cfg, "start_season")
    end = _setting(args, file_cfg, "end_season")
    if (start is None) != (end is None):
        raise ConfigError("--start-season and --end-season must be given together")
    if start is not None:
        if end < start:
            raise ConfigError(f"season range is backwards: {start}..{end}")
        kwargs["seasons"] = tuple(range(start, end + 1))
    return LeagueConfig(**kwargs)


def _as_list(value) -> list[str] | None:
    """Accept a comma-separated flag string or a JSON list from a config file."""
    if value is None:
        return None
    if isinstance(value, str):
        items = [part.strip() for part in value.split(",") if part.strip()]
    elif isinstance(value, (list, tuple)):
        items = [str(part) for part in value]
    else:
        raise ConfigError(f"expected a list or comma-separated string, got {value!r}")
    if not items:
        raise ConfigError(f"empty list value: {value!r}")
    return items


def _fingerprint_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _read_csv_rows(path: Path) -> list[dict]:
    """Read one of our CSV artifacts, skipping provenance comment lines."""
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return [dict(row) for row in csv.DictReader(lines)]


# ---------------------------------------------------------------------------
# generate
# ---------------------------------------------------------------------------


def cmd_generate(args: argparse.Namespace) -> int:
    file_cfg = _load_config_file(args.config, _LEAGUE_KEYS)
    config = _league_config(args, file_cfg)
    dataset, truth = generate_league(config)
    out = Path(args.out)
    write_csv(dataset, out, truth)
    written = (
        "player_seasons.csv",
        "salaries.csv",
        "affiliations.csv",
        "awards.csv",
        "injuries.csv",
        "latent_truth.json",
    )
    payload = {
        "league_config": dataclasses.asdict(config),
        "dataset_fingerprint": dataset.fingerprint(),
        "tool_version": __version__,
        "files": {name: _fingerprint_file(out / name) for name in written},
    }
    with open(out / "config.json", "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(
        f"wrote {len(dataset.records)} player-seasons"
        f" ({config.n_players} players, seasons {config.seasons[0]}-{config.seasons[-1]})"
        f" to {out}"
    )
    print(f"dataset fingerprint: {dataset.fingerprint()}")
    return 0


# ---------------------------------------------------------------------------
# validate
# ---------------------------------------------------------------------------


def cmd_validate(args: argparse.Namespace) -> int:
    dataset = load_csv(args.data)
    report = validate(dataset)
    print(f"loaded {len(dataset.records)} player-seasons from {args.data}")
    if report.is_clean:
        print("ok: no violations")
        return 0
    print(f"{len(report.violations)} violation(s):", file=sys.stderr)
    for kind, count in sorted(report.counts().items()):
        print(f"  {kind}: {count}", file=sys.stderr)
    for violation in report.violations:
        print(f"  {violation}", file=sys.stderr)
    raise DataError(f"dataset at {args.data} failed validation")


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------


def _resolve_run_inputs(args: argparse.Namespace):
    file_cfg = _load_config_file(args.config, _LEAGUE_KEYS | _RUN_KEYS)
    if args.data and args.generate:
        raise ConfigError("--data and --generate are mutually exclusive")
    if args.data:
        dataset = load_csv(args.data)
        source = {"kind": "load", "path": str(args.data)}
    elif args.generate:
        league = _league_config(args, file_cfg)
        dataset, _ = generate_league(league)
        source = {"kind": "generate", "league_config": dataclasses.asdict(league)}
    else:
        raise ConfigError("choose a data source: --data DIR or --generate")

    models = _as_list(args.models) or _as_list(file_cfg.get("models")) or list(CONFIG_NAMES)
    unknown = sorted(set(models) - set(CONFIG_NAMES))
    if unknown:
        raise ConfigError(f"unknown model(s): {', '.join(unknown)}")

    raw_seeds = _as_list(args.seeds) or _as_list(file_cfg.get("seeds"))
    if raw_seeds is None:
        seeds = list(SUITE_SEEDS)
    else:
        try:
            seeds = [int(s) for s in raw_seeds]
        except ValueError:
            raise ConfigError(f"seeds must be integers, got {raw_seeds!r}") from None
    if len(set(seeds)) != len(seeds):
        raise ConfigError(f"duplicate seeds: {seeds}")

    emit = set(_as_list(args.emit) or _as_list(file_cfg.get("emit")) or ["csv"])
    bad = sorted(emit - {"csv", "json", "plotdata"})
    if bad:
        raise ConfigError(f"unknown emit flag(s): {', '.join(bad)} (expected csv, json, plotdata)")
    return dataset, source, models, seeds, emit


def _seed_mean_metric_rows(prediction_sets, models, seeds, shared, cold) -> list[dict]:
    by_run = {(ps.model, ps.regressor, ps.seed): ps for ps in prediction_sets}
    rows = []
    for name in models:
        for reg in REGRESSORS:
            rmses, r2s, colds = [], [], []
            for seed in seeds:
                sub = by_run[(name, reg, seed)].subset(shared)
                truth, pred = sub.y_true_dollars, sub.y_pred_dollars
                rmses.append(rmse(truth, pred))
                r2s.append(r2(truth, pred))
                if len(cold) >= 3:
                    cs = by_run[(name, reg, seed)].subset(cold)
                    try:
                        colds.append(r2(cs.y_true_dollars, cs.y_pred_dollars))
                    except EvaluationError:
                        pass
            rows.append(
                {
                    "model": name,
                    "regressor": reg,
                    "rmse_dollars": float(np.mean(rmses)),
                    "r2": float(np.mean(r2s)),
                    "cold_start_r2": float(np.mean(colds)) if colds else float("nan"),
                    "n_test": len(shared),
                    "n_cold_start": len(cold),
                    "n_seeds": len(seeds),
                }
            )
    return rows


def cmd_run(args: argparse.Namespace) -> int:
    dataset, source, models, seeds, emit = _resolve_run_inputs(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    def progress(config, seed):
        print(f"  trained {config.label} seed {seed}")

    try:
        suite = run_suite(dataset, config_names=models, seeds=seeds, progress=progress)
    except RelcapError as exc:
        partial = getattr(exc, "partial_manifest", None)
        if partial is not None:
            partial["tool_version"] = __version__
            write_manifest(partial, out / "manifest.json")
            print(f"suite failed; partial manifest written to {out / 'manifest.json'}", file=sys.stderr)
        raise

    manifest = suite.manifest
    manifest["tool_version"] = __version__
    write_manifest(manifest, out / "manifest.json")

    suite_hash = hashlib.sha256(
        json.dumps(manifest["config_hashes"], sort_keys=True).encode()
    ).hexdigest()
    # alphabetical keys so the same line survives a round trip through the
    # sorted run.json when report re-derives plot data
    meta = {
        "config": suite_hash,
        "dataset": dataset.fingerprint(),
        "tool": f"relcap-{__version__}",
    }

    shared = shared_test_intersection(suite.prediction_sets)
    parts = split_by_season(dataset, DEFAULT_SPLIT)
    cold = sorted(cold_start_subset(shared, sorted(parts.train.keys())))

    rows = _seed_mean_metric_rows(suite.prediction_sets, models, seeds, shared, cold)
    write_metrics_csv(rows, out / "metrics.csv", meta=meta)

    # Tri-state audit: every graph model against every baseline present in
    # the run, with per-(regressor, seed) thresholds calibrated on that
    # baseline's train+val residuals, then pooled into one row per pairing.
    baselines = [b for b in BASELINE_NAMES if b in models]
    graph_models = [m for m in models if m not in BASELINE_NAMES]
    by_run = {(ps.model, ps.regressor, ps.seed): ps for ps in suite.prediction_sets}
    lead_seed, lead_reg = seeds[0], REGRESSORS[0]

    taus = {}
    for base in baselines:
        for reg in REGRESSORS:
            for seed in seeds:
                pool = baseline_residual_pool(dataset, ModelConfig(base, reg), seed=seed)
                taus[(base, reg, seed)] = compute_tau(pool)

    pooled_reports: list[TriStateReport] = []
    lead_reports: dict[tuple[str, str], TriStateReport] = {}
    for model in graph_models:
        for base in baselines:
            counts = {"eligible": 0, RESCUE: 0, NEUTRAL: 0, MISGUIDANCE: 0}
            component_taus = []
            for reg in REGRESSORS:
                for seed in seeds:
                    base_ps = by_run[(base, reg, seed)].subset(shared)
                    graph_ps = by_run[(model, reg, seed)].subset(shared)
                    report = tri_state_report(
                        base_ps.true_dollars_by_key(),
                        base_ps.pred_dollars_by_key(),
                        graph_ps.pred_dollars_by_key(),
                        tau=taus[(base, reg, seed)],
                        baseline=base,
                        graph_model=model,
                    )
                    counts["eligible"] += report.eligible_count
                    counts[RESCUE] += report.rescue_count
                    counts[NEUTRAL] += report.neutral_count
                    counts[MISGUIDANCE] += report.misguidance_count
                    component_taus.append(report.tau)
                    if (reg, seed) == (lead_reg, lead_seed):
                        lead_reports[(model, base)] = report
            pooled_reports.append(
                TriStateReport(
                    baseline=base,
                    graph_model=model,
                    tau=float(np.mean(component_taus)),
                    eligible_count=counts["eligible"],
                    rescue_count=counts[RESCUE],
                    neutral_count=counts[NEUTRAL],
                    misguidance_count=counts[MISGUIDANCE],
                    flagged=counts["eligible"] == 0,
                )
            )
    write_tri_state_csv(pooled_reports, out / "tri_state.csv", meta=meta)

    case_rows = []
    profiles = []
    for (model, base), report in sorted(lead_reports.items()):
        for case in select_cases(report):
            case_rows.append((model, base, case))
        rescues = [e.key for e in report.ledger if e.state == RESCUE]
        misguided = [e.key for e in report.ledger if e.state == MISGUIDANCE]
        table = feature_table_from_dataset(dataset, rescues + misguided)
        profiles.append(
            top_traits(table, rescues, misguided, graph_model=model, baseline=base)
        )
    write_cases_csv(case_rows, out / "cases.csv", meta=meta)
    write_traits_csv(profiles, out / "traits.csv", meta=meta)
    _write_outliers_csv(dataset, lead_reports, out / "outliers.csv", meta)

    undefined = [f"{r.graph_model} vs {r.baseline}" for r in pooled_reports if r.flagged]
    run_info = {
        "tool_version": __version__,
        "dataset_fingerprint": dataset.fingerprint(),
        "suite_config_hash": suite_hash,
        "meta": meta,
        "data_source": source,
        "models": models,
        "regressors": list(REGRESSORS),
        "seeds": seeds,
        "emit": sorted(emit),
        "lead": {"seed": lead_seed, "regressor": lead_reg},
        "thresholds": {f"{b}/{r}/seed{s}": t for (b, r, s), t in sorted(taus.items())},
        "n_test_intersection": len(shared),
        "n_cold_start": len(cold),
        "tri_state_undefined": undefined,
    }
    with open(out / "run.json", "w") as fh:
        json.dump(run_info, fh, indent=2, sort_keys=True)
        fh.write("\n")

    if "json" in emit:
        _emit_json_mirrors(out, meta, rows, pooled_reports, case_rows, profiles)
    if "plotdata" in emit:
        _emit_plotdata(out, out)

    print(f"run complete: {len(suite.prediction_sets)} prediction sets over {len(shared)} shared test rows")
    print(f"artifacts in {out}")
    return 0


def _write_outliers_csv(dataset: Dataset, lead_reports, path: Path, meta: dict) -> None:
    """Per-outlier ledger of the lead (seed, regressor) reports, joined with
    the features the report's scatter data draws on."""
    with open(path, "w") as fh:
        fh.write("# " + " ".join(f"{k}={v}" for k, v in meta.items()) + "\n")
        fh.write(
            "model,baseline,player_id,season,state,quadrant,"
            "y_dollars,y_base_dollars,y_graph_dollars,delta_e_dollars,"
            + ",".join(_SCATTER_FEATURES)
            + "\n"
        )
        for (model, base), report in sorted(lead_reports.items()):
            for entry in report.ledger:
                record = dataset[entry.key]
                features = ",".join(repr(float(record.controls[f])) for f in _SCATTER_FEATURES)
                quad = f"{entry.quadrant[0]}-{entry.quadrant[1]}"
                fh.write(
                    f"{model},{base},{entry.key[0]},{entry.key[1]},{entry.state},{quad},"
                    f"{entry.y!r},{entry.y_base!r},{entry.y_graph!r},{entry.delta_e!r},"
                    f"{features}\n"
                )


def _emit_json_mirrors(out: Path, meta, metric_rows, pooled_reports, case_rows, profiles) -> None:
    def dump(name: str, rows) -> None:
        with open(out / name, "w") as fh:
            json.dump({"meta": meta, "rows": rows}, fh, indent=2, sort_keys=True)
            fh.write("\n")

    dump("metrics.json", metric_rows)
    dump(
        "tri_state.json",
        [
            {
                "model": r.graph_model,
                "baseline": r.baseline,
                "tau_dollars": r.tau,
                "eligible": r.eligible_count,
                "rescues": r.rescue_count,
                "neutrals": r.neutral_count,
                "misguidances": r.misguidance_count,
                "rescue_rate": r.rescue_rate,
                "neutral_rate": r.neutral_rate,
                "misguidance_rate": r.misguidance_rate,
                "flagged": r.flagged,
            }
            for r in pooled_reports
        ],
    )
    dump(
        "cases.json",
        [
            {
                "model": model,
                "baseline": base,
                "player_id": c.key[0],
                "season": c.key[1],
                "state": c.state,
                "quadrant": f"{c.quadrant[0]}-{c.quadrant[1]}",
                "y_dollars": c.y,
                "y_base_dollars": c.y_base,
                "y_graph_dollars": c.y_graph,
                "delta_e_dollars": c.delta_e,
            }
            for model, base, c in case_rows
        ],
    )
    dump(
        "traits.json",
        [
            {
                "model": p.graph_model,
                "baseline": p.baseline,
                "flagged": p.flagged,
                "rows": [dataclasses.asdict(row) for row in p.rows],
            }
            for p in profiles
        ],
    )


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------


def _emit_plotdata(run_dir: Path, out_dir: Path) -> None:
    """Derive plot-ready CSVs from run artifacts. Pure reformatting: reads
    files, writes files, recomputes nothing."""
    run_info = json.loads((run_dir / "run.json").read_text())
    meta = run_info["meta"]
    meta_line = "# " + " ".join(f"{k}={v}" for k, v in meta.items()) + "\n"

    tri_rows = _read_csv_rows(run_dir / "tri_state.csv")
    with open(out_dir / "plotdata_tri_state.csv", "w") as fh:
        fh.write(meta_line)
        fh.write("model,baseline,state,rate\n")
        for row in tri_rows:
            for state in _TRI_STATES:
                rate = row[f"{state}_rate"]
                fh.write(f"{row['model']},{row['baseline']},{state},{rate}\n")

    outlier_rows = _read_csv_rows(run_dir / "outliers.csv")
    with open(out_dir / "plotdata_delta_e.csv", "w") as fh:
        fh.write(meta_line)
        fh.write("model,baseline,player_id,season,feature,feature_value,delta_e_dollars\n")
        for row in outlier_rows:
            for feature in _SCATTER_FEATURES:
                fh.write(
                    f"{row['model']},{row['baseline']},{row['player_id']},{row['season']},"
                    f"{feature},{row[feature]},{row['delta_e_dollars']}\n"
                )


def _format_table(header: list[str], body: list[list[str]]) -> list[str]:
    widths = [len(h) for h in header]
    for row in body:
        for i, cell in enumerate(row):
            widths[i] = max(widths[i], len(cell))
    lines = ["  ".join(h.ljust(widths[i]) for i, h in enumerate(header)).rstrip()]
    lines.append("  ".join("-" * w for w in widths))
    for row in body:
        lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip())
    return lines


def _round_dollars(raw: str) -> str:
    value = float(raw)
    if math.isnan(value):
        return "undefined"
    return f"{value / 1e6:.2f}M"


def _round_rate(raw: str) -> str:
    value = float(raw)
    if math.isnan(value):
        return "-"
    return f"{value:.3f}"


def cmd_report(args: argparse.Namespace) -> int:
    run_dir = Path(args.run)
    out_dir = Path(args.out) if args.out else run_dir
    missing = [name for name in _RUN_ARTIFACTS if not (run_dir / name).exists()]
    if missing:
        raise DataError(f"run directory {run_dir} is missing: {', '.join(missing)}")
    out_dir.mkdir(parents=True, exist_ok=True)

    run_info = json.loads((run_dir / "run.json").read_text())
    metric_rows = _read_csv_rows(run_dir / "metrics.csv")
    tri_rows = _read_csv_rows(run_dir / "tri_state.csv")
    case_rows = _read_csv_rows(run_dir / "cases.csv")
    trait_rows = _read_csv_rows(run_dir / "traits.csv")

    _emit_plotdata(run_dir, out_dir)

    lines: list[str] = []
    lines.append(f"relcap {run_info['tool_version']} run report")
    lines.append(f"dataset fingerprint: {run_info['dataset_fingerprint']}")
    lines.append(f"suite config hash:   {run_info['suite_config_hash']}")
    lines.append(f"models: {', '.join(run_info['models'])}")
    lines.append(f"seeds:  {', '.join(str(s) for s in run_info['seeds'])}")
    lines.append(
        f"shared test rows: {run_info['n_test_intersection']}"
        f" (cold-start: {run_info['n_cold_start']})"
    )
    lines.append("")

    lines.append("== seed-mean metrics (shared test intersection, dollars) ==")
    body = [
        [
            row["model"],
            row["regressor"],
            _round_dollars(row["rmse_dollars"]),
            _round_rate(row["r2"]),
            _round_rate(row["cold_start_r2"]),
        ]
        for row in metric_rows
    ]
    lines += _format_table(["model", "regressor", "rmse", "r2", "cold_start_r2"], body)
    lines.append("")

    lines.append("== tri-state audit (pooled over regressors and seeds) ==")
    if tri_rows:
        body = [
            [
                row["model"],
                row["baseline"],
                _round_dollars(row["tau_dollars"]),
                row["eligible"],
                _round_rate(row["rescue_rate"]),
                _round_rate(row["neutral_rate"]),
                _round_rate(row["misguidance_rate"]),
            ]
            for row in tri_rows
        ]
        lines += _format_table(
            ["model", "baseline", "tau", "eligible", "rescue", "neutral", "misguidance"], body
        )
    else:
        lines.append("(no graph model / baseline pairings in this run)")
    for note in run_info.get("tri_state_undefined", []):
        lines.append(f"note: tri-state undefined for {note} (no eligible outliers)")
    lines.append("")

    lines.append("== representative cases (lead seed/regressor) ==")
    if case_rows:
        for row in case_rows:
            lines.append(
                f"  {row['model']} vs {row['baseline']}: {row['player_id']} season {row['season']}"
                f" [{row['state']}/{row['quadrant']}]"
                f" true {_round_dollars(row['y_dollars'])},"
                f" base {_round_dollars(row['y_base_dollars'])},"
                f" graph {_round_dollars(row['y_graph_dollars'])},"
                f" dE {_round_dollars(row['delta_e_dollars'])}"
            )
    else:
        lines.append("(none)")
    lines.append("")

    lines.append("== discriminating traits (rescue vs misguidance cohorts) ==")
    passing = [row for row in trait_rows if row["passes_filter"] == "1"]
    if passing:
        for row in sorted(passing, key=lambda r: (r["model"], r["baseline"], int(r["rank"]))):
            lines.append(
                f"  {row['model']} vs {row['baseline']}: #{row['rank']} {row['feature']}"
                f" (delta {float(row['delta']):+.3f}, p {float(row['p']):.4f},"
                f" n_R {row['n_R']}, n_M {row['n_M']})"
            )
    else:
        lines.append("(no feature passed the effect-size and significance filter)")
    lines.append("")

    (out_dir / "report.txt").write_text("\n".join(lines))
    print(f"report written to {out_dir / 'report.txt'}")
    return 0


# ---------------------------------------------------------------------------
# parser and entry point
# ---------------------------------------------------------------------------


def _add_league_flags(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--seed", type=int, help="league generation seed")
    sp.add_argument("--players", type=int, help="number of players")
    sp.add_argument("--teams", type=int, help="number of teams")
    sp.add_argument("--agents", type=int, help="number of agents")
    sp.add_argument("--start-season", type=int, help="first season (inclusive)")
    sp.add_argument("--end-season", type=int, help="last season (inclusive)")
    sp.add_argument("--rookie-rate", type=float, help="entrants per season as a fraction of players")
    sp.add_argument("--agent-quality-effect", type=float, help="latent agent effect (log-salary units)")
    sp.add_argument("--team-premium-effect", type=float, help="latent team effect (log-salary units)")
    sp.add_argument("--veteran-capital-effect", type=float, help="latent stature effect (log-salary units)")
    sp.add_argument("--noise-sd", type=float, help="pricing noise (log-salary units)")
    sp.add_argument("--breakout-rate", type=float, help="per-season breakout trigger probability")
    sp.add_argument("--decline-rate", type=float, help="per-season decline trigger probability")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="relcap",
        description="Graph-augmented salary valuation: generate data, run the model suite, report results.",
        epilog="RELCAP_THREADS bounds the fitting thread pool (default 1); it never changes results.",
    )
    parser.add_argument("--version", action="version", version=f"relcap {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="generate a synthetic league to a data directory")
    _add_league_flags(gen)
    gen.add_argument("--out", required=True, help="output data directory")
    gen.add_argument("--config", help="JSON config file (explicit flags win)")
    gen.set_defaults(func=cmd_generate)

    run = sub.add_parser("run", help="train the model suite and write evaluation artifacts")
    run.add_argument("--data", help="data directory from a previous generate")
    run.add_argument("--generate", action="store_true", help="generate the league in-process instead")
    _add_league_flags(run)
    run.add_argument("--out", required=True, help="run output directory")
    run.add_argument("--models", help="comma-separated model subset (default: all)")
    run.add_argument("--seeds", help="comma-separated training seeds (default: the fixed suite seeds)")
    run.add_argument("--emit", help="comma-separated extras: csv,json,plotdata (default: csv)")
    run.add_argument("--config", help="JSON config file (explicit flags win)")
    run.set_defaults(func=cmd_run)

    rep = sub.add_parser("report", help="reformat run artifacts into a summary and plot data")
    rep.add_argument("--run", required=True, help="run directory")
    rep.add_argument("--out", help="output directory (default: the run directory)")
    rep.set_defaults(func=cmd_report)

    val = sub.add_parser("validate", help="check a data directory for schema and consistency violations")
    val.add_argument("--data", required=True, help="data directory")
    val.set_defaults(func=cmd_validate)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except (DataError, LeakageError, EvaluationError, RelcapError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
