"""Orchestration: nine model configurations, five seeds, two regressors,
one matched-information rulebook.

Every configuration sees the identical season split and the identical
tabular base; they differ only in which column provenance tags may enter
the design matrix and which (if any) graph embedding augments it. Graph
configurations never see explicit team/agent identifiers; baselines never
see embeddings. Both properties are enforced by scanning column provenance,
not by convention.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field

import numpy as np

from .core import (
    DEFAULT_SPLIT,
    Dataset,
    Key,
    SplitSpec,
    invert_target,
    make_target,
    shared_test_intersection,
    split_by_season,
)
from .datagen import validate
from .embed_gnn import infer_inductive, train_gnn
from .embed_static import EmbeddingTable, train_node2vec, train_rotate
from .errors import ConfigError, LeakageError, RelcapError
from .evaluate import ResidualPool
from .kg import KnowledgeGraph, build_graph, inductive_mask, ps_key, season_view
from .regress import fit_encoder_imputer, fit_gbt, fit_random_forest, fuse_features

CONFIG_NAMES = (
    "weak_baseline",
    "strong_baseline",
    "node2vec_stats",
    "rotate_stats",
    "v1_stats",
    "v2_trans_stats",
    "v2_ind_stats",
    "v2full_sg_stats",
    "v2full_mg_stats",
)

REGRESSORS = ("forest", "gbt")

SUITE_SEEDS = (11, 23, 37, 51, 73)

# (view variant, embedder) per graph configuration; baselines carry None.
# The two shallow embedders and both full-relational networks run over the
# event-bearing view; the anchor-node pair runs affiliation-only; the career
# variant collapses seasons onto static player nodes.
_GRAPH_PLANS: dict[str, tuple[str, str]] = {
    "node2vec_stats": ("V2Full_SG", "node2vec"),
    "rotate_stats": ("V2Full_SG", "rotate"),
    "v1_stats": ("V1_static_player", "gnn:V1"),
    "v2_trans_stats": ("V2_playerseason", "gnn:V2_Trans"),
    "v2_ind_stats": ("V2_playerseason", "gnn:V2_Ind"),
    "v2full_sg_stats": ("V2Full_SG", "gnn:V2Full_SG"),
    "v2full_mg_stats": ("V2Full_MG", "gnn:V2Full_MG"),
}

# Fixed hyperparameters; part of the config hash, never seed-dependent.
_EMBED_HYPER: dict[str, dict] = {
    "node2vec": {"dim": 64, "walk_length": 40, "walks_per_node": 10, "p": 1.0, "q": 1.0, "window": 5, "epochs": 2},
    "rotate": {"dim": 128, "margin": 6.0, "negatives_per_positive": 8, "epochs": 30, "lr": 0.03},
    "gnn": {"hidden": 64, "lr": 3e-3, "weight_decay": 1e-4, "max_epochs": 200, "patience": 30},
}

_FOREST_HYPER = {"n_trees": 500, "min_samples_leaf": 2}
_GBT_HYPER = {"lr": 0.03, "max_rounds": 2000, "patience": 50, "max_depth": 6}


@dataclass(frozen=True)
class ModelConfig:
    name: str
    regressor: str

    def __post_init__(self):
        if self.name not in CONFIG_NAMES:
            raise ConfigError(f"unknown config {self.name!r}, expected one of {CONFIG_NAMES}")
        if self.regressor not in REGRESSORS:
            raise ConfigError(f"unknown regressor {self.regressor!r}, expected one of {REGRESSORS}")

    @property
    def uses_embedding(self) -> bool:
        return self.name in _GRAPH_PLANS

    @property
    def allowed_tags(self) -> tuple[str, ...]:
        if self.name == "weak_baseline":
            return ("stat", "control")
        if self.name == "strong_baseline":
            return ("stat", "control", "meta")
        return ("stat", "control", "embed")

    @property
    def label(self) -> str:
        return f"{self.name}/{self.regressor}"


def config_hash(config: ModelConfig) -> str:
    """Stable digest of the full parameterization. Seeds are excluded on
    purpose: runs of one config under different seeds share a hash."""
    plan = _GRAPH_PLANS.get(config.name)
    payload = {
        "name": config.name,
        "regressor": config.regressor,
        "allowed_tags": list(config.allowed_tags),
        "view_variant": plan[0] if plan else None,
        "embedder": plan[1] if plan else None,
        "embed_hyper": _EMBED_HYPER[plan[1].split(":")[0]] if plan else None,
        "regressor_hyper": _FOREST_HYPER if config.regressor == "forest" else _GBT_HYPER,
    }
    blob = json.dumps(payload, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


@dataclass
class PredictionSet:
    model: str
    regressor: str
    seed: int
    instance_keys: list[Key]
    y_true_log: np.ndarray
    y_pred_log: np.ndarray

    def __post_init__(self):
        if not (len(self.instance_keys) == self.y_true_log.size == self.y_pred_log.size):
            raise ConfigError("prediction set fields must align")

    def keys(self) -> list[Key]:
        return list(self.instance_keys)

    @property
    def y_true_dollars(self) -> np.ndarray:
        return np.array([invert_target(v) for v in self.y_true_log])

    @property
    def y_pred_dollars(self) -> np.ndarray:
        return np.array([invert_target(v) for v in self.y_pred_log])

    def true_dollars_by_key(self) -> dict[Key, float]:
        return dict(zip(self.instance_keys, self.y_true_dollars))

    def pred_dollars_by_key(self) -> dict[Key, float]:
        return dict(zip(self.instance_keys, self.y_pred_dollars))

    def subset(self, keys) -> "PredictionSet":
        wanted = set(keys)
        idx = [i for i, k in enumerate(self.instance_keys) if k in wanted]
        return PredictionSet(
            model=self.model,
            regressor=self.regressor,
            seed=self.seed,
            instance_keys=[self.instance_keys[i] for i in idx],
            y_true_log=self.y_true_log[idx],
            y_pred_log=self.y_pred_log[idx],
        )

    def canonical_bytes(self) -> bytes:
        payload = {
            "model": self.model,
            "regressor": self.regressor,
            "seed": self.seed,
            "instances": [
                [k[0], k[1], repr(float(t)), repr(float(p))]
                for k, t, p in zip(self.instance_keys, self.y_true_log, self.y_pred_log)
            ],
        }
        return json.dumps(payload, sort_keys=True).encode()


@dataclass
class EmbeddingBundle:
    """Embedding tables keyed by split name plus the instance-to-node map.

    Most configurations share one table across splits; the inductive
    configuration trains on a masked view and infers test rows on the full
    one, so its test table differs.
    """

    tables: dict[str, EmbeddingTable]
    node_key_fn: "callable"
    extra_embed_fn: "callable | None" = None


def _instance_pairs(dataset: Dataset, node_key_fn) -> list[tuple[str, float]]:
    return [
        (node_key_fn((rec.player_id, rec.season)), make_target(rec.salary_usd))
        for rec in dataset.records
    ]


def train_embedding(
    dataset: Dataset,
    config_name: str,
    split: SplitSpec,
    seed: int,
    graph: KnowledgeGraph | None = None,
) -> EmbeddingBundle:
    """One embedding per (configuration, seed), shared by both regressors."""
    if config_name not in _GRAPH_PLANS:
        raise ConfigError(f"{config_name} has no graph plan")
    variant, embedder = _GRAPH_PLANS[config_name]
    test_season = max(split.test_seasons)
    if graph is None:
        graph = build_graph(dataset, include_events=True)
    view = season_view(graph, variant, test_season)

    if variant == "V1_static_player":
        node_key_fn = lambda key: f"player:{key[0]}"
    else:
        node_key_fn = lambda key: ps_key(key[0], key[1])

    if embedder == "node2vec":
        h = _EMBED_HYPER["node2vec"]
        table = train_node2vec(
            view,
            seed=seed,
            epochs=h["epochs"],
            dim=h["dim"],
            walk_length=h["walk_length"],
            walks_per_node=h["walks_per_node"],
            p=h["p"],
            q=h["q"],
            window=h["window"],
        )
        return EmbeddingBundle({"train": table, "val": table, "test": table}, node_key_fn)

    if embedder == "rotate":
        h = _EMBED_HYPER["rotate"]
        table = train_rotate(
            view,
            dim=h["dim"],
            margin=h["margin"],
            negatives_per_positive=h["negatives_per_positive"],
            epochs=h["epochs"],
            lr=h["lr"],
            seed=seed,
        )
        return EmbeddingBundle({"train": table, "val": table, "test": table}, node_key_fn)

    gnn_variant = embedder.split(":", 1)[1]
    h = _EMBED_HYPER["gnn"]
    parts = split_by_season(dataset, split)
    train_pairs = _instance_pairs(parts.train, node_key_fn)
    val_pairs = _instance_pairs(parts.val, node_key_fn)

    extra_fn = None
    if config_name == "v1_stats":
        # static career nodes carry no season signal; restore a normalized
        # experience offset alongside the embedding
        def extra_fn(keys):
            return {
                "v1_season_offset": {
                    k: dataset[k].controls["years_since_draft"] / 20.0 for k in keys
                }
            }

    if gnn_variant == "V2_Ind":
        test_node_keys = sorted({node_key_fn(k) for k in parts.test.keys()})
        masked = inductive_mask(view, test_node_keys)
        model, train_table, _ = train_gnn(
            masked.train_view, gnn_variant, train_pairs, val_pairs, seed=seed, **_gnn_kwargs(h)
        )
        inferred = infer_inductive(model, view, test_node_keys)
        return EmbeddingBundle(
            {"train": train_table, "val": train_table, "test": inferred.table},
            node_key_fn,
            extra_fn,
        )

    _, table, _ = train_gnn(view, gnn_variant, train_pairs, val_pairs, seed=seed, **_gnn_kwargs(h))
    return EmbeddingBundle({"train": table, "val": table, "test": table}, node_key_fn, extra_fn)


def _gnn_kwargs(h: dict) -> dict:
    return {
        "hidden": h["hidden"],
        "lr": h["lr"],
        "weight_decay": h["weight_decay"],
        "max_epochs": h["max_epochs"],
        "patience": h["patience"],
    }


def enforce_information_set(config: ModelConfig, design_matrix) -> None:
    """Column provenance scan; violations are leakage, not configuration."""
    allowed = set(config.allowed_tags)
    bad = sorted({t for t in design_matrix.provenance if t not in allowed})
    if bad:
        raise LeakageError(
            f"{config.label} admits tags {sorted(allowed)} but the design matrix carries {bad}"
        )


def _targets(dataset: Dataset, keys) -> np.ndarray:
    return np.array([make_target(dataset[k].salary_usd) for k in keys])


def run_config(
    dataset: Dataset,
    config: ModelConfig,
    split: SplitSpec = DEFAULT_SPLIT,
    seed: int = SUITE_SEEDS[0],
    embedding: EmbeddingBundle | None = None,
    graph: KnowledgeGraph | None = None,
) -> PredictionSet:
    """Train one configuration end to end and predict the test split.

    Preprocessing is fit on the training seasons alone; the validation
    season is consulted only by early stopping; test salaries are read only
    to report truth next to the predictions.
    """
    try:
        parts = split_by_season(dataset, split)
        if not parts.test.records:
            raise ConfigError("test split is empty")
        encoder, imputer = fit_encoder_imputer(parts.train)

        if config.uses_embedding and embedding is None:
            embedding = train_embedding(dataset, config.name, split, seed, graph=graph)

        include_meta = "meta" in config.allowed_tags

        def fuse(split_name: str, keys: list[Key]):
            if config.uses_embedding:
                table = embedding.tables[split_name]
                extra = embedding.extra_embed_fn(keys) if embedding.extra_embed_fn else None
                dm = fuse_features(
                    dataset,
                    keys,
                    encoder,
                    imputer,
                    embedding=table,
                    node_key_fn=embedding.node_key_fn,
                    extra_embed=extra,
                )
            else:
                dm = fuse_features(dataset, keys, encoder, imputer, include_meta=include_meta)
            enforce_information_set(config, dm)
            return dm

        train_keys = sorted(parts.train.keys())
        test_keys = sorted(parts.test.keys())
        x_train = fuse("train", train_keys)
        y_train = _targets(dataset, train_keys)
        train_fp = parts.train.fingerprint()

        if config.regressor == "forest":
            # Feature subsampling can hide the few columns that separate pay
            # regimes, so every tree sees the full column set; bootstrap
            # resampling alone decorrelates the ensemble.
            model = fit_random_forest(
                x_train,
                y_train,
                seed=seed,
                train_fingerprint=train_fp,
                k_features=len(x_train.columns),
                **_FOREST_HYPER,
            )
        else:
            val_keys = sorted(parts.val.keys())
            x_val = fuse("val", val_keys)
            y_val = _targets(dataset, val_keys)
            model = fit_gbt(
                x_train, y_train, x_val, y_val, seed=seed, train_fingerprint=train_fp, **_GBT_HYPER
            )

        x_test = fuse("test", test_keys)
        y_pred = model.predict(x_test)
        return PredictionSet(
            model=config.name,
            regressor=config.regressor,
            seed=seed,
            instance_keys=test_keys,
            y_true_log=_targets(dataset, test_keys),
            y_pred_log=y_pred,
        )
    except RelcapError as exc:
        raise type(exc)(f"{config.label} (seed {seed}): {exc}") from exc


def baseline_residual_pool(
    dataset: Dataset,
    config: ModelConfig,
    split: SplitSpec = DEFAULT_SPLIT,
    seed: int = SUITE_SEEDS[0],
) -> ResidualPool:
    """Train a baseline and pool its absolute dollar residuals over the train
    and validation seasons.

    The pool deliberately excludes the test season, so an outlier threshold
    derived from it cannot have read the held-out year; the pool's split
    fingerprints let callers prove that after the fact.
    """
    if config.uses_embedding:
        raise ConfigError(f"residual pools calibrate baselines, got graph config {config.name}")
    try:
        parts = split_by_season(dataset, split)
        encoder, imputer = fit_encoder_imputer(parts.train)
        include_meta = "meta" in config.allowed_tags

        def matrix(part):
            keys = sorted(part.keys())
            dm = fuse_features(dataset, keys, encoder, imputer, include_meta=include_meta)
            enforce_information_set(config, dm)
            return keys, dm

        train_keys, x_train = matrix(parts.train)
        y_train = _targets(dataset, train_keys)
        train_fp = parts.train.fingerprint()
        if config.regressor == "forest":
            model = fit_random_forest(
                x_train,
                y_train,
                seed=seed,
                train_fingerprint=train_fp,
                k_features=len(x_train.columns),
                **_FOREST_HYPER,
            )
        else:
            val_keys, x_val = matrix(parts.val)
            model = fit_gbt(
                x_train,
                y_train,
                x_val,
                _targets(dataset, val_keys),
                seed=seed,
                train_fingerprint=train_fp,
                **_GBT_HYPER,
            )

        names: list[str] = []
        fingerprints: list[str] = []
        truth: list[np.ndarray] = []
        predicted: list[np.ndarray] = []
        for split_name, part in (("train", parts.train), ("val", parts.val)):
            keys = sorted(part.keys())
            if not keys:
                continue
            dm = fuse_features(dataset, keys, encoder, imputer, include_meta=include_meta)
            enforce_information_set(config, dm)
            y_log = _targets(dataset, keys)
            p_log = model.predict(dm)
            truth.append(np.array([invert_target(v) for v in y_log]))
            predicted.append(np.array([invert_target(v) for v in p_log]))
            names.append(split_name)
            fingerprints.append(part.fingerprint())
        return ResidualPool.from_predictions(
            np.concatenate(truth), np.concatenate(predicted), names, fingerprints
        )
    except RelcapError as exc:
        raise type(exc)(f"{config.label} (seed {seed}): {exc}") from exc


@dataclass
class SuiteResult:
    prediction_sets: list[PredictionSet]
    manifest: dict = field(default_factory=dict)


def run_suite(
    dataset: Dataset,
    config_names=CONFIG_NAMES,
    seeds=SUITE_SEEDS,
    split: SplitSpec = DEFAULT_SPLIT,
    progress=None,
) -> SuiteResult:
    """configs x seeds x regressors, each embedding trained once per
    (config, seed) and shared by both regressors. Any failure aborts the
    suite; the partial manifest rides along on the raised error."""
    report = validate(dataset)
    if not report.is_clean:
        raise ConfigError(f"dataset failed validation: {report.violations[:3]}")
    graph = build_graph(dataset, include_events=True)
    manifest: dict = {
        "dataset_fingerprint": dataset.fingerprint(),
        "seeds": list(seeds),
        "config_hashes": {},
        "timings_s": {},
        "status": "running",
    }
    for name in config_names:
        for reg in REGRESSORS:
            manifest["config_hashes"][f"{name}/{reg}"] = config_hash(ModelConfig(name, reg))

    sets: list[PredictionSet] = []
    try:
        for name in config_names:
            for seed in seeds:
                bundle = None
                if name in _GRAPH_PLANS:
                    t0 = time.perf_counter()
                    bundle = train_embedding(dataset, name, split, seed, graph=graph)
                    manifest["timings_s"][f"{name}/embed/seed{seed}"] = round(time.perf_counter() - t0, 3)
                for reg in REGRESSORS:
                    config = ModelConfig(name, reg)
                    t0 = time.perf_counter()
                    ps = run_config(dataset, config, split, seed, embedding=bundle, graph=graph)
                    manifest["timings_s"][f"{config.label}/seed{seed}"] = round(time.perf_counter() - t0, 3)
                    sets.append(ps)
                    if progress is not None:
                        progress(config, seed)
    except RelcapError as exc:
        manifest["status"] = "failed"
        manifest["failed_at"] = str(exc)
        manifest["completed"] = [f"{p.model}/{p.regressor}/seed{p.seed}" for p in sets]
        exc.partial_manifest = manifest
        raise

    shared = shared_test_intersection(sets)
    manifest["status"] = "complete"
    manifest["intersection_size"] = len(shared)
    manifest["intersection_keys"] = [f"{k[0]}:{k[1]}" for k in shared]
    manifest["coverage"] = {
        f"{p.model}/{p.regressor}/seed{p.seed}": len(p.instance_keys) for p in sets
    }
    return SuiteResult(prediction_sets=sets, manifest=manifest)


def write_manifest(manifest: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
