"""Tree-ensemble regressors over fused tabular + embedding design matrices.

Preprocessing is leakage-safe by construction: the ordinal encoder and the
median imputer fit on training rows only and record the fingerprint of what
they saw, so the pipeline can assert they never met validation or test data.

Both regressors are grown from scratch on the compiled CART kernel:
variance-reduction splits, deterministic tie-breaking (lowest feature index,
then lowest threshold), midpoint thresholds. The forest bags 500 deep trees
with a per-tree feature subsample of ceil(F/3); boosting runs stagewise on
residuals with early stopping against a held-out validation split.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._cart import apply_tree, grow_tree, presort
from .core import Key, invert_target
from .errors import ConfigError, DataError
from .embed_static import EmbeddingTable

PROVENANCE_TAGS = ("stat", "control", "meta", "embed")

Tree = tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("RELCAP_THREADS", "1")))
    except ValueError:
        return 1


# ---------------------------------------------------------------------------
# design matrix and preprocessing
# ---------------------------------------------------------------------------


@dataclass
class DesignMatrix:
    """Numeric feature block with per-column provenance.

    Columns are ordered stats, controls, [meta], [embedding dims],
    [isolation flag]; rows align with `keys`. NaNs are rejected: imputation
    happens before construction.
    """

    keys: list[Key]
    columns: list[str]
    provenance: list[str]
    X: np.ndarray

    def __post_init__(self) -> None:
        if self.X.shape != (len(self.keys), len(self.columns)):
            raise DataError(
                f"matrix shape {self.X.shape} does not match {len(self.keys)} keys x {len(self.columns)} columns"
            )
        if len(self.provenance) != len(self.columns):
            raise DataError("provenance must tag every column")
        bad = sorted(set(self.provenance) - set(PROVENANCE_TAGS))
        if bad:
            raise DataError(f"unknown provenance tags: {bad}")
        if len(set(self.columns)) != len(self.columns):
            raise DataError("duplicate column names")
        if np.isnan(self.X).any():
            cols = [self.columns[j] for j in sorted(set(np.argwhere(np.isnan(self.X))[:, 1].tolist()))]
            raise DataError(f"NaNs survived preprocessing in columns: {cols}")

    @property
    def n(self) -> int:
        return len(self.keys)

    def schema(self) -> list[tuple[str, str]]:
        return list(zip(self.columns, self.provenance))

    def take(self, row_idx) -> "DesignMatrix":
        idx = np.asarray(row_idx)
        return DesignMatrix(
            keys=[self.keys[i] for i in idx],
            columns=list(self.columns),
            provenance=list(self.provenance),
            X=self.X[idx],
        )


@dataclass
class OrdinalEncoder:
    """Sorted-category codes learned from training rows; unseen maps to -1."""

    mapping: dict[str, dict[str, int]]
    source_fingerprint: str = ""

    def transform(self, column: str, values) -> np.ndarray:
        codes = self.mapping[column]
        return np.array([codes.get(v, -1) for v in values], dtype=np.float64)


@dataclass
class MedianImputer:
    """Per-column training medians; even counts average the middle two."""

    medians: dict[str, float]
    source_fingerprint: str = ""

    def transform(self, column: str, values: np.ndarray) -> np.ndarray:
        out = np.asarray(values, dtype=np.float64).copy()
        mask = np.isnan(out)
        if mask.any():
            out[mask] = self.medians[column]
        return out


def fit_encoder_imputer(train_dataset, source_fingerprint: str | None = None) -> tuple[OrdinalEncoder, MedianImputer]:
    """Fit both preprocessors on training rows only."""
    records = list(train_dataset)
    if not records:
        raise DataError("cannot fit preprocessing on an empty training set")
    schema = train_dataset.schema
    mapping: dict[str, dict[str, int]] = {}
    for col in schema.meta_columns:
        cats = sorted({r.meta[col] for r in records})
        mapping[col] = {c: i for i, c in enumerate(cats)}
    medians: dict[str, float] = {}
    for col in list(schema.stat_columns) + list(schema.control_columns):
        bucket = "stats" if col in schema.stat_columns else "controls"
        vals = np.array([getattr(r, bucket)[col] for r in records], dtype=np.float64)
        ok = vals[~np.isnan(vals)]
        if ok.size == 0:
            raise DataError(f"column {col!r} has no observed training values to impute from")
        medians[col] = float(np.median(ok))
    fp = source_fingerprint if source_fingerprint is not None else train_dataset.fingerprint()
    return OrdinalEncoder(mapping, fp), MedianImputer(medians, fp)


def fuse_features(
    dataset,
    keys: list[Key],
    encoder: OrdinalEncoder,
    imputer: MedianImputer,
    embedding: EmbeddingTable | None = None,
    node_key_fn=None,
    include_meta: bool = False,
    extra_embed: dict[str, dict[Key, float]] | None = None,
) -> DesignMatrix:
    """Assemble the design matrix for `keys` in schema column order.

    With an embedding table, each instance key is resolved to its graph node
    via node_key_fn; flagged structurally-isolated nodes (and only those)
    contribute a zero vector plus a raised isolation flag. extra_embed adds
    trailing embed-tagged scalar columns (before the flag).
    """
    schema = dataset.schema
    records = [dataset[k] for k in keys]
    cols: list[str] = []
    tags: list[str] = []
    blocks: list[np.ndarray] = []
    for col in schema.stat_columns:
        cols.append(col)
        tags.append("stat")
        blocks.append(imputer.transform(col, np.array([r.stats[col] for r in records], dtype=np.float64)))
    for col in schema.control_columns:
        cols.append(col)
        tags.append("control")
        blocks.append(imputer.transform(col, np.array([r.controls[col] for r in records], dtype=np.float64)))
    if include_meta:
        for col in schema.meta_columns:
            cols.append(col)
            tags.append("meta")
            blocks.append(encoder.transform(col, [r.meta[col] for r in records]))
    if embedding is not None:
        if node_key_fn is None:
            raise ConfigError("an embedding table requires node_key_fn to resolve instance keys")
        width = embedding.width()
        emb = np.zeros((len(keys), width))
        flag = np.zeros(len(keys))
        for i, k in enumerate(keys):
            node = node_key_fn(k)
            if embedding.has(node) and node not in embedding.isolated_keys:
                vec = embedding.vector(node)
                if vec.shape[0] != width:
                    raise DataError(f"embedding width mismatch at {node}: {vec.shape[0]} != {width}")
                emb[i] = vec
            elif embedding.has(node) or node in embedding.isolated_keys:
                flag[i] = 1.0  # structurally isolated: zero vector, raised flag
            else:
                raise DataError(f"no embedding and no isolation flag for node {node}")
        for j in range(width):
            cols.append(f"z{j:03d}")
            tags.append("embed")
            blocks.append(emb[:, j])
        if extra_embed:
            for name in sorted(extra_embed):
                cols.append(name)
                tags.append("embed")
                blocks.append(np.array([extra_embed[name][k] for k in keys], dtype=np.float64))
        cols.append("struct_isolated")
        tags.append("embed")
        blocks.append(flag)
    elif extra_embed:
        raise ConfigError("extra embed columns require an embedding block")
    return DesignMatrix(keys=list(keys), columns=cols, provenance=tags, X=np.column_stack(blocks))


# ---------------------------------------------------------------------------
# models
# ---------------------------------------------------------------------------


def _check_schema(model_columns, model_tags, X: DesignMatrix) -> None:
    if list(X.columns) == list(model_columns) and list(X.provenance) == list(model_tags):
        return
    missing = [c for c in model_columns if c not in X.columns]
    extra = [c for c in X.columns if c not in model_columns]
    raise DataError(
        f"design matrix schema mismatch: missing columns {missing}, unexpected columns {extra}"
        if missing or extra
        else "design matrix schema mismatch: same columns in a different order or with different tags"
    )


@dataclass
class ForestModel:
    columns: list[str]
    provenance: list[str]
    trees: list[Tree]
    seed: int
    min_samples_leaf: int
    k_features: int
    train_fingerprint: str = ""

    def predict(self, X: DesignMatrix) -> np.ndarray:
        _check_schema(self.columns, self.provenance, X)
        if X.n == 0:
            return np.zeros(0)
        out = np.zeros(X.n)
        xc = np.ascontiguousarray(X.X)
        for feat, thr, left, right, val in self.trees:
            apply_tree(feat, thr, left, right, val, xc, out, 1.0 / len(self.trees))
        return out

    def predict_dollars(self, X: DesignMatrix) -> np.ndarray:
        return np.array([invert_target(v) for v in self.predict(X)])


@dataclass
class GbtModel:
    columns: list[str]
    provenance: list[str]
    base: float
    lr: float
    trees: list[Tree]
    best_iteration: int
    val_rmse_path: list[float]
    seed: int
    max_depth: int
    train_fingerprint: str = ""

    def predict(self, X: DesignMatrix) -> np.ndarray:
        _check_schema(self.columns, self.provenance, X)
        if X.n == 0:
            return np.zeros(0)
        out = np.full(X.n, self.base)
        xc = np.ascontiguousarray(X.X)
        for feat, thr, left, right, val in self.trees[: self.best_iteration]:
            apply_tree(feat, thr, left, right, val, xc, out, self.lr)
        return out

    def predict_dollars(self, X: DesignMatrix) -> np.ndarray:
        return np.array([invert_target(v) for v in self.predict(X)])


def _grow_forest_tree(X: np.ndarray, y: np.ndarray, seed_entropy, min_leaf: int, k: int) -> Tree:
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed_entropy))
    n, n_feat = X.shape
    boot = rng.integers(0, n, size=n)
    feats = np.sort(rng.choice(n_feat, size=k, replace=False))
    xb = np.ascontiguousarray(X[np.ix_(boot, feats)])
    yb = y[boot]
    feat, thr, left, right, val = grow_tree(xb, yb, presort(xb), min_leaf, -1)
    remapped = np.where(feat >= 0, feats[np.clip(feat, 0, k - 1)], -1)
    return remapped, thr, left, right, val


def fit_random_forest(
    X: DesignMatrix,
    y: np.ndarray,
    n_trees: int = 500,
    seed: int = 0,
    min_samples_leaf: int = 2,
    k_features: int | None = None,
    train_fingerprint: str = "",
) -> ForestModel:
    """Bagged deep CART trees; each tree sees a bootstrap of rows and a
    random ceil(F/3) feature subset."""
    y = np.asarray(y, dtype=np.float64)
    if n_trees < 1:
        raise ConfigError(f"n_trees must be at least 1, got {n_trees}")
    if X.n < 2:
        raise DataError(f"need at least 2 rows to fit a forest, got {X.n}")
    if len(y) != X.n:
        raise DataError("y length does not match design matrix")
    n_feat = len(X.columns)
    k = k_features if k_features is not None else -(-n_feat // 3)
    k = min(max(1, k), n_feat)
    xc = np.ascontiguousarray(X.X)
    trees: list[Tree | None] = [None] * n_trees
    workers = _threads()

    def job(t: int) -> None:
        trees[t] = _grow_forest_tree(xc, y, (seed, t), min_samples_leaf, k)

    if workers == 1:
        for t in range(n_trees):
            job(t)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(job, range(n_trees)))
    return ForestModel(
        columns=list(X.columns),
        provenance=list(X.provenance),
        trees=trees,  # type: ignore[arg-type]
        seed=seed,
        min_samples_leaf=min_samples_leaf,
        k_features=k,
        train_fingerprint=train_fingerprint,
    )


def fit_gbt(
    X: DesignMatrix,
    y: np.ndarray,
    X_val: DesignMatrix,
    y_val: np.ndarray,
    lr: float = 0.03,
    max_rounds: int = 2000,
    patience: int = 50,
    max_depth: int = 6,
    subsample: float = 1.0,
    seed: int = 0,
    train_fingerprint: str = "",
) -> GbtModel:
    """Stagewise least-squares boosting with validation early stopping.

    The best iteration is the earliest minimum of validation RMSE; stored
    predictions truncate the tree list there.
    """
    if lr <= 0:
        raise ConfigError(f"learning rate must be positive, got {lr}")
    if not (0 < subsample <= 1.0):
        raise ConfigError(f"subsample must be in (0, 1], got {subsample}")
    if X_val.n == 0:
        raise ConfigError("gbt requires a non-empty validation set for early stopping")
    _check_schema(X.columns, X.provenance, X_val)
    y = np.asarray(y, dtype=np.float64)
    y_val = np.asarray(y_val, dtype=np.float64)
    base = float(y.mean())
    xc = np.ascontiguousarray(X.X)
    xv = np.ascontiguousarray(X_val.X)
    sorted_full = presort(xc)
    rng = np.random.default_rng(np.random.SeedSequence(entropy=(seed, 0x6B7)))

    pred_train = np.full(X.n, base)
    pred_val = np.full(X_val.n, base)
    val_path = [float(np.sqrt(np.mean((pred_val - y_val) ** 2)))]
    trees: list[Tree] = []
    best_rmse = val_path[0]
    best_iter = 0
    for rnd in range(max_rounds):
        resid = y - pred_train
        if subsample < 1.0:
            take = rng.random(X.n) < subsample
            if take.sum() < 2:
                take[:] = True
            xb = np.ascontiguousarray(xc[take])
            tree = grow_tree(xb, resid[take], presort(xb), 1, max_depth)
        else:
            tree = grow_tree(xc, resid, sorted_full.copy(), 1, max_depth)
        trees.append(tree)
        feat, thr, left, right, val = tree
        apply_tree(feat, thr, left, right, val, xc, pred_train, lr)
        apply_tree(feat, thr, left, right, val, xv, pred_val, lr)
        rmse = float(np.sqrt(np.mean((pred_val - y_val) ** 2)))
        val_path.append(rmse)
        if rmse < best_rmse:
            best_rmse = rmse
            best_iter = rnd + 1
        elif (rnd + 1) - best_iter >= patience:
            break
    return GbtModel(
        columns=list(X.columns),
        provenance=list(X.provenance),
        base=base,
        lr=lr,
        trees=trees[:best_iter],
        best_iteration=best_iter,
        val_rmse_path=val_path,
        seed=seed,
        max_depth=max_depth,
        train_fingerprint=train_fingerprint,
    )


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

_FORMAT_VERSION = 1
_TREE_FIELDS = ("feat", "thr", "left", "right", "val")
_TREE_DTYPES = ("<i8", "<f8", "<i8", "<i8", "<f8")


def save_model(model: ForestModel | GbtModel, path: str | Path) -> None:
    kind = "forest" if isinstance(model, ForestModel) else "gbt"
    header = {
        "format_version": _FORMAT_VERSION,
        "kind": kind,
        "columns": model.columns,
        "provenance": model.provenance,
        "seed": model.seed,
        "train_fingerprint": model.train_fingerprint,
        "tree_sizes": [len(t[0]) for t in model.trees],
    }
    if kind == "forest":
        header["min_samples_leaf"] = model.min_samples_leaf
        header["k_features"] = model.k_features
    else:
        header["base"] = model.base
        header["lr"] = model.lr
        header["best_iteration"] = model.best_iteration
        header["max_depth"] = model.max_depth
        header["val_rmse_path"] = model.val_rmse_path
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode())
        fh.write(b"\n")
        for tree in model.trees:
            for arr, dtype in zip(tree, _TREE_DTYPES):
                fh.write(np.ascontiguousarray(arr, dtype=dtype).tobytes())


def load_model(path: str | Path) -> ForestModel | GbtModel:
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode())
        blob = fh.read()
    if header["format_version"] != _FORMAT_VERSION:
        raise DataError(f"unsupported model format version {header['format_version']}")
    trees: list[Tree] = []
    off = 0
    for size in header["tree_sizes"]:
        arrays = []
        for dtype in _TREE_DTYPES:
            width = 8 * size
            arrays.append(np.frombuffer(blob[off : off + width], dtype=dtype).copy())
            off += width
        trees.append(tuple(arrays))
    if header["kind"] == "forest":
        return ForestModel(
            columns=header["columns"],
            provenance=header["provenance"],
            trees=trees,
            seed=header["seed"],
            min_samples_leaf=header["min_samples_leaf"],
            k_features=header["k_features"],
            train_fingerprint=header["train_fingerprint"],
        )
    return GbtModel(
        columns=header["columns"],
        provenance=header["provenance"],
        base=header["base"],
        lr=header["lr"],
        trees=trees,
        best_iteration=header["best_iteration"],
        val_rmse_path=header["val_rmse_path"],
        seed=header["seed"],
        max_depth=header["max_depth"],
        train_fingerprint=header["train_fingerprint"],
    )


def export_predictions(path: str | Path, keys: list[Key], y_log: np.ndarray, model_name: str, seed: int) -> None:
    """CSV of per-instance predictions in both target spaces."""
    with open(path, "w") as fh:
        fh.write("player_id,season,y_log,y_dollars,model,seed\n")
        for (player, season), yl in zip(keys, y_log):
            fh.write(f"{player},{season},{yl!r},{invert_target(float(yl))!r},{model_name},{seed}\n")
