"""Two-layer message-passing encoders trained on salary regression.

Forward and backward passes are written out against scipy.sparse operators,
so every gradient is checkable against finite differences. Training is
full-batch AdamW with patience-based early stopping on validation MSE; the
penultimate activations at the best epoch become the node embeddings.

The mean-aggregation layer is used for the player-graph and player-season
variants; the relation-typed layer for the event-bearing variants, where
each relation carries its own weight matrix and messages are normalized by
the per-node, per-relation multiplicity mass (so a single neighbor repeated
k times is indistinguishable from the deduplicated edge).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .embed_static import EmbeddingTable
from .errors import ConfigError, NumericError
from .kg import GraphView

GNN_VARIANTS = ("V1", "V2_Trans", "V2_Ind", "V2Full_SG", "V2Full_MG")
_SAGE_VARIANTS = frozenset({"V1", "V2_Trans", "V2_Ind"})

HIDDEN = 64
N_LAYERS = 2


@dataclass
class TrainLog:
    """Per-epoch (train loss, val loss, global grad norm) plus the epoch
    whose weights were kept."""

    rows: list = field(default_factory=list)  # (epoch, train, val, grad_norm)
    best_epoch: int = -1

    def append(self, epoch: int, train: float, val: float, grad_norm: float) -> None:
        self.rows.append((epoch, float(train), float(val), float(grad_norm)))

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            fh.write("epoch,train_loss,val_loss,grad_norm,is_best\n")
            for epoch, train, val, gn in self.rows:
                fh.write(f"{epoch},{train!r},{val!r},{gn!r},{int(epoch == self.best_epoch)}\n")


@dataclass
class GnnModel:
    variant: str
    kind: str  # "sage" | "rgcn"
    params: dict[str, np.ndarray]
    relations: tuple[str, ...]
    y_offset: float
    seed: int
    view_fingerprint: str
    hidden: int = HIDDEN

    def param_names(self) -> list[str]:
        return sorted(self.params)


def _relu(z: np.ndarray) -> np.ndarray:
    return np.maximum(z, 0.0)


def _row_normalize(mat: sp.csr_matrix) -> sp.csr_matrix:
    mass = np.asarray(mat.sum(axis=1)).ravel()
    inv = np.divide(1.0, mass, out=np.zeros_like(mass), where=mass > 0)
    return sp.diags(inv) @ mat


def mean_adjacency(view: GraphView) -> sp.csr_matrix:
    """Row-normalized simple undirected adjacency; zero rows for isolates."""
    indptr, nbrs = view.undirected_csr()
    data = np.ones(len(nbrs))
    adj = sp.csr_matrix((data, nbrs.astype(np.int64), indptr.astype(np.int64)), shape=(view.n, view.n))
    return _row_normalize(adj)


def relation_adjacencies(view: GraphView) -> dict[str, sp.csr_matrix]:
    """Per-relation undirected adjacency, multiplicity-weighted and
    normalized by each node's total multiplicity mass under that relation."""
    out = {}
    for rel in view.relations():
        src, dst, mult = view.rel_edges[rel]
        rows = np.concatenate([src, dst])
        cols = np.concatenate([dst, src])
        data = np.concatenate([mult, mult]).astype(np.float64)
        adj = sp.csr_matrix((data, (rows, cols)), shape=(view.n, view.n))
        out[rel] = _row_normalize(adj)
    return out


def sage_layer(x: np.ndarray, adj_norm: sp.csr_matrix, w_self: np.ndarray, w_neigh: np.ndarray) -> np.ndarray:
    """ReLU(W_self x(v) + W_neigh mean over neighbors); empty neighborhoods
    contribute a zero neighbor term."""
    return _relu(x @ w_self.T + (adj_norm @ x) @ w_neigh.T)


def rgcn_layer(
    x: np.ndarray, rel_adj: dict[str, sp.csr_matrix], w_self: np.ndarray, w_rel: dict[str, np.ndarray]
) -> np.ndarray:
    """ReLU(W_0 x(i) + sum_r sum_j (m_ij / c_ir) W_r x(j))."""
    z = x @ w_self.T
    for rel, adj in rel_adj.items():
        z = z + (adj @ x) @ w_rel[rel].T
    return _relu(z)


def _glorot(rng: np.random.Generator, fan_out: int, fan_in: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_out, fan_in))


def init_params(variant: str, in_dim: int, relations: tuple[str, ...], hidden: int, seed: int) -> dict[str, np.ndarray]:
    rng = np.random.default_rng(np.random.SeedSequence(entropy=(seed, 0x6E)))
    params: dict[str, np.ndarray] = {}
    dims = [(hidden, in_dim), (hidden, hidden)]
    for layer, (dout, din) in enumerate(dims, start=1):
        params[f"l{layer}.self"] = _glorot(rng, dout, din)
        if variant in _SAGE_VARIANTS:
            params[f"l{layer}.neigh"] = _glorot(rng, dout, din)
        else:
            for rel in relations:
                params[f"l{layer}.rel.{rel}"] = _glorot(rng, dout, din)
    params["head.w"] = _glorot(rng, 1, hidden).ravel()
    params["head.b"] = np.zeros(1)
    return params


def _forward(
    params: dict[str, np.ndarray],
    kind: str,
    x: np.ndarray,
    mean_adj: sp.csr_matrix | None,
    rel_adj: dict[str, sp.csr_matrix] | None,
    y_offset: float,
):
    """Returns (h2, yhat, cache) with everything backward needs."""
    cache: dict[str, np.ndarray] = {"x": x}
    h = x
    for layer in (1, 2):
        z = h @ params[f"l{layer}.self"].T
        if kind == "sage":
            agg = mean_adj @ h
            cache[f"agg{layer}"] = agg
            z = z + agg @ params[f"l{layer}.neigh"].T
        else:
            for rel, adj in rel_adj.items():
                agg = adj @ h
                cache[f"agg{layer}.{rel}"] = agg
                z = z + agg @ params[f"l{layer}.rel.{rel}"].T
        cache[f"z{layer}"] = z
        cache[f"h{layer - 1}"] = h
        h = _relu(z)
    yhat = h @ params["head.w"] + params["head.b"][0] + y_offset
    cache["h2"] = h
    return h, yhat, cache


def _backward(
    params: dict[str, np.ndarray],
    kind: str,
    cache: dict[str, np.ndarray],
    mean_adj: sp.csr_matrix | None,
    rel_adj: dict[str, sp.csr_matrix] | None,
    g_yhat: np.ndarray,
):
    grads = {name: np.zeros_like(p) for name, p in params.items()}
    h2 = cache["h2"]
    grads["head.w"] = h2.T @ g_yhat
    grads["head.b"] = np.array([g_yhat.sum()])
    dh = np.outer(g_yhat, params["head.w"])
    for layer in (2, 1):
        dz = dh * (cache[f"z{layer}"] > 0)
        h_prev = cache[f"h{layer - 1}"]
        grads[f"l{layer}.self"] = dz.T @ h_prev
        dh = dz @ params[f"l{layer}.self"]
        if kind == "sage":
            grads[f"l{layer}.neigh"] = dz.T @ cache[f"agg{layer}"]
            dh = dh + mean_adj.T @ (dz @ params[f"l{layer}.neigh"])
        else:
            for rel, adj in rel_adj.items():
                grads[f"l{layer}.rel.{rel}"] = dz.T @ cache[f"agg{layer}.{rel}"]
                dh = dh + adj.T @ (dz @ params[f"l{layer}.rel.{rel}"])
    return grads


def _pair_arrays(view: GraphView, pairs) -> tuple[np.ndarray, np.ndarray]:
    idx = np.empty(len(pairs), dtype=np.int64)
    ys = np.empty(len(pairs))
    for i, (key, y) in enumerate(pairs):
        if key not in view.index:
            raise ConfigError(f"label key not in view: {key}")
        idx[i] = view.index[key]
        ys[i] = y
    return idx, ys


def _mse_and_grad(yhat: np.ndarray, idx: np.ndarray, ys: np.ndarray, n_nodes: int):
    resid = yhat[idx] - ys
    loss = float(resid @ resid) / len(ys)
    g = np.zeros(n_nodes)
    np.add.at(g, idx, 2.0 * resid / len(ys))
    return loss, g


def train_gnn(
    view: GraphView,
    variant: str,
    train_pairs,
    val_pairs,
    lr: float = 3e-3,
    weight_decay: float = 1e-4,
    max_epochs: int = 200,
    patience: int = 30,
    hidden: int = HIDDEN,
    seed: int = 0,
) -> tuple[GnnModel, EmbeddingTable, TrainLog]:
    """Full-batch AdamW on regression MSE over (node key, target) pairs.

    Repeated keys are legitimate: player-level variants see one node carry
    several season targets. Validation MSE drives early stopping; weights
    from the best validation epoch are kept and produce the embeddings.
    """
    if variant not in GNN_VARIANTS:
        raise ConfigError(f"unknown variant {variant!r}, expected one of {GNN_VARIANTS}")
    if max_epochs > 200:
        raise ConfigError("max_epochs capped at 200")
    if not train_pairs:
        raise ConfigError("no training pairs")
    kind = "sage" if variant in _SAGE_VARIANTS else "rgcn"
    mean_adj = mean_adjacency(view) if kind == "sage" else None
    rel_adj = relation_adjacencies(view) if kind == "rgcn" else None
    relations = tuple(view.relations()) if kind == "rgcn" else ()

    x = view.features
    train_idx, train_y = _pair_arrays(view, train_pairs)
    val_idx, val_y = _pair_arrays(view, val_pairs) if val_pairs else (None, None)
    y_offset = float(train_y.mean())

    params = init_params(variant, x.shape[1], relations, hidden, seed)
    m = {k: np.zeros_like(v) for k, v in params.items()}
    v = {k: np.zeros_like(v_) for k, v_ in params.items()}
    beta1, beta2, eps = 0.9, 0.999, 1e-8

    log = TrainLog()
    best_val = np.inf
    best_params = {k: p.copy() for k, p in params.items()}
    best_epoch = 0
    for epoch in range(max_epochs):
        _, yhat, cache = _forward(params, kind, x, mean_adj, rel_adj, y_offset)
        train_loss, g_yhat = _mse_and_grad(yhat, train_idx, train_y, view.n)
        if val_idx is not None:
            val_resid = yhat[val_idx] - val_y
            val_loss = float(val_resid @ val_resid) / len(val_y)
        else:
            val_loss = train_loss
        if not (np.isfinite(train_loss) and np.isfinite(val_loss)):
            raise NumericError(f"loss became non-finite at epoch {epoch}")
        grads = _backward(params, kind, cache, mean_adj, rel_adj, g_yhat)
        grad_norm = float(np.sqrt(sum(float((g * g).sum()) for g in grads.values())))
        log.append(epoch, train_loss, val_loss, grad_norm)

        if val_loss < best_val:
            best_val = val_loss
            best_epoch = epoch
            best_params = {k: p.copy() for k, p in params.items()}
        elif epoch - best_epoch >= patience:
            break

        t = epoch + 1
        for name, p in params.items():
            g = grads[name]
            m[name] = beta1 * m[name] + (1 - beta1) * g
            v[name] = beta2 * v[name] + (1 - beta2) * g * g
            m_hat = m[name] / (1 - beta1**t)
            v_hat = v[name] / (1 - beta2**t)
            p -= lr * (m_hat / (np.sqrt(v_hat) + eps) + weight_decay * p)

    log.best_epoch = best_epoch
    model = GnnModel(
        variant=variant,
        kind=kind,
        params=best_params,
        relations=relations,
        y_offset=y_offset,
        seed=seed,
        view_fingerprint=view.fingerprint,
        hidden=hidden,
    )
    h2, _, _ = _forward(best_params, kind, x, mean_adj, rel_adj, y_offset)
    table = EmbeddingTable(
        dim=hidden,
        model=f"gnn_{variant}",
        seed=seed,
        view_fingerprint=view.fingerprint,
        keys=list(view.node_keys),
        matrix=h2,
        isolated_keys=frozenset(view.isolated),
        losses=[r[1] for r in log.rows],
    )
    return model, table, log


@dataclass
class InductiveResult:
    table: EmbeddingTable
    structurally_isolated: frozenset


def infer_inductive(model: GnnModel, view: GraphView, keys) -> InductiveResult:
    """Forward-only embeddings on a (possibly larger) view for the given
    keys. Nodes with no admissible edges fall back to the self-term alone
    and are flagged."""
    keys = list(keys)
    missing = [k for k in keys if k not in view.index]
    if missing:
        raise ConfigError(f"keys not present in view: {missing[:5]}")
    mean_adj = mean_adjacency(view) if model.kind == "sage" else None
    rel_adj = relation_adjacencies(view) if model.kind == "rgcn" else None
    if model.kind == "rgcn":
        missing_rel = [r for r in model.relations if r not in rel_adj]
        for r in missing_rel:  # relation absent from this view: zero operator
            rel_adj[r] = sp.csr_matrix((view.n, view.n))
        rel_adj = {r: rel_adj[r] for r in model.relations}
    h2, _, _ = _forward(model.params, model.kind, view.features, mean_adj, rel_adj, model.y_offset)
    idx = np.array([view.index[k] for k in keys], dtype=np.int64)
    table = EmbeddingTable(
        dim=model.hidden,
        model=f"gnn_{model.variant}",
        seed=model.seed,
        view_fingerprint=view.fingerprint,
        keys=keys,
        matrix=h2[idx],
        isolated_keys=frozenset(k for k in keys if k in view.isolated),
    )
    return InductiveResult(table=table, structurally_isolated=frozenset(k for k in keys if k in view.isolated))


def oversmoothing_probe(n_leaves: int = 12, depths=(2, 4, 6, 8), in_dim: int = 8, seed: int = 0) -> dict[int, float]:
    """Mean pairwise cosine of leaf activations on a star graph, by depth.

    Diagnostic only: deeper stacks pull leaf representations together; the
    value is recorded so drift is visible, but nothing gates on it.
    """
    n = n_leaves + 1
    rows = np.concatenate([np.zeros(n_leaves, dtype=np.int64), np.arange(1, n)])
    cols = np.concatenate([np.arange(1, n), np.zeros(n_leaves, dtype=np.int64)])
    adj = _row_normalize(sp.csr_matrix((np.ones(2 * n_leaves), (rows, cols)), shape=(n, n)))
    rng = np.random.default_rng(np.random.SeedSequence(entropy=(seed, 0x05)))
    x = rng.normal(size=(n, in_dim))
    out = {}
    for depth in depths:
        h = x
        for layer in range(depth):
            din = h.shape[1]
            w_self = _glorot(rng, HIDDEN, din)
            w_neigh = _glorot(rng, HIDDEN, din)
            h = sage_layer(h, adj, w_self, w_neigh)
        leaves = h[1:]
        norms = np.linalg.norm(leaves, axis=1, keepdims=True)
        unit = leaves / np.maximum(norms, 1e-12)
        sims = unit @ unit.T
        iu = np.triu_indices(n_leaves, k=1)
        out[depth] = float(sims[iu].mean())
    return out


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------


def save_gnn(model: GnnModel, path: str | Path) -> None:
    names = model.param_names()
    header = {
        "variant": model.variant,
        "kind": model.kind,
        "relations": list(model.relations),
        "y_offset": model.y_offset,
        "seed": model.seed,
        "view_fingerprint": model.view_fingerprint,
        "hidden": model.hidden,
        "params": {n: list(model.params[n].shape) for n in names},
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode())
        fh.write(b"\n")
        for n in names:
            fh.write(np.ascontiguousarray(model.params[n], dtype="<f8").tobytes())


def load_gnn(path: str | Path) -> GnnModel:
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode())
        blob = fh.read()
    params = {}
    off = 0
    for name in sorted(header["params"]):
        shape = tuple(header["params"][name])
        size = int(np.prod(shape)) if shape else 1
        params[name] = np.frombuffer(blob[off : off + 8 * size], dtype="<f8").reshape(shape).copy()
        off += 8 * size
    return GnnModel(
        variant=header["variant"],
        kind=header["kind"],
        params=params,
        relations=tuple(header["relations"]),
        y_offset=header["y_offset"],
        seed=header["seed"],
        view_fingerprint=header["view_fingerprint"],
        hidden=header["hidden"],
    )
