"""Static node embeddings trained from scratch: biased-walk skip-gram and
complex-rotation triple scoring.

Both trainers are deterministic in their seed. Walk generation draws one
dedicated generator per (node, walk index), so the corpus is identical no
matter how walks would be scheduled. The skip-gram inner loop is the hot
path and is compiled; its arithmetic is mirrored one-for-one by the plain
NumPy reference functions below, which the gradient tests diff against.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numba import njit

from .errors import ConfigError, NumericError
from .kg import GraphView

_NEG_TABLE_SIZE = 1 << 17


@dataclass
class WalkCorpus:
    """Random-walk corpus over a view's node indices."""

    node_keys: list[str]
    walks_idx: list[np.ndarray]
    walk_length: int
    walks_per_node: int
    p: float
    q: float
    seed: int

    @property
    def walks(self) -> list[list[str]]:
        return [[self.node_keys[i] for i in w] for w in self.walks_idx]


@dataclass
class EmbeddingTable:
    """Node vectors plus, for the rotation model, per-relation phases.

    dim is the model dimension: 64 for walk-based vectors, 128 for the
    rotation model, whose complex entries are stored interleaved (re, im),
    so the stored row width is 2*dim. Rows of `matrix` follow `keys`, which
    is kept in sorted order.
    """

    dim: int
    model: str
    seed: int
    view_fingerprint: str
    keys: list[str]
    matrix: np.ndarray
    relation_phases: dict[str, np.ndarray] | None = None
    isolated_keys: frozenset = frozenset()
    losses: list[float] = field(default_factory=list)

    def __post_init__(self) -> None:
        self._index = {k: i for i, k in enumerate(self.keys)}

    def vector(self, key: str) -> np.ndarray:
        return self.matrix[self._index[key]]

    def has(self, key: str) -> bool:
        return key in self._index

    def width(self) -> int:
        return self.matrix.shape[1]


def save_embedding(table: EmbeddingTable, path: str | Path) -> None:
    """JSON header line, then little-endian float64 rows in key-sorted order."""
    order = sorted(range(len(table.keys)), key=table.keys.__getitem__)
    keys_sorted = [table.keys[i] for i in order]
    header = {
        "dim": table.dim,
        "model": table.model,
        "seed": table.seed,
        "view_fingerprint": table.view_fingerprint,
        "keys": keys_sorted,
        "isolated": sorted(table.isolated_keys),
        "relations": sorted(table.relation_phases) if table.relation_phases is not None else None,
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode())
        fh.write(b"\n")
        fh.write(np.ascontiguousarray(table.matrix[order], dtype="<f8").tobytes())
        if table.relation_phases is not None:
            for rel in sorted(table.relation_phases):
                fh.write(np.ascontiguousarray(table.relation_phases[rel], dtype="<f8").tobytes())


def load_embedding(path: str | Path) -> EmbeddingTable:
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode())
        blob = fh.read()
    keys = header["keys"]
    n = len(keys)
    rel_names = header["relations"]
    row_width = _infer_row_width(header)
    matrix = np.frombuffer(blob[: 8 * n * row_width], dtype="<f8").reshape(n, row_width).copy()
    phases = None
    if rel_names is not None:
        phases = {}
        off = 8 * n * row_width
        for rel in rel_names:
            phases[rel] = np.frombuffer(blob[off : off + 8 * row_width], dtype="<f8").copy()
            off += 8 * row_width
    return EmbeddingTable(
        dim=header["dim"],
        model=header["model"],
        seed=header["seed"],
        view_fingerprint=header["view_fingerprint"],
        keys=keys,
        matrix=matrix,
        relation_phases=phases,
        isolated_keys=frozenset(header["isolated"]),
    )


def _infer_row_width(header: dict) -> int:
    return header["dim"] * (2 if header["relations"] is not None else 1)


# ---------------------------------------------------------------------------
# Biased walks
# ---------------------------------------------------------------------------


def transition_weights(
    prev, curr, neighbors: list, p: float, q: float, prev_neighbors: set | None = None
) -> np.ndarray:
    """Second-order walk probabilities over curr's neighbors.

    Weight 1/p to step back to prev, 1 to a neighbor of prev (triangle), 1/q
    otherwise. prev_neighbors supplies the triangle test; prev=None means the
    walk just started and the distribution is uniform.
    """
    if p <= 0 or q <= 0:
        raise ConfigError(f"p and q must be positive, got p={p}, q={q}")
    if not neighbors:
        raise ConfigError("neighbors must be non-empty")
    if prev is None:
        w = np.ones(len(neighbors))
    else:
        pn = prev_neighbors or set()
        w = np.empty(len(neighbors))
        for i, nb in enumerate(neighbors):
            if nb == prev:
                w[i] = 1.0 / p
            elif nb in pn:
                w[i] = 1.0
            else:
                w[i] = 1.0 / q
    return w / w.sum()


def node2vec_walks(
    view: GraphView,
    walk_length: int = 40,
    walks_per_node: int = 10,
    p: float = 1.0,
    q: float = 1.0,
    seed: int = 0,
) -> WalkCorpus:
    """walks_per_node walks from every node, each with its own seeded stream."""
    if p <= 0 or q <= 0:
        raise ConfigError(f"p and q must be positive, got p={p}, q={q}")
    indptr, nbrs = view.undirected_csr()
    uniform = p == 1.0 and q == 1.0
    walks: list[np.ndarray] = []
    for node in range(view.n):
        lo, hi = indptr[node], indptr[node + 1]
        for wi in range(walks_per_node):
            rng = np.random.default_rng(np.random.SeedSequence(entropy=(seed, node, wi)))
            if hi == lo:
                walks.append(np.array([node], dtype=np.int64))
                continue
            u = rng.random(walk_length)
            walk = np.empty(walk_length, dtype=np.int64)
            walk[0] = node
            prev = -1
            curr = node
            for step in range(1, walk_length):
                a, b = indptr[curr], indptr[curr + 1]
                ns = nbrs[a:b]
                if uniform or prev < 0:
                    nxt = ns[int(u[step] * len(ns))]
                else:
                    # triangle test: ns entries present in prev's sorted list
                    pn = nbrs[indptr[prev] : indptr[prev + 1]]
                    hits = np.searchsorted(pn, ns)
                    tri = (hits < len(pn)) & (pn[np.minimum(hits, len(pn) - 1)] == ns)
                    w = np.where(tri, 1.0, 1.0 / q)
                    w[ns == prev] = 1.0 / p
                    cum = np.cumsum(w)
                    nxt = ns[int(np.searchsorted(cum, u[step] * cum[-1], side="right"))]
                walk[step] = nxt
                prev, curr = curr, int(nxt)
            walks.append(walk)
    return WalkCorpus(
        node_keys=list(view.node_keys),
        walks_idx=walks,
        walk_length=walk_length,
        walks_per_node=walks_per_node,
        p=p,
        q=q,
        seed=seed,
    )


# ---------------------------------------------------------------------------
# Skip-gram with negative sampling
# ---------------------------------------------------------------------------


def _softplus(x: np.ndarray | float) -> np.ndarray | float:
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def _sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sgns_loss(center: np.ndarray, context: np.ndarray, negatives: np.ndarray) -> float:
    """-log s(c.o) - sum -log s(-c.n); the quantity the trainer descends."""
    pos = float(center @ context)
    negs = negatives @ center
    return float(_softplus(-pos) + _softplus(negs).sum())


def sgns_grads(center, context, negatives):
    """Analytic gradients of sgns_loss wrt (center, context, negatives)."""
    pos = float(center @ context)
    g_pos = float(_sigmoid(np.array(pos))) - 1.0
    negs = negatives @ center
    g_negs = np.asarray(_sigmoid(negs))
    g_center = g_pos * context + g_negs @ negatives
    g_context = g_pos * center
    g_negatives = g_negs[:, None] * center[None, :]
    return g_center, g_context, g_negatives


@njit(cache=True)
def _sgns_epoch(
    w_in, w_out, centers, contexts, neg_table, negatives,
    lr0, lr1, step_offset, total_steps, seed,
):  # pragma: no cover
    np.random.seed(seed)
    d = w_in.shape[1]
    total = 0.0
    tsize = len(neg_table)
    e = np.empty(d)
    for idx in range(len(centers)):
        c = centers[idx]
        o = contexts[idx]
        lr = lr0 + (lr1 - lr0) * ((step_offset + idx) / total_steps)
        for k in range(d):
            e[k] = 0.0
        for k in range(negatives + 1):
            if k == 0:
                target = o
                label = 1.0
            else:
                target = neg_table[np.random.randint(0, tsize)]
                if target == o:
                    continue
                label = 0.0
            f = 0.0
            for j in range(d):
                f += w_in[c, j] * w_out[target, j]
            # stable softplus pieces of the loss
            if label == 1.0:
                x = -f
            else:
                x = f
            if x > 0:
                total += x + np.log1p(np.exp(-x))
            else:
                total += np.log1p(np.exp(x))
            if f >= 0:
                sig = 1.0 / (1.0 + np.exp(-f))
            else:
                ef = np.exp(f)
                sig = ef / (1.0 + ef)
            g = sig - label
            for j in range(d):
                e[j] += g * w_out[target, j]
                w_out[target, j] -= lr * g * w_in[c, j]
        for j in range(d):
            w_in[c, j] -= lr * e[j]
    return total / max(1, len(centers))


def _window_pairs(corpus: WalkCorpus, window: int) -> tuple[np.ndarray, np.ndarray]:
    full = [w for w in corpus.walks_idx if len(w) == corpus.walk_length]
    centers: list[np.ndarray] = []
    contexts: list[np.ndarray] = []
    if full:
        mat = np.stack(full)
        for off in range(1, window + 1):
            if off >= mat.shape[1]:
                break
            a = mat[:, :-off].ravel()
            b = mat[:, off:].ravel()
            centers += [a, b]
            contexts += [b, a]
    # short walks (isolated starts) contribute no pairs
    if not centers:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    return np.concatenate(centers), np.concatenate(contexts)


def train_skipgram(
    corpus: WalkCorpus,
    dim: int = 64,
    window: int = 5,
    negatives_per_positive: int = 5,
    epochs: int = 5,
    lr: float = 0.025,
    seed: int = 0,
    view_fingerprint: str = "",
    isolated_keys: frozenset = frozenset(),
) -> EmbeddingTable:
    """SGD on the skip-gram negative-sampling objective; unigram^0.75 negatives."""
    n = len(corpus.node_keys)
    if n == 0:
        raise ConfigError("empty corpus")
    rng = np.random.default_rng(np.random.SeedSequence(entropy=(seed, 0xE)))
    w_in = (rng.random((n, dim)) - 0.5) / dim
    w_out = np.zeros((n, dim))

    counts = np.zeros(n, dtype=np.float64)
    for w in corpus.walks_idx:
        np.add.at(counts, w, 1.0)
    weighted = counts**0.75
    total = weighted.sum()
    if total == 0:
        raise ConfigError("corpus has no tokens")
    cum = np.cumsum(weighted / total)
    neg_table = np.searchsorted(cum, (np.arange(_NEG_TABLE_SIZE) + 0.5) / _NEG_TABLE_SIZE).astype(np.int64)
    neg_table = np.minimum(neg_table, n - 1)

    centers, contexts = _window_pairs(corpus, window)
    losses: list[float] = []
    # the negative stream reuses one seed every epoch; with a fixed pair
    # order that makes the recorded objective deterministic, so the epoch
    # losses decay smoothly instead of wandering with resampled negatives
    neg_seed = (seed * 1000003 + 12345) % (2**31 - 1)
    total_steps = max(1, epochs * len(centers))
    for epoch in range(epochs):
        if len(centers) == 0:
            losses.append(0.0)
            continue
        w_in_prev, w_out_prev = w_in.copy(), w_out.copy()
        loss = _sgns_epoch(
            w_in, w_out, centers, contexts, neg_table,
            negatives_per_positive, lr, lr * 0.05,
            epoch * len(centers), total_steps, neg_seed,
        )
        if not np.isfinite(loss):
            raise NumericError(f"skip-gram loss became non-finite at epoch {epoch}")
        losses.append(float(loss))
        # plateau stop: once the trailing 5-epoch mean loss would rise, the
        # extra pass is inflating embedding norms, not improving fit. Drop
        # the offending epoch and keep the previous weights.
        if len(losses) >= 6:
            if np.mean(losses[-5:]) > np.mean(losses[-6:-1]):
                w_in, w_out = w_in_prev, w_out_prev
                losses.pop()
                break
    return EmbeddingTable(
        dim=dim,
        model="node2vec",
        seed=seed,
        view_fingerprint=view_fingerprint,
        keys=list(corpus.node_keys),
        matrix=w_in,
        isolated_keys=isolated_keys,
        losses=losses,
    )


def train_node2vec(view: GraphView, seed: int, epochs: int = 2, **hyper) -> EmbeddingTable:
    """Walks + skip-gram over a view, with the standard defaults."""
    corpus = node2vec_walks(
        view,
        walk_length=hyper.get("walk_length", 40),
        walks_per_node=hyper.get("walks_per_node", 10),
        p=hyper.get("p", 1.0),
        q=hyper.get("q", 1.0),
        seed=seed,
    )
    return train_skipgram(
        corpus,
        dim=hyper.get("dim", 64),
        window=hyper.get("window", 5),
        negatives_per_positive=hyper.get("negatives", 5),
        epochs=epochs,
        lr=hyper.get("lr", 0.025),
        seed=seed,
        view_fingerprint=view.fingerprint,
        isolated_keys=frozenset(view.isolated),
    )


# ---------------------------------------------------------------------------
# Rotation model
# ---------------------------------------------------------------------------


def rotate_score(head: np.ndarray, relation_angles: np.ndarray, tail: np.ndarray) -> float:
    """L1 norm of the complex residual h*e^{i theta} - t."""
    h = np.asarray(head, dtype=np.complex128)
    t = np.asarray(tail, dtype=np.complex128)
    theta = np.asarray(relation_angles, dtype=np.float64)
    if h.shape != t.shape or h.shape != theta.shape:
        raise ConfigError(f"dim mismatch: head {h.shape}, angles {theta.shape}, tail {t.shape}")
    r = np.exp(1j * theta)
    return float(np.abs(h * r - t).sum())


def _rotate_margin_loss_and_grads(h, r, t, hn, tn, margin):
    """Margin ranking loss for one positive against one negative, complex form.

    All inputs are complex vectors; r must be unit modulus. Returns loss and
    gradients wrt (h, r, t, hn, tn) as complex arrays whose real/imag parts
    are the partials wrt the stored real/imag components.
    """
    zp = h * r - t
    zn = hn * r - tn
    sp = np.abs(zp).sum()
    sn = np.abs(zn).sum()
    loss = margin + sp - sn
    if loss <= 0:
        zero = np.zeros_like(h)
        return 0.0, zero, zero.copy(), zero.copy(), zero.copy(), zero.copy()
    up = zp / np.maximum(np.abs(zp), 1e-12)
    un = zn / np.maximum(np.abs(zn), 1e-12)
    g_h = up * np.conj(r)
    g_t = -up
    g_hn = -(un * np.conj(r))
    g_tn = un
    g_r = up * np.conj(h) - un * np.conj(hn)
    return float(loss), g_h, g_r, g_t, g_hn, g_tn


def train_rotate(
    view: GraphView,
    dim: int = 128,
    margin: float = 6.0,
    negatives_per_positive: int = 8,
    epochs: int = 30,
    lr: float = 0.03,
    seed: int = 0,
    batch_size: int = 1024,
) -> EmbeddingTable:
    """Margin ranking over uniform, filtered corruptions; phases reprojected
    to unit modulus after every step."""
    heads, rel_ids, tails, rels = view.triples()
    if len(heads) == 0:
        raise ConfigError("view has no triples")
    n, d = view.n, dim
    rng = np.random.default_rng(np.random.SeedSequence(entropy=(seed, 0xA0)))
    ent = (rng.random((n, d)) - 0.5) * 0.1 + 1j * (rng.random((n, d)) - 0.5) * 0.1
    phase = np.exp(1j * rng.uniform(-np.pi, np.pi, size=(len(rels), d)))
    true_set = set(zip(heads.tolist(), rel_ids.tolist(), tails.tolist()))

    m = len(heads)
    losses: list[float] = []
    for epoch in range(epochs):
        order = rng.permutation(m)
        epoch_loss = 0.0
        for lo in range(0, m, batch_size):
            idx = order[lo : lo + batch_size]
            bh, br, bt = heads[idx], rel_ids[idx], tails[idx]
            b = len(idx)
            # negatives: corrupt head or tail uniformly; resample collisions
            nh = np.repeat(bh, negatives_per_positive)
            nt = np.repeat(bt, negatives_per_positive)
            nr = np.repeat(br, negatives_per_positive)
            corrupt_head = rng.random(b * negatives_per_positive) < 0.5
            repl = rng.integers(0, n, size=b * negatives_per_positive)
            for _ in range(4):  # filtered sampling: avoid true triples
                cand_h = np.where(corrupt_head, repl, nh)
                cand_t = np.where(corrupt_head, nt, repl)
                bad = np.fromiter(
                    ((int(a), int(r_), int(c)) in true_set for a, r_, c in zip(cand_h, nr, cand_t)),
                    dtype=bool,
                    count=b * negatives_per_positive,
                )
                if not bad.any():
                    break
                repl = np.where(bad, rng.integers(0, n, size=b * negatives_per_positive), repl)
            cand_h = np.where(corrupt_head, repl, nh)
            cand_t = np.where(corrupt_head, nt, repl)

            H = ent[nh]
            T = ent[nt]
            R = phase[nr]
            HN = ent[cand_h]
            TN = ent[cand_t]
            zp = H * R - T
            zn = HN * R - TN
            sp = np.abs(zp).sum(axis=1)
            sn = np.abs(zn).sum(axis=1)
            viol = margin + sp - sn
            act = viol > 0
            epoch_loss += float(np.maximum(viol, 0.0).sum())
            if act.any():
                up = np.where(act[:, None], zp / np.maximum(np.abs(zp), 1e-12), 0)
                un = np.where(act[:, None], zn / np.maximum(np.abs(zn), 1e-12), 0)
                scale = lr / negatives_per_positive
                g_ent = np.zeros_like(ent)
                np.add.at(g_ent, nh, up * np.conj(R))
                np.add.at(g_ent, nt, -up)
                np.add.at(g_ent, cand_h, -(un * np.conj(R)))
                np.add.at(g_ent, cand_t, un)
                g_phase = np.zeros_like(phase)
                np.add.at(g_phase, nr, up * np.conj(H) - un * np.conj(HN))
                ent -= scale * g_ent
                phase -= scale * g_phase
                # project phases back to the unit circle
                mod = np.abs(phase)
                phase = np.where(mod < 1e-12, 1.0 + 0j, phase / np.maximum(mod, 1e-12))
        if not np.isfinite(epoch_loss):
            raise NumericError(f"rotation loss became non-finite at epoch {epoch}")
        losses.append(epoch_loss / m)

    matrix = np.empty((n, 2 * d))
    matrix[:, 0::2] = ent.real
    matrix[:, 1::2] = ent.imag
    phases = {}
    for ri, rel in enumerate(rels):
        row = np.empty(2 * d)
        row[0::2] = phase[ri].real
        row[1::2] = phase[ri].imag
        phases[rel] = row
    return EmbeddingTable(
        dim=dim,
        model="rotate",
        seed=seed,
        view_fingerprint=view.fingerprint,
        keys=list(view.node_keys),
        matrix=matrix,
        relation_phases=phases,
        isolated_keys=frozenset(view.isolated),
        losses=losses,
    )
