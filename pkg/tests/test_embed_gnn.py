"""Message-passing encoder tests: hand-computed layers, finite-difference
gradient checks over every parameter, early stopping, inductive inference,
and checkpoint round trips."""

import csv

import numpy as np
import pytest
import scipy.sparse as sp

from conftest import view_from_edges
from relcap.embed_gnn import (
    GnnModel,
    _backward,
    _forward,
    _mse_and_grad,
    _row_normalize,
    infer_inductive,
    init_params,
    load_gnn,
    mean_adjacency,
    oversmoothing_probe,
    relation_adjacencies,
    rgcn_layer,
    sage_layer,
    save_gnn,
    train_gnn,
)
from relcap.errors import ConfigError
from relcap.kg import inductive_mask

TYPED_EDGES = [
    ("ps:a:2023", "MEMBER_OF_TEAM", "team:t1"),
    ("ps:b:2023", "MEMBER_OF_TEAM", "team:t1"),
    ("ps:c:2023", "MEMBER_OF_TEAM", "team:t2"),
    ("ps:a:2023", "REPRESENTED_BY", "agent:g1"),
    ("ps:b:2023", "REPRESENTED_BY", "agent:g2"),
    ("ps:c:2023", "REPRESENTED_BY", "agent:g2"),
    ("player:a", "PLAYS_SEASON", "ps:a:2023"),
    ("player:b", "PLAYS_SEASON", "ps:b:2023"),
    ("player:c", "PLAYS_SEASON", "ps:c:2023"),
]


# ---------------------------------------------------------------------------
# layers
# ---------------------------------------------------------------------------


def test_sage_layer_hand_example():
    # 3 nodes: 0-1 edge, node 2 isolated
    x = np.array([[1.0, 2.0], [3.0, -1.0], [0.5, 0.5]])
    adj = _row_normalize(sp.csr_matrix((np.ones(2), ([0, 1], [1, 0])), shape=(3, 3)))
    w_self = np.array([[1.0, 0.0], [0.0, -1.0]])
    w_neigh = np.array([[0.5, 0.5], [1.0, 1.0]])
    out = sage_layer(x, adj, w_self, w_neigh)
    # node 0: self (1, -2), neigh mean (3,-1) -> (1, 2); relu(2, 0)
    # node 1: self (3, 1), neigh (1,2) -> (1.5, 3); relu(4.5, 4)
    # node 2: self (0.5, -0.5), no neighbors -> zero term; relu(0.5, 0)
    expected = np.array([[2.0, 0.0], [4.5, 4.0], [0.5, 0.0]])
    assert np.allclose(out, expected, atol=1e-15)


def test_rgcn_multiplicity_normalization_cancels():
    # one neighbor under one relation: multiplicity 3 and 1 agree
    x = np.array([[0.0, 1.0], [2.0, 3.0]])
    w_self = np.eye(2)
    w_rel = {"R": np.array([[1.0, 1.0], [0.0, 2.0]])}
    adj_m1 = _row_normalize(sp.csr_matrix((np.array([1.0, 1.0]), ([0, 1], [1, 0])), shape=(2, 2)))
    adj_m3 = _row_normalize(sp.csr_matrix((np.array([3.0, 3.0]), ([0, 1], [1, 0])), shape=(2, 2)))
    out1 = rgcn_layer(x, {"R": adj_m1}, w_self, w_rel)
    out3 = rgcn_layer(x, {"R": adj_m3}, w_self, w_rel)
    assert np.array_equal(out1, out3)
    # node 0: self (0,1) + W_R (2,3) = (0,1) + (5,6) = (5,7)
    assert np.allclose(out1[0], [5.0, 7.0])


def test_rgcn_two_relations_sum():
    x = np.array([[1.0], [2.0], [4.0]])
    a1 = _row_normalize(sp.csr_matrix((np.ones(2), ([0, 1], [1, 0])), shape=(3, 3)))
    a2 = _row_normalize(sp.csr_matrix((np.ones(2), ([0, 2], [2, 0])), shape=(3, 3)))
    w_self = np.array([[1.0]])
    w_rel = {"A": np.array([[10.0]]), "B": np.array([[100.0]])}
    out = rgcn_layer(x, {"A": a1, "B": a2}, w_self, w_rel)
    # node 0: 1 + 10*2 + 100*4 = 421
    assert out[0, 0] == pytest.approx(421.0)


def test_sage_permutation_equivariance(rng):
    n, d = 7, 5
    x = rng.normal(size=(n, d))
    dense = (rng.random((n, n)) < 0.4).astype(float)
    np.fill_diagonal(dense, 0)
    dense = np.maximum(dense, dense.T)
    adj = _row_normalize(sp.csr_matrix(dense))
    w_self, w_neigh = rng.normal(size=(4, d)), rng.normal(size=(4, d))
    perm = rng.permutation(n)
    p_mat = np.eye(n)[perm]
    adj_p = _row_normalize(sp.csr_matrix(p_mat @ dense @ p_mat.T))
    out = sage_layer(x, adj, w_self, w_neigh)
    out_p = sage_layer(p_mat @ x, adj_p, w_self, w_neigh)
    assert np.allclose(out_p, p_mat @ out, atol=1e-12)


# ---------------------------------------------------------------------------
# gradients
# ---------------------------------------------------------------------------


def _fd_check(kind, view, pairs, seed, hidden=4):
    relations = tuple(view.relations()) if kind == "rgcn" else ()
    variant = "V2Full_SG" if kind == "rgcn" else "V2_Trans"
    params = init_params(variant, view.features.shape[1], relations, hidden, seed)
    mean_adj = mean_adjacency(view) if kind == "sage" else None
    rel_adj = relation_adjacencies(view) if kind == "rgcn" else None
    idx = np.array([view.index[k] for k, _ in pairs], dtype=np.int64)
    ys = np.array([y for _, y in pairs])

    def loss_of():
        _, yhat, _ = _forward(params, kind, view.features, mean_adj, rel_adj, 0.0)
        return _mse_and_grad(yhat, idx, ys, view.n)[0]

    _, yhat, cache = _forward(params, kind, view.features, mean_adj, rel_adj, 0.0)
    _, g_yhat = _mse_and_grad(yhat, idx, ys, view.n)
    grads = _backward(params, kind, cache, mean_adj, rel_adj, g_yhat)

    eps = 1e-5
    worst = 0.0
    for name in sorted(params):
        flat = params[name].ravel()
        ga = grads[name].ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            up = loss_of()
            flat[i] = orig - eps
            dn = loss_of()
            flat[i] = orig
            num = (up - dn) / (2 * eps)
            denom = max(abs(num), abs(ga[i]), 1e-8)
            worst = max(worst, abs(num - ga[i]) / denom)
    return worst


def test_gradcheck_sage(tmp_path):
    view = view_from_edges(tmp_path, TYPED_EDGES, variant="V2_playerseason")
    pairs = [("ps:a:2023", 15.2), ("ps:b:2023", 14.1), ("ps:b:2023", 14.5)]
    assert _fd_check("sage", view, pairs, seed=3) < 1e-4


def test_gradcheck_rgcn(tmp_path):
    view = view_from_edges(tmp_path, TYPED_EDGES, variant="V2Full_SG")
    pairs = [("ps:a:2023", 15.2), ("ps:c:2023", 13.7)]
    assert _fd_check("rgcn", view, pairs, seed=5) < 1e-4


def test_mse_with_repeated_keys():
    yhat = np.array([2.0, 5.0])
    idx = np.array([0, 0, 1])
    ys = np.array([1.0, 3.0, 5.0])
    loss, g = _mse_and_grad(yhat, idx, ys, 2)
    assert loss == pytest.approx((1.0 + 1.0 + 0.0) / 3)
    # node 0 carries residuals +1 and -1, which cancel; node 1 is exact
    assert np.allclose(g, [0.0, 0.0])


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------


def _label_pairs(view, keys, values):
    return list(zip(keys, values))


def test_train_gnn_fits_and_logs(tmp_path):
    view = view_from_edges(tmp_path, TYPED_EDGES, variant="V2Full_SG")
    train_pairs = [("ps:a:2023", 16.0), ("ps:b:2023", 14.0)]
    val_pairs = [("ps:c:2023", 15.0)]
    model, table, log = train_gnn(view, "V2Full_SG", train_pairs, val_pairs, max_epochs=120, seed=1)
    assert model.kind == "rgcn"
    assert table.matrix.shape == (view.n, 64)
    assert len(log.rows) <= 120
    # best epoch is the argmin of recorded val losses, and training improved
    vals = [r[2] for r in log.rows]
    assert log.best_epoch == int(np.argmin(vals))
    assert min(vals) < vals[0]
    csv_path = tmp_path / "log.csv"
    log.write_csv(csv_path)
    with open(csv_path) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == len(log.rows)
    assert sum(int(r["is_best"]) for r in rows) == 1


def test_train_gnn_constant_labels(tmp_path):
    view = view_from_edges(tmp_path, TYPED_EDGES, variant="V2_playerseason")
    pairs = [("ps:a:2023", 15.0), ("ps:b:2023", 15.0), ("ps:c:2023", 15.0)]
    model, _, log = train_gnn(view, "V2_Trans", pairs, pairs, max_epochs=150, seed=2)
    assert log.rows[-1][1] < 1e-3 or min(r[1] for r in log.rows) < 1e-3


def test_train_gnn_deterministic(tmp_path):
    view = view_from_edges(tmp_path, TYPED_EDGES, variant="V2Full_MG")
    train_pairs = [("ps:a:2023", 16.0), ("ps:b:2023", 14.0)]
    val_pairs = [("ps:c:2023", 15.0)]
    m1, t1, _ = train_gnn(view, "V2Full_MG", train_pairs, val_pairs, max_epochs=40, seed=7)
    m2, t2, _ = train_gnn(view, "V2Full_MG", train_pairs, val_pairs, max_epochs=40, seed=7)
    p1, p2 = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
    save_gnn(m1, p1)
    save_gnn(m2, p2)
    assert p1.read_bytes() == p2.read_bytes()
    assert np.array_equal(t1.matrix, t2.matrix)


def test_train_gnn_early_stops(tmp_path):
    view = view_from_edges(tmp_path, TYPED_EDGES, variant="V2Full_SG")
    # adversarial validation target: early stop must trigger well before cap
    train_pairs = [("ps:a:2023", 16.0), ("ps:b:2023", 14.0)]
    val_pairs = [("ps:c:2023", -40.0)]
    _, _, log = train_gnn(view, "V2Full_SG", train_pairs, val_pairs, max_epochs=200, patience=10, seed=3)
    assert len(log.rows) < 200


def test_train_gnn_rejects_bad_args(tmp_path):
    view = view_from_edges(tmp_path, TYPED_EDGES, variant="V2Full_SG")
    with pytest.raises(ConfigError):
        train_gnn(view, "V9", [("ps:a:2023", 1.0)], [], seed=0)
    with pytest.raises(ConfigError):
        train_gnn(view, "V2Full_SG", [], [], seed=0)
    with pytest.raises(ConfigError):
        train_gnn(view, "V2Full_SG", [("ps:zz:2023", 1.0)], [], seed=0)
    with pytest.raises(ConfigError):
        train_gnn(view, "V2Full_SG", [("ps:a:2023", 1.0)], [], max_epochs=500, seed=0)


def test_isolated_node_forward_is_self_term_only(tmp_path):
    edges = TYPED_EDGES + [("player:z", "PLAYS_SEASON", "ps:z:2030")]
    view = view_from_edges(tmp_path, edges, season=2024, variant="V2Full_SG")
    assert "player:z" in view.isolated
    model, table, _ = train_gnn(
        view, "V2Full_SG", [("ps:a:2023", 16.0)], [("ps:b:2023", 14.0)], max_epochs=5, seed=4
    )
    zi = view.index["player:z"]
    x = view.features[zi]
    h1 = np.maximum(model.params["l1.self"] @ x, 0.0)
    h2 = np.maximum(model.params["l2.self"] @ h1, 0.0)
    assert np.allclose(table.matrix[zi], h2, atol=1e-12)
    assert np.isfinite(table.matrix).all()


# ---------------------------------------------------------------------------
# inductive inference
# ---------------------------------------------------------------------------


def test_inductive_consistency_on_masked_view(tmp_path):
    full = view_from_edges(tmp_path, TYPED_EDGES, variant="V2_playerseason")
    masked = inductive_mask(full, ["ps:c:2023"]).train_view
    train_pairs = [("ps:a:2023", 16.0), ("ps:b:2023", 14.0)]
    model, table, _ = train_gnn(masked, "V2_Ind", train_pairs, train_pairs, max_epochs=30, seed=5)
    res = infer_inductive(model, masked, ["ps:a:2023"])
    assert np.allclose(res.table.vector("ps:a:2023"), table.vector("ps:a:2023"), atol=1e-12)


def test_inductive_unseen_and_isolated_flags(tmp_path):
    full = view_from_edges(
        tmp_path,
        TYPED_EDGES + [("player:z", "PLAYS_SEASON", "ps:z:2030")],
        season=2024,
        variant="V2_playerseason",
    )
    masked = inductive_mask(full, ["ps:c:2023"]).train_view
    model, _, _ = train_gnn(
        masked, "V2_Ind", [("ps:a:2023", 16.0)], [("ps:b:2023", 14.0)], max_epochs=10, seed=6
    )
    res = infer_inductive(model, full, ["ps:c:2023", "player:z"])
    assert res.table.has("ps:c:2023")
    assert "player:z" in res.structurally_isolated
    assert "ps:c:2023" not in res.structurally_isolated
    with pytest.raises(ConfigError):
        infer_inductive(model, full, ["ps:nope:2020"])


# ---------------------------------------------------------------------------
# diagnostics and serialization
# ---------------------------------------------------------------------------


def test_oversmoothing_probe_records_values():
    out = oversmoothing_probe(n_leaves=10, depths=(2, 4, 6), seed=1)
    assert set(out) == {2, 4, 6}
    for v in out.values():
        assert np.isfinite(v) and -1.0 <= v <= 1.0


def test_checkpoint_round_trip(tmp_path):
    view = view_from_edges(tmp_path, TYPED_EDGES, variant="V2Full_SG")
    model, _, _ = train_gnn(
        view, "V2Full_SG", [("ps:a:2023", 16.0)], [("ps:b:2023", 14.0)], max_epochs=8, seed=9
    )
    path = tmp_path / "m.ckpt"
    save_gnn(model, path)
    loaded = load_gnn(path)
    assert loaded.variant == model.variant and loaded.kind == model.kind
    assert loaded.relations == model.relations
    assert loaded.y_offset == model.y_offset
    assert loaded.view_fingerprint == model.view_fingerprint
    for name in model.params:
        assert np.array_equal(loaded.params[name], model.params[name])
    path2 = tmp_path / "m2.ckpt"
    save_gnn(loaded, path2)
    assert path.read_bytes() == path2.read_bytes()
