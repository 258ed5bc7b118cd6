"""Graph data model, TUDataset ingestion, synthetic generation, batching."""

import numpy as np
import pytest

from contragen.graphdata import (
    Batch,
    Dataset,
    Graph,
    canonical_edges,
    degree_onehot,
    load_tudataset,
    make_batch,
    synth_two_community,
    write_tudataset,
)


# ---------------------------------------------------------------------------
# Graph / canonical edges


def test_canonical_edges_sorts_dedupes_and_orients():
    edges = canonical_edges([(2, 0), (0, 2), (1, 0)], 3)
    np.testing.assert_array_equal(edges, [[0, 1], [0, 2]])


def test_canonical_edges_rejects_self_loop():
    with pytest.raises(ValueError):
        canonical_edges([(1, 1)], 3)


def test_canonical_edges_rejects_out_of_range():
    with pytest.raises(ValueError):
        canonical_edges([(0, 3)], 3)


def test_graph_validates_feature_rows():
    with pytest.raises(ValueError):
        Graph(n=3, edges=np.zeros((0, 2), dtype=np.int64), x=np.zeros((2, 4)))


def test_graph_adjacency_and_degrees():
    g = Graph(n=3, edges=canonical_edges([(0, 1), (1, 2)], 3), x=np.zeros((3, 1)))
    adj = g.adjacency()
    assert adj[0, 1] == adj[1, 0] == 1.0
    assert adj[0, 2] == 0.0
    np.testing.assert_array_equal(np.diag(adj), 0.0)
    np.testing.assert_array_equal(g.degrees(), [1, 2, 1])


# ---------------------------------------------------------------------------
# TUDataset loading


def test_load_fixture_counts(tud_dir):
    ds = load_tudataset(tud_dir, "tiny")
    assert len(ds.graphs) == 3
    assert [g.n for g in ds.graphs] == [3, 3, 4]
    assert sum(g.n for g in ds.graphs) == 10
    assert [g.num_edges for g in ds.graphs] == [3, 2, 3]
    assert ds.labels().tolist() == [1, 0, 1]
    assert ds.num_classes == 2


def test_load_fixture_degree_features(tud_dir):
    ds = load_tudataset(tud_dir, "tiny", max_degree=4)
    assert ds.feature_dim == 5  # degrees 0..4 one-hot
    star = ds.graphs[2]
    hub_row = star.x[np.argmax(star.degrees())]
    assert hub_row[3] == 1.0  # hub degree 3


def test_load_missing_mandatory_file(tud_dir, tmp_path):
    with pytest.raises(ValueError, match="missing_graph_indicator.txt"):
        load_tudataset(tmp_path, "missing")
    (tmp_path / "missing_graph_indicator.txt").write_text("1\n")
    with pytest.raises(ValueError, match="missing_A.txt"):
        load_tudataset(tmp_path, "missing")


def test_load_empty_indicator(tmp_path):
    (tmp_path / "e_A.txt").write_text("")
    (tmp_path / "e_graph_indicator.txt").write_text("")
    with pytest.raises(ValueError, match="no graphs"):
        load_tudataset(tmp_path, "e")


def test_load_edge_out_of_range_names_line(tmp_path):
    (tmp_path / "bad_A.txt").write_text("1, 2\n2, 1\n1, 99\n")
    (tmp_path / "bad_graph_indicator.txt").write_text("1\n1\n")
    with pytest.raises(ValueError, match="line 3"):
        load_tudataset(tmp_path, "bad")


def test_roundtrip_write_then_load(tmp_path, tud_dir):
    ds = load_tudataset(tud_dir, "tiny")
    write_tudataset(ds, tmp_path, "copy")
    back = load_tudataset(tmp_path, "copy")
    assert len(back.graphs) == len(ds.graphs)
    for a, b in zip(ds.graphs, back.graphs):
        assert a.n == b.n
        np.testing.assert_array_equal(a.edges, b.edges)
        assert a.label == b.label


def test_degree_onehot_overflow_bucket():
    oh = degree_onehot(np.array([0, 2, 7]), max_degree=4)
    assert oh.shape == (3, 5)
    assert oh[0, 0] == 1.0 and oh[1, 2] == 1.0 and oh[2, 4] == 1.0


# ---------------------------------------------------------------------------
# synthetic generator


def test_synth_two_cliques_forced_edges():
    ds = synth_two_community(1, 8, 1.0, 0.0, seed=0)
    g = ds.graphs[0]
    assert g.num_edges == 12  # two disjoint 4-cliques
    blocks = (g.edges < 4).all(axis=1) | (g.edges >= 4).all(axis=1)
    assert blocks.all()


def test_synth_empty_at_zero_probabilities():
    ds = synth_two_community(3, 8, 0.0, 0.0, seed=0)
    assert all(g.num_edges == 0 for g in ds.graphs)


def test_synth_within_block_density():
    # oracle: count within-block edges / possible within-block pairs
    ds = synth_two_community(200, 40, 0.6, 0.05, seed=7)
    label0 = [g for g in ds.graphs if g.label == 0]
    within = possible = 0
    for g in label0:
        same = ((g.edges < 20).all(axis=1)) | ((g.edges >= 20).all(axis=1))
        within += int(same.sum())
        possible += 2 * (20 * 19 // 2)
    density = within / possible
    assert abs(density - 0.6) < 0.05


def test_synth_label1_halves_density():
    ds = synth_two_community(40, 30, 0.8, 0.0, seed=3)
    m0 = np.mean([g.num_edges for g in ds.graphs if g.label == 0])
    m1 = np.mean([g.num_edges for g in ds.graphs if g.label == 1])
    assert m1 < 0.7 * m0


def test_synth_deterministic_bit_for_bit():
    a = synth_two_community(5, 12, 0.5, 0.1, seed=9)
    b = synth_two_community(5, 12, 0.5, 0.1, seed=9)
    for ga, gb in zip(a.graphs, b.graphs):
        np.testing.assert_array_equal(ga.edges, gb.edges)
        np.testing.assert_array_equal(ga.x, gb.x)


def test_synth_rejects_bad_probabilities():
    with pytest.raises(ValueError):
        synth_two_community(1, 8, 0.2, 0.5, seed=0)
    with pytest.raises(ValueError):
        synth_two_community(1, 7, 0.5, 0.1, seed=0)  # odd n_nodes


def test_synth_feature_kinds():
    deg = synth_two_community(1, 8, 0.5, 0.1, seed=0, features="degree", max_degree=4)
    assert deg.feature_dim == 5
    ones = synth_two_community(1, 8, 0.5, 0.1, seed=0, features="ones")
    assert ones.feature_dim == 1
    ident = synth_two_community(1, 8, 0.5, 0.1, seed=0, features="identity")
    np.testing.assert_array_equal(ident.graphs[0].x, np.eye(8))
    with pytest.raises(ValueError, match="spectral"):
        synth_two_community(1, 8, 0.5, 0.1, seed=0, features="spectral")


# ---------------------------------------------------------------------------
# batching


def _toy(n, edges, d=2, label=None):
    return Graph(n=n, edges=canonical_edges(edges, n), x=np.ones((n, d)), label=label)


def test_make_batch_shapes_and_graph_id():
    batch = make_batch([_toy(3, [(0, 1)]), _toy(4, [(1, 2), (0, 3)])])
    assert batch.num_nodes == 7
    np.testing.assert_array_equal(batch.graph_id, [0, 0, 0, 1, 1, 1, 1])
    np.testing.assert_array_equal(batch.sizes, [3, 4])


def test_make_batch_single_graph_adjacency():
    g = _toy(3, [(0, 1), (1, 2)])
    batch = make_batch([g])
    np.testing.assert_array_equal(batch.adj, g.adjacency())


def test_make_batch_block_diagonal_scan(rng):
    graphs = [_toy(3, [(0, 1), (1, 2)]), _toy(5, [(0, 4), (2, 3)])]
    batch = make_batch(graphs)
    for i in range(batch.num_nodes):
        for j in range(batch.num_nodes):
            if batch.graph_id[i] != batch.graph_id[j]:
                assert batch.adj[i, j] == 0.0


def test_make_batch_rejects_feature_mismatch():
    with pytest.raises(ValueError):
        make_batch([_toy(2, [], d=2), _toy(2, [], d=3)])


def test_make_batch_rejects_empty():
    with pytest.raises(ValueError):
        make_batch([])


def test_pool_matrix_sums_nodes():
    batch = make_batch([_toy(2, [(0, 1)]), _toy(3, [])])
    pm = batch.pool_matrix()
    assert pm.shape == (2, 5)
    np.testing.assert_array_equal(pm.sum(axis=1), [2, 3])
    np.testing.assert_array_equal(pm[0], [1, 1, 0, 0, 0])


def test_node_index_offsets():
    batch = make_batch([_toy(2, []), _toy(3, [])])
    np.testing.assert_array_equal(batch.node_index(1), [2, 3, 4])
