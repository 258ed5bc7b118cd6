"""Prefabricated augmentation pool semantics."""

import numpy as np
import pytest

from contragen.augment import KINDS, AugmentationPolicy, apply_augmentation
from contragen.graphdata import Graph, canonical_edges


def ring(n, d=3):
    edges = [(i, (i + 1) % n) for i in range(n)]
    g = Graph(n=n, edges=canonical_edges(edges, n), x=np.arange(n * d, dtype=np.float64).reshape(n, d))
    return g


def test_policy_validates_kind_and_ratio():
    AugmentationPolicy(kind1="subgraph", kind2="edgepert", ratio=0.3)
    with pytest.raises(ValueError):
        AugmentationPolicy(kind1="dropout", kind2="nodedrop", ratio=0.2)
    with pytest.raises(ValueError):
        AugmentationPolicy(kind1="nodedrop", kind2="nodedrop", ratio=1.5)


def test_identical_returns_graph_unchanged(rng):
    g = ring(6)
    out = apply_augmentation(g, "identical", 0.9, rng)
    assert out is g


def test_ratio_zero_equals_identical_for_every_kind(rng):
    g = ring(8)
    for kind in KINDS:
        out = apply_augmentation(g, kind, 0.0, rng)
        assert out.n == g.n
        np.testing.assert_array_equal(out.edges, g.edges)
        np.testing.assert_array_equal(out.x, g.x)


def test_unknown_kind_rejected(rng):
    with pytest.raises(ValueError, match="edgeflip"):
        apply_augmentation(ring(5), "edgeflip", 0.2, rng)


def test_nodedrop_keeps_expected_count(rng):
    out = apply_augmentation(ring(10), "nodedrop", 0.2, rng)
    assert out.n == 8


def test_nodedrop_never_empties(rng):
    out = apply_augmentation(ring(4), "nodedrop", 1.0, rng)
    assert out.n == 1


def test_nodedrop_is_induced_subgraph(rng):
    g = ring(9)
    for _ in range(20):
        out = apply_augmentation(g, "nodedrop", 0.3, rng)
        # every surviving feature row exists in the original, order preserved
        rows = {tuple(r) for r in g.x}
        assert all(tuple(r) in rows for r in out.x)
        # edges of the output map to original edges under the feature identity
        orig = {tuple(e) for e in map(tuple, g.edges)}
        row_of = {tuple(r): i for i, r in enumerate(map(tuple, g.x))}
        for a, b in out.edges:
            ia, ib = row_of[tuple(out.x[a])], row_of[tuple(out.x[b])]
            assert (min(ia, ib), max(ia, ib)) in orig


def test_subgraph_target_size(rng):
    g = ring(10)
    out = apply_augmentation(g, "subgraph", 0.2, rng)
    assert out.n == 8  # ceil(0.8 * 10)


def test_subgraph_survives_isolated_nodes(rng):
    g = Graph(n=6, edges=np.zeros((0, 2), dtype=np.int64), x=np.eye(6))
    out = apply_augmentation(g, "subgraph", 0.5, rng)
    assert out.n == 3
    assert out.num_edges == 0


def test_edgepert_preserves_edge_count(rng):
    g = ring(12)
    for _ in range(20):
        out = apply_augmentation(g, "edgepert", 0.25, rng)
        assert out.n == g.n
        assert out.num_edges == g.num_edges


def test_edgepert_symmetric_difference_bound(rng):
    g = ring(12)
    budget = int(np.floor(0.25 * g.num_edges))
    orig = {tuple(e) for e in map(tuple, g.edges)}
    for _ in range(20):
        out = apply_augmentation(g, "edgepert", 0.25, rng)
        new = {tuple(e) for e in map(tuple, out.edges)}
        assert len(orig ^ new) <= 2 * budget


def test_attrmask_zeroes_rows(rng):
    g = ring(10)
    out = apply_augmentation(g, "attrmask", 0.3, rng)
    zeroed = int((out.x == 0).all(axis=1).sum())
    assert zeroed == 3
    np.testing.assert_array_equal(out.edges, g.edges)


def test_outputs_are_valid_graphs(rng):
    g = ring(11)
    for kind in KINDS:
        for ratio in (0.1, 0.5, 0.9):
            out = apply_augmentation(g, kind, ratio, rng)
            assert out.n >= 1
            if out.num_edges:
                assert out.edges.min() >= 0
                assert out.edges.max() < out.n
                assert (out.edges[:, 0] < out.edges[:, 1]).all()
                as_set = {tuple(e) for e in map(tuple, out.edges)}
                assert len(as_set) == out.num_edges
            assert out.x.shape[0] == out.n


def test_deterministic_under_seed():
    g = ring(10)
    for kind in KINDS:
        a = apply_augmentation(g, kind, 0.4, np.random.default_rng(5))
        b = apply_augmentation(g, kind, 0.4, np.random.default_rng(5))
        assert a.n == b.n
        np.testing.assert_array_equal(a.edges, b.edges)
        np.testing.assert_array_equal(a.x, b.x)
