"""Probe accuracy, ranking metrics, and generator link evaluation."""

import numpy as np
import pytest

from contragen.evalkit import (
    LinkEvalSet,
    ProbeResult,
    ProbeSplit,
    auprc,
    auroc,
    eval_generator,
    kfold_splits,
    linear_probe,
    link_pred_metrics,
    make_link_eval_set,
)
from contragen.generator import init_generator_params, vgae_encode
from contragen.graphdata import Graph, canonical_edges, make_batch, synth_two_community


# ---------------------------------------------------------------------------
# independent oracles: plain double loops over score pairs


def brute_auroc(pos, neg):
    wins = 0.0
    for p in pos:
        for q in neg:
            if p > q:
                wins += 1.0
            elif p == q:
                wins += 0.5
    return wins / (len(pos) * len(neg))


def brute_auprc(pos, neg):
    thresholds = sorted(set(pos) | set(neg), reverse=True)
    area, r_prev, tp, fp = 0.0, 0.0, 0, 0
    for t in thresholds:
        tp += sum(1 for s in pos if s == t)
        fp += sum(1 for s in neg if s == t)
        recall = tp / len(pos)
        area += (recall - r_prev) * (tp / (tp + fp))
        r_prev = recall
    return area


# ---------------------------------------------------------------------------
# auroc


def test_auroc_perfect_and_inverted():
    assert auroc([0.9, 0.8], [0.2, 0.1]) == 1.0
    assert auroc([0.2, 0.1], [0.9, 0.8]) == 0.0


def test_auroc_all_tied_is_half():
    assert auroc([0.3, 0.3, 0.3], [0.3, 0.3]) == 0.5


def test_auroc_mixed_example():
    # pairs: 0.9 beats both; 0.4 beats 0.1 and loses to 0.6 -> 3 of 4
    assert auroc([0.9, 0.4], [0.6, 0.1]) == 0.75


def test_auroc_matches_pair_enumeration(rng):
    for _ in range(50):
        np_, nn = int(rng.integers(1, 21)), int(rng.integers(1, 21))
        # eighth-quantized scores create deliberate tie mass, exact in binary
        pos = list(rng.integers(0, 9, size=np_) / 8.0)
        neg = list(rng.integers(0, 9, size=nn) / 8.0)
        assert auroc(pos, neg) == brute_auroc(pos, neg)


def test_auroc_invariant_under_order_preserving_shift(rng):
    pos = list(rng.integers(0, 17, size=12) / 8.0)
    neg = list(rng.integers(0, 17, size=9) / 8.0)
    shifted = auroc([s + 10.0 for s in pos], [s + 10.0 for s in neg])
    assert shifted == auroc(pos, neg)


def test_auroc_rejects_empty_side():
    with pytest.raises(ValueError, match="at least one positive"):
        auroc([], [0.1])
    with pytest.raises(ValueError, match="at least one positive"):
        auroc([0.1], [])


# ---------------------------------------------------------------------------
# auprc


def test_auprc_perfect_separation():
    assert auprc([0.9, 0.8, 0.7], [0.3, 0.2]) == 1.0


def test_auprc_hand_computed_example():
    # thresholds 0.9, 0.6, 0.4, 0.1 -> area = 0.5 * 1 + 0.5 * 2/3
    assert auprc([0.9, 0.4], [0.6, 0.1]) == pytest.approx(5.0 / 6.0, abs=1e-12)


def test_auprc_all_tied_equals_prevalence():
    assert auprc([0.5, 0.5], [0.5, 0.5]) == 0.5


def test_auprc_matches_step_enumeration(rng):
    for _ in range(50):
        np_, nn = int(rng.integers(1, 21)), int(rng.integers(1, 21))
        pos = list(rng.integers(0, 9, size=np_) / 8.0)
        neg = list(rng.integers(0, 9, size=nn) / 8.0)
        assert auprc(pos, neg) == brute_auprc(pos, neg)


def test_auprc_bounded(rng):
    for _ in range(20):
        pos = list(rng.random(size=5))
        neg = list(rng.random(size=7))
        assert 0.0 < auprc(pos, neg) <= 1.0


def test_auprc_rejects_empty_side():
    with pytest.raises(ValueError):
        auprc([], [0.1])


def test_link_pred_metrics_pairs_both():
    got = link_pred_metrics([0.9, 0.4], [0.6, 0.1])
    assert got == (0.75, pytest.approx(5.0 / 6.0, abs=1e-12))


# ---------------------------------------------------------------------------
# k-fold splits


def test_kfold_partitions_everything():
    splits = kfold_splits(10, 3, seed=0)
    assert [len(s.test_idx) for s in splits] == [4, 3, 3]
    seen = np.concatenate([s.test_idx for s in splits])
    assert sorted(seen.tolist()) == list(range(10))
    for s in splits:
        assert np.intersect1d(s.train_idx, s.test_idx).size == 0
        assert len(s.train_idx) + len(s.test_idx) == 10


def test_kfold_bounds():
    with pytest.raises(ValueError, match="folds must lie"):
        kfold_splits(10, 1, seed=0)
    with pytest.raises(ValueError, match="folds must lie"):
        kfold_splits(10, 11, seed=0)


def test_kfold_seed_controls_assignment():
    a = kfold_splits(12, 4, seed=0)
    b = kfold_splits(12, 4, seed=0)
    c = kfold_splits(12, 4, seed=1)
    assert all((x.test_idx == y.test_idx).all() for x, y in zip(a, b))
    assert any((x.test_idx != y.test_idx).any() for x, y in zip(a, c))


def test_probe_split_rejects_overlap():
    with pytest.raises(ValueError, match="overlap"):
        ProbeSplit(train_idx=np.array([0, 1, 2]), test_idx=np.array([2, 3]))


# ---------------------------------------------------------------------------
# linear probe


def blobs(n_per, centers, spread, seed):
    rng = np.random.default_rng(seed)
    xs, ys = [], []
    for label, c in enumerate(centers):
        xs.append(rng.normal(loc=c, scale=spread, size=(n_per, len(c))))
        ys.append(np.full(n_per, label))
    return np.concatenate(xs), np.concatenate(ys)


def test_probe_separable_data_is_perfect():
    x, y = blobs(10, [(-5.0, 0.0), (5.0, 0.0)], 0.1, seed=0)
    res = linear_probe(x, y, kfold_splits(20, 4, seed=0))
    assert res.per_fold == [1.0, 1.0, 1.0, 1.0]
    assert res.mean == 1.0
    assert res.sd == 0.0
    assert res.skipped == []


def test_probe_shuffled_labels_near_chance():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(40, 6))
    y = rng.integers(0, 2, size=40)
    res = linear_probe(x, y, kfold_splits(40, 4, seed=1))
    assert 0.2 <= res.mean <= 0.8


def test_probe_matches_replayed_descent():
    # replay the full-batch descent with explicit loops on one small fold
    x, y = blobs(4, [(-2.0, 1.0), (2.0, -1.0)], 0.6, seed=5)
    split = ProbeSplit(train_idx=np.arange(6), test_idx=np.arange(6, 8))
    res = linear_probe(x, y, [split], seed=11)

    xtr, ytr = x[:6], y[:6]
    mu, sd = xtr.mean(axis=0), xtr.std(axis=0)
    sd = np.where(sd < 1e-8, 1.0, sd)
    xtr = (xtr - mu) / sd
    xte = (x[6:] - mu) / sd
    rng = np.random.default_rng(11)
    w = rng.normal(0.0, 1e-3, size=(2, 2))
    b = np.zeros(2)
    onehot = np.zeros((6, 2))
    onehot[np.arange(6), ytr] = 1.0
    for _ in range(300):
        logits = xtr @ w + b
        logits = logits - logits.max(axis=1, keepdims=True)
        e = np.exp(logits)
        probs = e / e.sum(axis=1, keepdims=True)
        err = (probs - onehot) / 6
        w = w - 0.5 * (xtr.T @ err + 1e-3 * w)
        b = b - 0.5 * err.sum(axis=0)
    pred = np.argmax(xte @ w + b, axis=1)
    assert res.per_fold == [float(np.mean(pred == y[6:]))]


def test_probe_deterministic():
    x, y = blobs(8, [(-1.0, 0.5), (1.5, -0.5)], 1.0, seed=2)
    splits = kfold_splits(16, 4, seed=7)
    a = linear_probe(x, y, splits, seed=3)
    b = linear_probe(x, y, splits, seed=3)
    assert a.per_fold == b.per_fold


def test_probe_joint_permutation_invariance():
    x, y = blobs(8, [(-2.0, 0.0), (2.0, 0.0)], 0.5, seed=4)
    splits = kfold_splits(16, 4, seed=2)
    base = linear_probe(x, y, splits, seed=0)

    perm = np.random.default_rng(9).permutation(16)
    inv = np.argsort(perm)
    remapped = [ProbeSplit(train_idx=np.sort(inv[s.train_idx]),
                           test_idx=np.sort(inv[s.test_idx])) for s in splits]
    moved = linear_probe(x[perm], y[perm], remapped, seed=0)
    assert moved.per_fold == base.per_fold


def test_probe_skips_single_class_fold():
    x = np.array([[0.0, 1.0], [0.1, 1.1], [5.0, -1.0], [5.1, -0.9]])
    y = np.array([0, 0, 1, 1])
    bad = ProbeSplit(train_idx=np.array([0, 1]), test_idx=np.array([2, 3]))
    good = ProbeSplit(train_idx=np.array([0, 2]), test_idx=np.array([1, 3]))
    res = linear_probe(x, y, [bad, good])
    assert res.skipped == [0]
    assert len(res.per_fold) == 1


def test_probe_shape_mismatch():
    with pytest.raises(ValueError, match="3 embeddings but 2 labels"):
        linear_probe(np.zeros((3, 2)), np.array([0, 1]), [])


def test_probe_result_empty_is_nan():
    res = ProbeResult()
    assert np.isnan(res.mean) and np.isnan(res.sd)


# ---------------------------------------------------------------------------
# link evaluation sets


def test_link_eval_set_counts_and_disjointness(rng):
    g = synth_two_community(1, 30, 0.5, 0.1, seed=2).graphs[0]
    held = make_link_eval_set(g, 0.1, rng)
    k = int(np.floor(0.1 * g.num_edges))
    assert held.pos_pairs.shape == (k, 2)
    assert held.neg_pairs.shape == (k, 2)
    present = g.edge_set()
    for a, b in held.pos_pairs:
        assert (int(a), int(b)) in present
    for a, b in held.neg_pairs:
        assert (int(a), int(b)) not in present
    assert len({(int(a), int(b)) for a, b in held.neg_pairs}) == k


def test_link_eval_set_minimum_one_edge(rng):
    g = Graph(n=6, edges=canonical_edges([(0, 1), (2, 3), (4, 5)], 6), x=np.eye(6))
    held = make_link_eval_set(g, 0.05, rng)  # floor(0.15) = 0 -> bumped to 1
    assert held.pos_pairs.shape == (1, 2)


def test_link_eval_set_fraction_bounds(rng):
    g = Graph(n=4, edges=canonical_edges([(0, 1), (1, 2)], 4), x=np.eye(4))
    for bad in (0.0, 1.0, -0.2):
        with pytest.raises(ValueError, match="fraction must lie"):
            make_link_eval_set(g, bad, rng)


def test_link_eval_set_needs_two_edges(rng):
    g = Graph(n=3, edges=canonical_edges([(0, 1)], 3), x=np.eye(3))
    with pytest.raises(ValueError, match="at least 2 edges"):
        make_link_eval_set(g, 0.5, rng)


def test_link_eval_set_complete_graph_has_no_negatives(rng):
    edges = [(i, j) for i in range(4) for j in range(i + 1, 4)]
    g = Graph(n=4, edges=canonical_edges(edges, 4), x=np.eye(4))
    with pytest.raises(ValueError, match="not enough non-edges"):
        make_link_eval_set(g, 0.2, rng)


def test_link_eval_set_deterministic():
    g = synth_two_community(1, 20, 0.6, 0.1, seed=0).graphs[0]
    a = make_link_eval_set(g, 0.2, np.random.default_rng(5))
    b = make_link_eval_set(g, 0.2, np.random.default_rng(5))
    assert (a.pos_pairs == b.pos_pairs).all()
    assert (a.neg_pairs == b.neg_pairs).all()


# ---------------------------------------------------------------------------
# generator link prediction


def test_eval_generator_zero_weights_scores_half(rng):
    g = synth_two_community(1, 16, 0.6, 0.1, seed=1).graphs[0]
    params = init_generator_params(g.x.shape[1], 8, 2, 4, np.random.default_rng(0))
    for t in params.tensors():
        t.values[:] = 0.0
    held = make_link_eval_set(g, 0.2, rng)
    roc, prc = eval_generator(g, params, held)
    assert roc == 0.5
    assert prc == 0.5


def test_eval_generator_rejects_foreign_pairs(rng):
    g = synth_two_community(1, 10, 0.7, 0.1, seed=3).graphs[0]
    params = init_generator_params(g.x.shape[1], 8, 2, 4, np.random.default_rng(0))
    with pytest.raises(ValueError, match="outside the graph"):
        eval_generator(g, params, LinkEvalSet(pos_pairs=[[0, 99]], neg_pairs=[[1, 2]]))
    with pytest.raises(ValueError, match="outside the graph"):
        eval_generator(g, params, LinkEvalSet(pos_pairs=[[2, 2]], neg_pairs=[[1, 3]]))


def test_eval_generator_encodes_without_held_out_edges(rng):
    g = synth_two_community(1, 12, 0.7, 0.1, seed=4).graphs[0]
    params = init_generator_params(g.x.shape[1], 8, 2, 4, np.random.default_rng(1))
    rw = np.random.default_rng(2)
    params["mu.W"].values[:] = rw.normal(size=params["mu.W"].values.shape)
    held = make_link_eval_set(g, 0.3, rng)

    got_roc, got_prc = eval_generator(g, params, held)

    removed = {(int(a), int(b)) for a, b in held.pos_pairs}
    kept = [e for e in map(tuple, g.edges) if e not in removed]
    g_minus = Graph(n=g.n, edges=canonical_edges(kept, g.n), x=g.x)
    mu_minus = vgae_encode(make_batch([g_minus]), params).mu.values
    mu_full = vgae_encode(make_batch([g]), params).mu.values
    assert np.abs(mu_minus - mu_full).max() > 1e-6  # removal matters

    def scores(pairs):
        logits = np.einsum("ij,ij->i", mu_minus[pairs[:, 0]], mu_minus[pairs[:, 1]])
        return [float(1.0 / (1.0 + np.exp(-l))) for l in logits]

    expect = link_pred_metrics(scores(held.pos_pairs), scores(held.neg_pairs))
    assert (got_roc, got_prc) == pytest.approx(expect, abs=1e-12)
