"""Evaluation: linear probing of frozen embeddings and link-prediction metrics.

The probe is multinomial logistic regression trained by full-batch
gradient descent on standardized embeddings. AUROC counts concordant
pairs with ties at one half; AUPRC accumulates precision over recall
steps at every distinct threshold. Both metrics use sequential scalar
arithmetic so a brute-force enumeration reproduces them bit for bit.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .generator import vgae_encode
from .graphdata import Graph, canonical_edges, make_batch

logger = logging.getLogger(__name__)

DEFAULT_PROBE_L2 = 1e-3
DEFAULT_PROBE_ITERS = 300
DEFAULT_PROBE_LR = 0.5


@dataclass
class ProbeSplit:
    """One fold: disjoint train and test graph index lists."""

    train_idx: np.ndarray
    test_idx: np.ndarray

    def __post_init__(self):
        self.train_idx = np.asarray(self.train_idx, dtype=np.int64)
        self.test_idx = np.asarray(self.test_idx, dtype=np.int64)
        if np.intersect1d(self.train_idx, self.test_idx).size:
            raise ValueError("train and test indices overlap")


def kfold_splits(n: int, folds: int, seed: int) -> list[ProbeSplit]:
    """Shuffled k-fold cross-validation splits over n items."""
    if folds < 2 or folds > n:
        raise ValueError(f"folds must lie in [2, {n}], got {folds}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    chunks = np.array_split(order, folds)
    splits = []
    for k in range(folds):
        test = chunks[k]
        train = np.concatenate([chunks[j] for j in range(folds) if j != k])
        splits.append(ProbeSplit(train_idx=np.sort(train), test_idx=np.sort(test)))
    return splits


@dataclass
class ProbeResult:
    per_fold: list = field(default_factory=list)
    skipped: list = field(default_factory=list)

    @property
    def mean(self) -> float:
        return float(np.mean(self.per_fold)) if self.per_fold else float("nan")

    @property
    def sd(self) -> float:
        return float(np.std(self.per_fold)) if self.per_fold else float("nan")


def _softmax_rows(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _fit_logreg(x: np.ndarray, y: np.ndarray, n_classes: int, l2: float,
                iters: int, lr: float, rng: np.random.Generator):
    """Full-batch gradient descent on softmax cross entropy with L2 on weights."""
    d = x.shape[1]
    w = rng.normal(0.0, 1e-3, size=(d, n_classes))
    b = np.zeros(n_classes)
    onehot = np.zeros((x.shape[0], n_classes))
    onehot[np.arange(x.shape[0]), y] = 1.0
    m = x.shape[0]
    for _ in range(iters):
        probs = _softmax_rows(x @ w + b)
        err = (probs - onehot) / m
        gw = x.T @ err + l2 * w
        gb = err.sum(axis=0)
        w -= lr * gw
        b -= lr * gb
    return w, b


def linear_probe(embeds: np.ndarray, labels: np.ndarray, splits, l2: float = DEFAULT_PROBE_L2,
                 seed: int = 0, iters: int = DEFAULT_PROBE_ITERS, lr: float = DEFAULT_PROBE_LR) -> ProbeResult:
    """Per-fold accuracy of a logistic-regression probe on frozen embeddings.

    Embeddings are standardized with statistics of each training fold.
    A training fold containing a single class is skipped and flagged.
    Deterministic under seed and invariant to permuting items together
    with their labels and split indices.
    """
    embeds = np.asarray(embeds, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if embeds.shape[0] != labels.shape[0]:
        raise ValueError(f"{embeds.shape[0]} embeddings but {labels.shape[0]} labels")
    n_classes = int(labels.max()) + 1 if labels.size else 0
    result = ProbeResult()
    for fold, split in enumerate(splits):
        ytr = labels[split.train_idx]
        if np.unique(ytr).size < 2:
            logger.warning("probe fold %d skipped: single-class training fold", fold)
            result.skipped.append(fold)
            continue
        xtr = embeds[split.train_idx]
        mu = xtr.mean(axis=0)
        sd = xtr.std(axis=0)
        sd = np.where(sd < 1e-8, 1.0, sd)
        xtr = (xtr - mu) / sd
        xte = (embeds[split.test_idx] - mu) / sd
        rng = np.random.default_rng(seed + fold)
        w, b = _fit_logreg(xtr, ytr, n_classes, l2, iters, lr, rng)
        pred = np.argmax(xte @ w + b, axis=1)
        result.per_fold.append(float(np.mean(pred == labels[split.test_idx])))
    return result


# ---------------------------------------------------------------------------
# ranking metrics


def auroc(scores_pos, scores_neg) -> float:
    """Probability a positive outranks a negative, ties counted half."""
    pos = [float(s) for s in scores_pos]
    neg = [float(s) for s in scores_neg]
    if not pos or not neg:
        raise ValueError("auroc needs at least one positive and one negative score")
    sneg = sorted(neg)
    wins = 0
    ties = 0
    for s in pos:
        lo = _bisect_left(sneg, s)
        hi = _bisect_right(sneg, s)
        wins += lo
        ties += hi - lo
    return (wins + 0.5 * ties) / (len(pos) * len(neg))


def _bisect_left(arr, x):
    lo, hi = 0, len(arr)
    while lo < hi:
        mid = (lo + hi) // 2
        if arr[mid] < x:
            lo = mid + 1
        else:
            hi = mid
    return lo


def _bisect_right(arr, x):
    lo, hi = 0, len(arr)
    while lo < hi:
        mid = (lo + hi) // 2
        if arr[mid] <= x:
            lo = mid + 1
        else:
            hi = mid
    return lo


def auprc(scores_pos, scores_neg) -> float:
    """Area under precision-recall by step interpolation at distinct thresholds."""
    pos = [float(s) for s in scores_pos]
    neg = [float(s) for s in scores_neg]
    if not pos or not neg:
        raise ValueError("auprc needs at least one positive and one negative score")
    n_pos = len(pos)
    thresholds = sorted(set(pos) | set(neg), reverse=True)
    area = 0.0
    tp = 0
    fp = 0
    r_prev = 0.0
    for t in thresholds:
        tp += sum(1 for s in pos if s == t)
        fp += sum(1 for s in neg if s == t)
        precision = tp / (tp + fp)
        recall = tp / n_pos
        area += (recall - r_prev) * precision
        r_prev = recall
    return area


def link_pred_metrics(scores_pos, scores_neg) -> tuple[float, float]:
    return auroc(scores_pos, scores_neg), auprc(scores_pos, scores_neg)


# ---------------------------------------------------------------------------
# generator link prediction


@dataclass
class LinkEvalSet:
    """Held-out positive pairs and an equal count of sampled non-edges."""

    pos_pairs: np.ndarray
    neg_pairs: np.ndarray

    def __post_init__(self):
        self.pos_pairs = np.asarray(self.pos_pairs, dtype=np.int64).reshape(-1, 2)
        self.neg_pairs = np.asarray(self.neg_pairs, dtype=np.int64).reshape(-1, 2)


def make_link_eval_set(g: Graph, fraction: float, rng: np.random.Generator) -> LinkEvalSet:
    """Hold out floor(fraction * |E|) edges (at least 1) plus matched negatives."""
    if not (0.0 < fraction < 1.0):
        raise ValueError(f"fraction must lie in (0, 1), got {fraction}")
    m = g.num_edges
    if m < 2:
        raise ValueError("graph needs at least 2 edges for link evaluation")
    k = max(1, int(np.floor(fraction * m)))
    rows = rng.choice(m, size=k, replace=False)
    pos = g.edges[np.sort(rows)]
    present = g.edge_set()
    iu, ju = np.triu_indices(g.n, k=1)
    pool = [(int(a), int(b)) for a, b in zip(iu, ju) if (int(a), int(b)) not in present]
    if len(pool) < k:
        raise ValueError("not enough non-edges to sample negatives")
    picks = rng.choice(len(pool), size=k, replace=False)
    neg = np.array([pool[i] for i in np.sort(picks)], dtype=np.int64)
    return LinkEvalSet(pos_pairs=pos, neg_pairs=neg)


def eval_generator(g: Graph, params, held_out: LinkEvalSet, rng=None) -> tuple[float, float]:
    """AUROC and AUPRC of decoded probabilities on held-out links.

    The graph is encoded with the held-out edges removed; pairs are
    scored with the posterior mean, so the evaluation is deterministic
    and rng is accepted only for interface symmetry.
    """
    for pair in np.concatenate([held_out.pos_pairs, held_out.neg_pairs], axis=0):
        if pair.min() < 0 or pair.max() >= g.n or pair[0] == pair[1]:
            raise ValueError(f"held-out pair {tuple(int(v) for v in pair)} lies outside the graph")
    held = {(min(int(i), int(j)), max(int(i), int(j))) for i, j in held_out.pos_pairs}
    kept = [e for e in map(tuple, g.edges) if (int(e[0]), int(e[1])) not in held]
    g_train = Graph(n=g.n, edges=canonical_edges(kept, g.n), x=g.x.copy(), label=g.label)
    batch = make_batch([g_train])
    post = vgae_encode(batch, params)
    mu = post.mu.values
    scores_pos = _pair_scores(mu, held_out.pos_pairs)
    scores_neg = _pair_scores(mu, held_out.neg_pairs)
    return link_pred_metrics(scores_pos, scores_neg)


def _pair_scores(mu: np.ndarray, pairs: np.ndarray) -> list[float]:
    logits = np.einsum("ij,ij->i", mu[pairs[:, 0]], mu[pairs[:, 1]])
    z = np.exp(-np.abs(logits))
    probs = np.where(logits >= 0, 1.0 / (1.0 + z), z / (1.0 + z))
    return [float(p) for p in probs]
