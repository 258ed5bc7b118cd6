"""Hand-designed graph augmentations: the fixed-prior view pool.

Every augmentation maps a valid Graph to a valid, never-empty Graph and
draws randomness only from the passed generator. Ratio 0 is an exact
identity for every kind.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graphdata import Graph, canonical_edges

KINDS = ("nodedrop", "subgraph", "edgepert", "attrmask", "identical")
DEFAULT_RATIO = 0.2


@dataclass(frozen=True)
class AugmentationPolicy:
    """A pair of augmentations applied to the two contrastive views."""

    kind1: str = "nodedrop"
    kind2: str = "nodedrop"
    ratio: float = DEFAULT_RATIO

    def __post_init__(self):
        for kind in (self.kind1, self.kind2):
            if kind not in KINDS:
                raise ValueError(f"unknown augmentation kind {kind!r}")
        if not (0.0 <= self.ratio <= 1.0):
            raise ValueError(f"ratio must lie in [0, 1], got {self.ratio}")


def _induced_subgraph(g: Graph, keep: np.ndarray) -> Graph:
    """Subgraph on the kept nodes (sorted ascending), labels and features copied."""
    keep = np.sort(np.asarray(keep, dtype=np.int64))
    pos = -np.ones(g.n, dtype=np.int64)
    pos[keep] = np.arange(keep.shape[0])
    edges = []
    for i, j in g.edges:
        a, b = pos[i], pos[j]
        if a >= 0 and b >= 0:
            edges.append((min(a, b), max(a, b)))
    return Graph(
        n=int(keep.shape[0]),
        edges=canonical_edges(edges, int(keep.shape[0])),
        x=g.x[keep].copy(),
        label=g.label,
    )


def _node_drop(g: Graph, ratio: float, rng: np.random.Generator) -> Graph:
    k = int(math.floor(ratio * g.n))
    if k == 0:
        return g
    if k >= g.n:
        # never return an empty graph, retain one uniformly chosen node
        keep = rng.choice(g.n, size=1, replace=False)
        return _induced_subgraph(g, keep)
    drop = rng.choice(g.n, size=k, replace=False)
    keep = np.setdiff1d(np.arange(g.n), drop)
    return _induced_subgraph(g, keep)


def _subgraph(g: Graph, ratio: float, rng: np.random.Generator) -> Graph:
    target = max(1, int(math.ceil((1.0 - ratio) * g.n)))
    if target >= g.n:
        return g
    neighbors = [[] for _ in range(g.n)]
    for i, j in g.edges:
        neighbors[i].append(j)
        neighbors[j].append(i)
    current = int(rng.integers(g.n))
    visited = {current}
    while len(visited) < target:
        nbrs = neighbors[current]
        if nbrs:
            current = int(nbrs[rng.integers(len(nbrs))])
        else:
            # stuck on an isolated node: jump uniformly so the walk terminates
            current = int(rng.integers(g.n))
        visited.add(current)
    return _induced_subgraph(g, np.array(sorted(visited), dtype=np.int64))


def _edge_pert(g: Graph, ratio: float, rng: np.random.Generator) -> Graph:
    m = g.num_edges
    k = int(math.floor(ratio * m))
    if k == 0:
        return g
    drop_rows = rng.choice(m, size=k, replace=False)
    kept = np.delete(g.edges, drop_rows, axis=0)
    present = {(int(i), int(j)) for i, j in kept}
    iu, ju = np.triu_indices(g.n, k=1)
    pool = [(int(a), int(b)) for a, b in zip(iu, ju) if (int(a), int(b)) not in present]
    add_rows = rng.choice(len(pool), size=k, replace=False)
    added = [pool[r] for r in add_rows]
    edges = canonical_edges(list(map(tuple, kept)) + added, g.n)
    return Graph(n=g.n, edges=edges, x=g.x.copy(), label=g.label)


def _attr_mask(g: Graph, ratio: float, rng: np.random.Generator) -> Graph:
    k = int(math.floor(ratio * g.n))
    if k == 0:
        return g
    rows = rng.choice(g.n, size=k, replace=False)
    x = g.x.copy()
    x[rows] = 0.0
    return Graph(n=g.n, edges=g.edges.copy(), x=x, label=g.label)


def apply_augmentation(g: Graph, kind: str, ratio: float, rng: np.random.Generator) -> Graph:
    """One stochastic view of g under the named augmentation."""
    if kind not in KINDS:
        raise ValueError(f"unknown augmentation kind {kind!r}")
    if not (0.0 <= ratio <= 1.0):
        raise ValueError(f"ratio must lie in [0, 1], got {ratio}")
    if kind == "identical" or ratio == 0.0:
        return g
    if kind == "nodedrop":
        return _node_drop(g, ratio, rng)
    if kind == "subgraph":
        return _subgraph(g, ratio, rng)
    if kind == "edgepert":
        return _edge_pert(g, ratio, rng)
    return _attr_mask(g, ratio, rng)
