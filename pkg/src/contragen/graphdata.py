"""Graph containers, TUDataset-format text IO, and synthetic two-community data.

Graphs are undirected and simple: edges are stored once as (i, j) with
i < j, lexicographically sorted, endpoints in [0, n). Adjacency and
feature math everywhere downstream use dense matrices; the scale target
is hundreds of graphs with tens of nodes.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field

import numpy as np

logger = logging.getLogger(__name__)

DEFAULT_MAX_DEGREE = 64


def canonical_edges(pairs, n: int) -> np.ndarray:
    """Sorted, deduplicated (m, 2) int array with i < j; rejects bad endpoints."""
    if len(pairs) == 0:
        return np.zeros((0, 2), dtype=np.int64)
    arr = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if arr.min() < 0 or arr.max() >= n:
        raise ValueError(f"edge endpoint out of range for n={n}")
    if np.any(arr[:, 0] == arr[:, 1]):
        raise ValueError("self loops are not allowed")
    lo = arr.min(axis=1)
    hi = arr.max(axis=1)
    arr = np.stack([lo, hi], axis=1)
    arr = np.unique(arr, axis=0)
    return arr


@dataclass
class Graph:
    """One undirected graph with dense node features."""

    n: int
    edges: np.ndarray
    x: np.ndarray
    edge_attrs: np.ndarray | None = None
    label: int | None = None

    def __post_init__(self):
        self.edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        self.x = np.asarray(self.x, dtype=np.float64)
        if self.n <= 0:
            raise ValueError("graph must have at least one node")
        if self.x.shape[0] != self.n:
            raise ValueError(f"feature rows {self.x.shape[0]} != n {self.n}")
        if self.edges.size:
            if self.edges.min() < 0 or self.edges.max() >= self.n:
                raise ValueError(f"edge endpoint out of range for n={self.n}")
            if np.any(self.edges[:, 0] >= self.edges[:, 1]):
                raise ValueError("edges must be stored as (i, j) with i < j")

    @property
    def num_edges(self) -> int:
        return int(self.edges.shape[0])

    def edge_set(self) -> set:
        return {(int(i), int(j)) for i, j in self.edges}

    def adjacency(self, dtype=np.float64) -> np.ndarray:
        a = np.zeros((self.n, self.n), dtype=dtype)
        if self.edges.size:
            a[self.edges[:, 0], self.edges[:, 1]] = 1.0
            a[self.edges[:, 1], self.edges[:, 0]] = 1.0
        return a

    def degrees(self) -> np.ndarray:
        d = np.zeros(self.n, dtype=np.int64)
        for i, j in self.edges:
            d[i] += 1
            d[j] += 1
        return d


@dataclass
class Dataset:
    """Immutable-by-convention list of graphs with shared feature dimension."""

    graphs: list
    num_classes: int = 0
    feature_dim: int = 0
    name: str = ""

    def __post_init__(self):
        if self.graphs and self.feature_dim == 0:
            self.feature_dim = int(self.graphs[0].x.shape[1])

    def __len__(self):
        return len(self.graphs)

    def __getitem__(self, i):
        return self.graphs[i]

    def labels(self) -> np.ndarray:
        return np.array([g.label if g.label is not None else -1 for g in self.graphs], dtype=np.int64)


@dataclass
class Batch:
    """Block-diagonal stacking of several graphs."""

    graphs: list
    adj: np.ndarray
    x: np.ndarray
    graph_id: np.ndarray
    sizes: np.ndarray
    offsets: np.ndarray = field(init=False)

    def __post_init__(self):
        self.offsets = np.concatenate([[0], np.cumsum(self.sizes)])

    @property
    def num_graphs(self) -> int:
        return len(self.graphs)

    @property
    def num_nodes(self) -> int:
        return int(self.x.shape[0])

    def node_index(self, k: int) -> np.ndarray:
        """Global node indices of member graph k."""
        return np.arange(self.offsets[k], self.offsets[k + 1], dtype=np.int64)

    def pool_matrix(self, dtype=np.float64) -> np.ndarray:
        """(num_graphs, num_nodes) 0/1 matrix; left-multiplying sums per graph."""
        m = np.zeros((self.num_graphs, self.num_nodes), dtype=dtype)
        m[self.graph_id, np.arange(self.num_nodes)] = 1.0
        return m


def make_batch(graphs) -> Batch:
    """Stack graphs into one block-diagonal batch."""
    graphs = list(graphs)
    if not graphs:
        raise ValueError("cannot batch zero graphs")
    dims = {g.x.shape[1] for g in graphs}
    if len(dims) != 1:
        raise ValueError(f"inconsistent feature dimensions in batch: {sorted(dims)}")
    sizes = np.array([g.n for g in graphs], dtype=np.int64)
    total = int(sizes.sum())
    x = np.concatenate([g.x for g in graphs], axis=0)
    graph_id = np.repeat(np.arange(len(graphs), dtype=np.int64), sizes)
    adj = np.zeros((total, total), dtype=np.float64)
    off = 0
    for g in graphs:
        if g.edges.size:
            adj[off + g.edges[:, 0], off + g.edges[:, 1]] = 1.0
            adj[off + g.edges[:, 1], off + g.edges[:, 0]] = 1.0
        off += g.n
    return Batch(graphs=graphs, adj=adj, x=x, graph_id=graph_id, sizes=sizes)


def degree_onehot(degrees: np.ndarray, max_degree: int) -> np.ndarray:
    """One-hot degree features with dimension max_degree + 1; overflow shares the top bucket."""
    d = np.minimum(np.asarray(degrees, dtype=np.int64), max_degree)
    x = np.zeros((d.shape[0], max_degree + 1), dtype=np.float64)
    x[np.arange(d.shape[0]), d] = 1.0
    return x


# ---------------------------------------------------------------------------
# TUDataset-format text IO


def _read_lines(path: str) -> list[str]:
    with open(path, "r", encoding="utf-8") as fh:
        return [line.strip() for line in fh if line.strip()]


def load_tudataset(directory: str, name: str, max_degree: int = DEFAULT_MAX_DEGREE) -> Dataset:
    """Read name_A.txt / name_graph_indicator.txt and optional label/attribute files.

    Node ids in the files are 1-indexed and every undirected edge is
    listed in both directions. Feature precedence per node: attribute
    file, else one-hot node labels, else one-hot degree capped at
    max_degree.
    """
    prefix = os.path.join(directory, name + "_")

    ind_path = prefix + "graph_indicator.txt"
    if not os.path.exists(ind_path):
        raise ValueError(f"missing mandatory file {name}_graph_indicator.txt")
    a_path = prefix + "A.txt"
    if not os.path.exists(a_path):
        raise ValueError(f"missing mandatory file {name}_A.txt")

    ind_lines = _read_lines(ind_path)
    if not ind_lines:
        raise ValueError(f"no graphs: {name}_graph_indicator.txt is empty")
    indicator = np.array([int(v) for v in ind_lines], dtype=np.int64)
    n_nodes = indicator.shape[0]
    graph_ids = np.unique(indicator)
    id_to_pos = {int(gid): k for k, gid in enumerate(graph_ids)}
    n_graphs = len(graph_ids)

    # global -> (graph, local) maps
    local_index = np.zeros(n_nodes, dtype=np.int64)
    counts = np.zeros(n_graphs, dtype=np.int64)
    owner = np.zeros(n_nodes, dtype=np.int64)
    for v in range(n_nodes):
        k = id_to_pos[int(indicator[v])]
        owner[v] = k
        local_index[v] = counts[k]
        counts[k] += 1

    edge_lists: list[list] = [[] for _ in range(n_graphs)]
    with open(a_path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            parts = line.replace(",", " ").split()
            if len(parts) != 2:
                raise ValueError(f"malformed edge line {lineno} in {name}_A.txt: {raw!r}")
            u, v = int(parts[0]), int(parts[1])
            if not (1 <= u <= n_nodes and 1 <= v <= n_nodes):
                raise ValueError(
                    f"edge references out-of-range node at line {lineno} in {name}_A.txt"
                )
            gu, gv = owner[u - 1], owner[v - 1]
            if gu != gv:
                raise ValueError(
                    f"edge crosses graphs at line {lineno} in {name}_A.txt"
                )
            a, b = int(local_index[u - 1]), int(local_index[v - 1])
            if a == b:
                continue  # drop self loops defensively
            edge_lists[gu].append((min(a, b), max(a, b)))

    labels = None
    gl_path = prefix + "graph_labels.txt"
    if os.path.exists(gl_path):
        raw_labels = [int(v) for v in _read_lines(gl_path)]
        if len(raw_labels) != n_graphs:
            raise ValueError(
                f"{name}_graph_labels.txt has {len(raw_labels)} entries for {n_graphs} graphs"
            )
        classes = sorted(set(raw_labels))
        remap = {c: i for i, c in enumerate(classes)}
        labels = [remap[v] for v in raw_labels]

    node_feats = None
    na_path = prefix + "node_attributes.txt"
    nl_path = prefix + "node_labels.txt"
    if os.path.exists(na_path):
        rows = [
            np.array([float(p) for p in line.replace(",", " ").split()], dtype=np.float64)
            for line in _read_lines(na_path)
        ]
        if len(rows) != n_nodes:
            raise ValueError(f"{name}_node_attributes.txt has {len(rows)} rows for {n_nodes} nodes")
        node_feats = np.stack(rows, axis=0)
    elif os.path.exists(nl_path):
        raw = [int(v) for v in _read_lines(nl_path)]
        if len(raw) != n_nodes:
            raise ValueError(f"{name}_node_labels.txt has {len(raw)} rows for {n_nodes} nodes")
        values = sorted(set(raw))
        remap = {c: i for i, c in enumerate(values)}
        node_feats = np.zeros((n_nodes, len(values)), dtype=np.float64)
        for v, lab in enumerate(raw):
            node_feats[v, remap[lab]] = 1.0

    graphs = []
    for k in range(n_graphs):
        nk = int(counts[k])
        edges = canonical_edges(edge_lists[k], nk)
        g = Graph(n=nk, edges=edges, x=np.zeros((nk, 1)), label=None if labels is None else labels[k])
        if node_feats is not None:
            g.x = node_feats[owner == k]
        else:
            g.x = degree_onehot(g.degrees(), max_degree)
        graphs.append(g)

    num_classes = len(set(labels)) if labels is not None else 0
    return Dataset(graphs=graphs, num_classes=num_classes, name=name)


def write_tudataset(dataset: Dataset, directory: str, name: str) -> None:
    """Emit the same text layout load_tudataset reads.

    Every edge is written in both directions with 1-indexed global node
    ids; node features go to the attribute file with repr precision so a
    round trip reproduces them exactly.
    """
    os.makedirs(directory, exist_ok=True)
    prefix = os.path.join(directory, name + "_")
    offsets = np.concatenate([[0], np.cumsum([g.n for g in dataset.graphs])])

    with open(prefix + "A.txt", "w", encoding="utf-8") as fh:
        for k, g in enumerate(dataset.graphs):
            base = int(offsets[k])
            for i, j in g.edges:
                u, v = base + int(i) + 1, base + int(j) + 1
                fh.write(f"{u}, {v}\n")
                fh.write(f"{v}, {u}\n")

    with open(prefix + "graph_indicator.txt", "w", encoding="utf-8") as fh:
        for k, g in enumerate(dataset.graphs):
            for _ in range(g.n):
                fh.write(f"{k + 1}\n")

    if any(g.label is not None for g in dataset.graphs):
        with open(prefix + "graph_labels.txt", "w", encoding="utf-8") as fh:
            for g in dataset.graphs:
                fh.write(f"{0 if g.label is None else int(g.label)}\n")

    with open(prefix + "node_attributes.txt", "w", encoding="utf-8") as fh:
        for g in dataset.graphs:
            for row in g.x:
                fh.write(", ".join(repr(float(v)) for v in row) + "\n")


# ---------------------------------------------------------------------------
# synthetic two-community graphs


def synth_two_community(
    n_graphs: int,
    n_nodes: int,
    p_in: float,
    p_out: float,
    seed: int,
    max_degree: int = DEFAULT_MAX_DEGREE,
    features: str = "degree",
) -> Dataset:
    """Two-block stochastic graphs; label 1 halves the within-block density.

    Labels alternate 0, 1, 0, 1, ... so classes stay balanced. Features
    are one-hot degree (capped), constant ones, or one-hot node identity.
    Identity features follow the featureless-graph convention of VGAE
    link prediction; without them all nodes of a regular graph embed
    identically and every pair score ties.
    """
    if not (0.0 <= p_out <= p_in <= 1.0):
        raise ValueError(f"invalid probabilities: need 0 <= p_out <= p_in <= 1, got p_in={p_in}, p_out={p_out}")
    if n_nodes < 2 or n_nodes % 2 != 0:
        raise ValueError("n_nodes must be even and at least 2")
    if features not in ("degree", "ones", "identity"):
        raise ValueError(f"unknown feature kind {features!r}")
    rng = np.random.default_rng(seed)
    half = n_nodes // 2
    block = np.zeros(n_nodes, dtype=np.int64)
    block[half:] = 1

    graphs = []
    for k in range(n_graphs):
        label = k % 2
        pin = p_in / 2.0 if label == 1 else p_in
        iu, ju = np.triu_indices(n_nodes, k=1)
        same = block[iu] == block[ju]
        probs = np.where(same, pin, p_out)
        keep = rng.random(iu.shape[0]) < probs
        edges = np.stack([iu[keep], ju[keep]], axis=1).astype(np.int64)
        g = Graph(n=n_nodes, edges=edges, x=np.zeros((n_nodes, 1)), label=label)
        if features == "degree":
            g.x = degree_onehot(g.degrees(), max_degree)
        elif features == "identity":
            g.x = np.eye(n_nodes, dtype=np.float64)
        else:
            g.x = np.ones((n_nodes, 1), dtype=np.float64)
        graphs.append(g)
    return Dataset(graphs=graphs, num_classes=2, name="two_community")
