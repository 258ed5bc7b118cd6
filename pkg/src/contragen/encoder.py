"""GIN encoder: message passing, sum-pool readout, and the projection head.

Each round applies h <- MLP((1 + eps) * h + sum_{u in N(v)} h_u) with eps
fixed at 0, realized as one dense matmul with (A + I). MLPs have two
linear stages with an inner ReLU; an outer ReLU joins rounds except after
the last. The readout sums node states per graph, the projection head is
linear -> ReLU -> linear with no normalization anywhere.
"""

from __future__ import annotations

import numpy as np

from . import ndtape as nt
from .graphdata import Batch, make_batch


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int, dtype=np.float64) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out)).astype(dtype)


def init_mlp(store: nt.ParamStore, prefix: str, d_in: int, d_hidden: int, d_out: int,
             rng: np.random.Generator, dtype=np.float64) -> None:
    """Two linear stages, Glorot-uniform weights, zero biases."""
    store.add(f"{prefix}.lin1.W", nt.Tensor(glorot(rng, d_in, d_hidden, dtype), requires_grad=True, dtype=dtype))
    store.add(f"{prefix}.lin1.b", nt.Tensor(np.zeros(d_hidden), requires_grad=True, dtype=dtype))
    store.add(f"{prefix}.lin2.W", nt.Tensor(glorot(rng, d_hidden, d_out, dtype), requires_grad=True, dtype=dtype))
    store.add(f"{prefix}.lin2.b", nt.Tensor(np.zeros(d_out), requires_grad=True, dtype=dtype))


def init_encoder_params(in_dim: int, hidden: int, layers: int, rng: np.random.Generator,
                        dtype=np.float64) -> nt.ParamStore:
    """Encoder parameters: `layers` GIN rounds plus the projection head."""
    if layers < 1:
        raise ValueError("encoder needs at least one layer")
    store = nt.ParamStore()
    for l in range(layers):
        d_in = in_dim if l == 0 else hidden
        init_mlp(store, f"gin{l}", d_in, hidden, hidden, rng, dtype)
    init_mlp(store, "head", hidden, hidden, hidden, rng, dtype)
    return store


def encoder_layer_count(params: nt.ParamStore) -> int:
    return len({name.split(".")[0] for name in params.names() if name.startswith("gin")})


def mlp_forward(h: nt.Tensor, params: nt.ParamStore, prefix: str) -> nt.Tensor:
    z = nt.add(nt.matmul(h, params[f"{prefix}.lin1.W"]), params[f"{prefix}.lin1.b"])
    z = z.relu()
    return nt.add(nt.matmul(z, params[f"{prefix}.lin2.W"]), params[f"{prefix}.lin2.b"])


def gin_forward(batch: Batch, params: nt.ParamStore, dtype=np.float64) -> nt.Tensor:
    """Node embeddings (num_nodes, hidden) for a block-diagonal batch."""
    layers = encoder_layer_count(params)
    a_hat = nt.const(batch.adj + np.eye(batch.num_nodes), dtype=dtype)
    h = nt.const(batch.x, dtype=dtype)
    for l in range(layers):
        agg = nt.matmul(a_hat, h)
        h = mlp_forward(agg, params, f"gin{l}")
        if l < layers - 1:
            h = h.relu()
    return h


def readout(node_embeds: nt.Tensor, batch: Batch, dtype=np.float64) -> nt.Tensor:
    """Sum-pool node states into per-graph embeddings (num_graphs, hidden)."""
    pool = nt.const(batch.pool_matrix(), dtype=dtype)
    return nt.matmul(pool, node_embeds)


def project(graph_embeds: nt.Tensor, params: nt.ParamStore) -> nt.Tensor:
    """Projection head used only by the contrastive objective."""
    z = nt.add(nt.matmul(graph_embeds, params["head.lin1.W"]), params["head.lin1.b"])
    z = z.relu()
    return nt.add(nt.matmul(z, params["head.lin2.W"]), params["head.lin2.b"])


def encode_projected(batch: Batch, params: nt.ParamStore, dtype=np.float64) -> nt.Tensor:
    """project(readout(gin(batch))), the contrastive-space embeddings."""
    return project(readout(gin_forward(batch, params, dtype), batch, dtype), params)


def embed_graphs(graphs, params: nt.ParamStore, batch_size: int = 64) -> np.ndarray:
    """Frozen graph embeddings before the projection head, for probing.

    Runs outside any tape, so nothing is recorded.
    """
    out = []
    graphs = list(graphs)
    for start in range(0, len(graphs), batch_size):
        chunk = graphs[start:start + batch_size]
        batch = make_batch(chunk)
        h = gin_forward(batch, params)
        out.append(readout(h, batch).values.copy())
    return np.concatenate(out, axis=0)
