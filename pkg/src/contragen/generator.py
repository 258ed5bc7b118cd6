"""Variational graph autoencoder generators and the random-walk view sampler.

The variational encoder reuses the GIN trunk architecture of the
contrastive encoder, followed by two linear heads for per-node mu and
logvar (logvar clamped to [-10, 10]). The inner-product decoder gives
edge probabilities sigmoid(z_i . z_j) with the diagonal and cross-graph
entries forced to zero. Views are sampled by probability-proportional
random walks over the decoded matrix; gradients never flow through a
sampled view, generators learn only from their reconstruction loss.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from . import ndtape as nt
from .encoder import init_mlp, mlp_forward
from .graphdata import Batch, Graph

logger = logging.getLogger(__name__)

LOGVAR_MIN = -10.0
LOGVAR_MAX = 10.0
PROB_CLIP = 1e-7
DEFAULT_LATENT_DIM = 16


@dataclass
class LatentPosterior:
    """Per-node Gaussian posterior parameters."""

    mu: nt.Tensor
    logvar: nt.Tensor


def init_generator_params(in_dim: int, hidden: int, layers: int, latent_dim: int,
                          rng: np.random.Generator, dtype=np.float64) -> nt.ParamStore:
    """GIN trunk mirroring the encoder plus linear mu/logvar heads."""
    if layers < 1:
        raise ValueError("generator trunk needs at least one layer")
    store = nt.ParamStore()
    for l in range(layers):
        d_in = in_dim if l == 0 else hidden
        init_mlp(store, f"gin{l}", d_in, hidden, hidden, rng, dtype)
    # Zero-weight output heads: the fresh generator starts at the neutral
    # posterior (mu=0, logvar=0, every decoded probability 0.5, zero KL).
    # Glorot heads on top of unnormalized GIN sums give |mu| in the tens,
    # and the resulting KL spike collapses the posterior before the
    # reconstruction term can shape it. Trunks stay Glorot and seeded, so
    # two independently initialized generators still differ.
    store.add("mu.W", nt.Tensor(np.zeros((hidden, latent_dim)), requires_grad=True, dtype=dtype))
    store.add("mu.b", nt.Tensor(np.zeros(latent_dim), requires_grad=True, dtype=dtype))
    store.add("logvar.W", nt.Tensor(np.zeros((hidden, latent_dim)), requires_grad=True, dtype=dtype))
    store.add("logvar.b", nt.Tensor(np.zeros(latent_dim), requires_grad=True, dtype=dtype))
    return store


def _trunk_layer_count(params: nt.ParamStore) -> int:
    return len({name.split(".")[0] for name in params.names() if name.startswith("gin")})


def vgae_encode(batch: Batch, params: nt.ParamStore, dtype=np.float64) -> LatentPosterior:
    """Per-node posterior parameters for a block-diagonal batch."""
    layers = _trunk_layer_count(params)
    a_hat = nt.const(batch.adj + np.eye(batch.num_nodes), dtype=dtype)
    h = nt.const(batch.x, dtype=dtype)
    for l in range(layers):
        agg = nt.matmul(a_hat, h)
        h = mlp_forward(agg, params, f"gin{l}")
        if l < layers - 1:
            h = h.relu()
    mu = nt.add(nt.matmul(h, params["mu.W"]), params["mu.b"])
    logvar = nt.add(nt.matmul(h, params["logvar.W"]), params["logvar.b"]).clip(LOGVAR_MIN, LOGVAR_MAX)
    return LatentPosterior(mu=mu, logvar=logvar)


def reparameterize(post: LatentPosterior, rng: np.random.Generator) -> nt.Tensor:
    """z = mu + exp(logvar / 2) * eps with eps a constant draw.

    Gradients reach mu and logvar only; the noise is not a parameter.
    """
    eps = nt.const(rng.standard_normal(post.mu.shape), dtype=post.mu.dtype)
    sigma = nt.smul(post.logvar, 0.5).exp()
    return nt.add(post.mu, nt.mul(sigma, eps))


def _block_mask(graph_id: np.ndarray) -> np.ndarray:
    same = graph_id[:, None] == graph_id[None, :]
    mask = same.astype(np.float64)
    np.fill_diagonal(mask, 0.0)
    return mask


def decode_edge_probs(z: nt.Tensor, graph_id: np.ndarray) -> nt.Tensor:
    """Dense edge probabilities sigmoid(z z^T), diagonal and cross-graph zeroed."""
    logits = nt.matmul(z, z.transpose())
    probs = logits.sigmoid()
    return nt.mul(probs, nt.const(_block_mask(np.asarray(graph_id)), dtype=z.dtype))


def gen_loss(g: Graph, p: nt.Tensor, post: LatentPosterior) -> nt.Tensor:
    """Weighted reconstruction BCE plus (1/n) KL to the standard normal.

    The BCE sums over the full dense n x n block (the forced-zero
    diagonal contributes only the clamp floor) with the positive class
    weighted by w = (n^2 - n - 2|E|) / (2|E|); an edgeless graph falls
    back to w = 1 (recorded). Probabilities are clamped to
    [1e-7, 1 - 1e-7] before the logs. Keeping the BCE a sum, not a
    mean, preserves the reconstruction-to-KL balance: dividing by n^2
    would let the KL term collapse the posterior on desk-scale graphs.
    """
    n = g.n
    if p.shape != (n, n):
        raise ValueError(f"probability matrix shape {p.shape} does not match graph n={n}")
    m2 = 2 * g.num_edges  # ones in the dense symmetric adjacency
    if m2 == 0:
        logger.debug("gen_loss: graph with no edges, positive weight fell back to 1")
        w_pos = 1.0
    else:
        w_pos = (n * n - n - m2) / m2
    adj = nt.const(g.adjacency(), dtype=p.dtype)
    ones = nt.const(np.ones((n, n)), dtype=p.dtype)
    pc = p.clip(PROB_CLIP, 1.0 - PROB_CLIP)
    pos_term = nt.mul(adj, pc.log())
    neg_term = nt.mul(nt.sub(ones, adj), nt.sub(ones, pc).log())
    bce = nt.smul(nt.add(nt.smul(pos_term, w_pos), neg_term).sum(), -1.0)

    mu2 = nt.mul(post.mu, post.mu)
    var = post.logvar.exp()
    kl_terms = nt.sub(nt.add(mu2, var), nt.add(post.logvar, nt.const(np.ones(post.mu.shape), dtype=p.dtype)))
    kl = nt.smul(kl_terms.sum(), 0.5 / n)
    return nt.add(bce, kl)


def sample_view(g: Graph, p: np.ndarray, walk_len: int, n_walks: int,
                rng: np.random.Generator) -> Graph:
    """One stochastic view of g from decoded probabilities.

    Walks start at uniform nodes and move with transition mass
    proportional to the current node's row of p; an all-zero row halts
    that walk (recorded, not fatal). The view is the graph on visited
    nodes where each visited pair keeps an edge with probability p_ij.
    Features are copied from g, so the start nodes alone already make the
    view non-empty.
    """
    n = g.n
    p = np.asarray(p, dtype=np.float64)
    if p.shape != (n, n):
        raise ValueError(f"probability matrix shape {p.shape} does not match graph n={n}")
    if walk_len < 1 or n_walks < 1:
        raise ValueError("walk_len and n_walks must be positive")

    row_sum = p.sum(axis=1)
    alive_rows = row_sum > 0.0
    # cumulative transition table, rows with zero mass stay unused
    cum = np.cumsum(np.where(alive_rows[:, None], p, 0.0), axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        cum = np.where(alive_rows[:, None], cum / np.where(alive_rows, row_sum, 1.0)[:, None], 0.0)

    current = rng.integers(0, n, size=n_walks)
    visited = np.zeros(n, dtype=bool)
    visited[current] = True
    alive = np.ones(n_walks, dtype=bool)
    halted = 0
    for _ in range(walk_len - 1):
        stuck = alive & ~alive_rows[current]
        if stuck.any():
            halted += int(stuck.sum())
            alive = alive & ~stuck
        if not alive.any():
            break
        u = rng.random(alive.sum())
        rows = cum[current[alive]]
        nxt = (rows < u[:, None]).sum(axis=1)
        nxt = np.minimum(nxt, n - 1)
        cur = current.copy()
        cur[alive] = nxt
        current = cur
        visited[current[alive]] = True
    if halted:
        logger.debug("sample_view: %d walk(s) halted on all-zero rows", halted)

    keep = np.flatnonzero(visited)
    k = keep.shape[0]
    sub = p[np.ix_(keep, keep)]
    iu, ju = np.triu_indices(k, k=1)
    draw = rng.random(iu.shape[0])
    chosen = draw < sub[iu, ju]
    edges = np.stack([iu[chosen], ju[chosen]], axis=1).astype(np.int64)
    return Graph(n=k, edges=edges, x=g.x[keep].copy(), label=g.label)


def default_walk_params(n: int) -> tuple[int, int]:
    """(walk_len, n_walks) defaults: length n, max(1, ceil(n / 4)) walks."""
    return n, max(1, int(math.ceil(n / 4)))
