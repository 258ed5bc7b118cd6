"""Contrastive and information-bottleneck objectives plus reward gating.

Similarities are plain cosine with no temperature. For a batch of B
anchors the contrastive loss per anchor i is

    -sim(z1_i, z2_i) + log( (1/(B-1)) * sum_{j != i} exp(sim(z1_i, z2_j)) )

with the mean over anchors as the total. Negatives are the other graphs
of the batch. The mean inside the log makes the all-identical case
cancel to exactly zero. The InfoBN loss scores an auxiliary estimator's
embeddings against the encoder's per view with the same shape of
positive and negative terms.

Rewards gate the generator updates: weight 1 where a per-anchor
condition value exceeds a batch threshold (mean, optionally +/- one
standard deviation), and a small delta elsewhere. Ties fall to delta.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ndtape as nt

COSINE_EPS = 1e-8
THRESHOLD_MODES = ("mean-sd", "mean", "mean+sd")
PRINCIPLES = ("none", "infomin", "infobn", "minbn")


def cosine_sim(u, v) -> nt.Tensor:
    """Cosine similarity of two vectors; zero vectors score 0."""
    u = u if isinstance(u, nt.Tensor) else nt.const(np.asarray(u, dtype=np.float64))
    v = v if isinstance(v, nt.Tensor) else nt.const(np.asarray(v, dtype=np.float64))
    num = nt.mul(u, v).sum()
    denom = nt.mul(u.l2norm(axis=0), v.l2norm(axis=0)).clip(COSINE_EPS, np.inf)
    return nt.div(num, denom)


def cosine_matrix(z1: nt.Tensor, z2: nt.Tensor) -> nt.Tensor:
    """(B, B) matrix of cosine similarities between rows of z1 and rows of z2."""
    if z1.shape != z2.shape or len(z1.shape) != 2:
        raise ValueError(f"embedding shape mismatch: {z1.shape} vs {z2.shape}")
    dots = nt.matmul(z1, z2.transpose())
    n1 = z1.l2norm(axis=1, keepdims=True)
    n2 = z2.l2norm(axis=1, keepdims=True)
    denom = nt.mul(n1, n2.transpose()).clip(COSINE_EPS, np.inf)
    return nt.div(dots, denom)


def _offdiag(matrix: nt.Tensor, b: int) -> nt.Tensor:
    """(B, B-1) tensor of off-diagonal entries, row-major order preserved."""
    flat = matrix.reshape((b * b,))
    idx = np.array([i * b + j for i in range(b) for j in range(b) if j != i], dtype=np.int64)
    return flat.gather_rows(idx).reshape((b, b - 1))


def _nce_terms(sims: nt.Tensor, b: int) -> nt.Tensor:
    """Per-anchor -positive + log-mean-exp(negatives) from a similarity matrix.

    Row i of sims holds sim(anchor_i, candidate_j); the diagonal is the
    positive pair. The log-mean-exp over the B-1 off-diagonal entries is
    computed with an explicit gather so equal-similarity rows cancel
    exactly against the positive term.
    """
    eye = nt.const(np.eye(b))
    pos = nt.mul(sims, eye).sum(axis=1)
    neg = _offdiag(sims, b).logmeanexp(axis=1)
    return nt.add(nt.smul(pos, -1.0), neg)


def contrastive_loss(z1: nt.Tensor, z2: nt.Tensor):
    """GraphCL-style loss without temperature.

    Returns (total, per_anchor); per_anchor is also the InfoMin condition
    vector, no separate estimator exists.
    """
    b = z1.shape[0]
    if b < 2:
        raise ValueError(f"contrastive loss needs a batch of at least 2, got {b}")
    per_anchor = _nce_terms(cosine_matrix(z1, z2), b)
    return per_anchor.mean(), per_anchor


def infobn_loss(z_pi_1: nt.Tensor, z_th_1: nt.Tensor, z_pi_2: nt.Tensor, z_th_2: nt.Tensor):
    """Auxiliary estimator loss over both views.

    For view v the anchor embedding comes from the estimator pi and both
    the positive and the negatives come from the encoder. The per-anchor
    value sums the two view terms; the total is its mean.
    """
    b = z_pi_1.shape[0]
    if b < 2:
        raise ValueError(f"infobn loss needs a batch of at least 2, got {b}")
    term1 = _nce_terms(cosine_matrix(z_pi_1, z_th_1), b)
    term2 = _nce_terms(cosine_matrix(z_pi_2, z_th_2), b)
    per_anchor = nt.add(term1, term2)
    return per_anchor.mean(), per_anchor


@dataclass(frozen=True)
class RewardConfig:
    """Which principle gates generator updates and how the threshold is set."""

    principle: str = "infomin"
    delta: float = 0.01
    threshold_mode: str = "mean"
    gamma: float | None = None

    def __post_init__(self):
        if self.principle not in PRINCIPLES:
            raise ValueError(f"unknown principle {self.principle!r}")
        if not (0.0 < self.delta < 1.0):
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")
        if self.threshold_mode not in THRESHOLD_MODES:
            raise ValueError(f"unknown threshold mode {self.threshold_mode!r}")
        if self.principle == "minbn":
            if self.gamma is None:
                raise ValueError("gamma required for principle minbn")
            if not (0.0 <= self.gamma <= 1.0):
                raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")
        elif self.gamma is not None:
            raise ValueError(f"gamma is only valid with principle minbn, not {self.principle!r}")


def condition_values(cl_per_anchor: np.ndarray, ibn_per_anchor: np.ndarray | None,
                     cfg: RewardConfig) -> np.ndarray | None:
    """Per-anchor condition vector for the configured principle, None for 'none'."""
    if cfg.principle == "none":
        return None
    if cfg.principle == "infomin":
        return np.asarray(cl_per_anchor, dtype=np.float64)
    if cfg.principle == "infobn":
        if ibn_per_anchor is None:
            raise ValueError("infobn principle needs estimator condition values")
        return np.asarray(ibn_per_anchor, dtype=np.float64)
    if ibn_per_anchor is None:
        raise ValueError("minbn principle needs estimator condition values")
    g = float(cfg.gamma)
    return g * np.asarray(cl_per_anchor, dtype=np.float64) + (1.0 - g) * np.asarray(
        ibn_per_anchor, dtype=np.float64
    )


def reward_threshold(condition: np.ndarray, mode: str) -> float:
    """Batch statistic the condition values are compared against."""
    if mode not in THRESHOLD_MODES:
        raise ValueError(f"unknown threshold mode {mode!r}")
    mean = float(np.mean(condition))
    if mode == "mean":
        return mean
    sd = float(np.std(condition))  # population standard deviation
    return mean - sd if mode == "mean-sd" else mean + sd


def compute_rewards(cl_per_anchor: np.ndarray, ibn_per_anchor: np.ndarray | None,
                    cfg: RewardConfig):
    """Per-anchor weights in {delta, 1} plus the threshold used.

    principle 'none' returns all-ones and a NaN threshold. Strictly-above
    earns 1; ties and below earn delta. One shared weight vector serves
    both generators.
    """
    b = len(np.asarray(cl_per_anchor))
    if cfg.principle == "none":
        return np.ones(b, dtype=np.float64), float("nan")
    cond = condition_values(cl_per_anchor, ibn_per_anchor, cfg)
    t = reward_threshold(cond, cfg.threshold_mode)
    weights = np.where(cond > t, 1.0, cfg.delta)
    return weights, t
