"""Alternating bi-level training loop.

Each step: (a) both generators encode, reparameterize, decode and sample
one view per anchor graph; (b) the encoder takes one Adam step on the
contrastive loss over the sampled views, which are detached; (c)
per-anchor condition values are recomputed with the updated encoder and,
when applicable, the current estimator; (d) rewards gate each anchor;
(e) both generators take one Adam step on the reward-weighted sum of
their per-anchor generation losses with encoder and estimator frozen;
(f) with principles infobn and minbn the estimator takes one Adam step
on fresh views. Updates alternate 1:1:1 and phases never touch foreign
parameter blocks.

Determinism: all randomness flows from named substreams of one seed, so
identical seeds give identical logs and checkpoints bit for bit.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import ndtape as nt
from .augment import apply_augmentation
from .checkpoint import save_checkpoint
from .encoder import encode_projected, init_encoder_params
from .generator import (
    LatentPosterior,
    decode_edge_probs,
    default_walk_params,
    gen_loss,
    init_generator_params,
    reparameterize,
    sample_view,
    vgae_encode,
)
from .graphdata import make_batch
from .objectives import (
    PRINCIPLES,
    RewardConfig,
    compute_rewards,
    contrastive_loss,
    infobn_loss,
)

logger = logging.getLogger(__name__)

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
MAX_CONSECUTIVE_ABORTS = 3

STREAM_NAMES = ("init", "batching", "reparam", "walks", "augment", "probe", "linkeval")


def rng_streams(seed: int) -> dict:
    """Named independent generators derived from one seed."""
    children = np.random.SeedSequence(seed).spawn(len(STREAM_NAMES))
    return {name: np.random.default_rng(child) for name, child in zip(STREAM_NAMES, children)}


@dataclass
class TrainConfig:
    principle: str = "infomin"
    delta: float = 0.01
    threshold_mode: str = "mean"
    gamma: float | None = None
    lr_theta: float = 1e-3
    lr_phi: float = 1e-3
    lr_pi: float = 1e-3
    epochs: int = 100
    batch_size: int = 32
    layers: int = 3
    hidden: int = 32
    latent_dim: int = 16
    walk_len: int = 0  # 0 selects the per-graph default (n)
    n_walks: int = 0  # 0 selects max(1, ceil(n / 4))
    checkpoint_every: int = 0  # 0 writes only the final checkpoint
    ablate_no_reward: bool = False  # straightforward bi-level form, r identically 1
    audit_isolation: bool = False
    views: str = "generator"
    aug_kind1: str = "nodedrop"
    aug_kind2: str = "nodedrop"
    aug_ratio: float = 0.2
    dtype: str = "float64"

    def __post_init__(self):
        if self.principle not in PRINCIPLES:
            raise ValueError(f"unknown principle {self.principle!r}")
        if self.views not in ("generator", "augment"):
            raise ValueError(f"unknown view source {self.views!r}")
        if self.dtype not in ("float64", "float32"):
            raise ValueError(f"unknown dtype {self.dtype!r}")
        if self.epochs < 1 or self.batch_size < 2:
            raise ValueError("epochs must be >= 1 and batch_size >= 2")
        # delegate principle/delta/gamma/threshold validation
        self.reward_config()

    def reward_config(self) -> RewardConfig:
        return RewardConfig(
            principle=self.principle,
            delta=self.delta,
            threshold_mode=self.threshold_mode,
            gamma=self.gamma,
        )

    def np_dtype(self):
        return np.float64 if self.dtype == "float64" else np.float32

    @property
    def uses_estimator(self) -> bool:
        return self.views == "generator" and self.principle in ("infobn", "minbn")

    @property
    def uses_generators(self) -> bool:
        return self.views == "generator"


@dataclass
class AdamSlot:
    m: np.ndarray
    v: np.ndarray
    t: int = 0


@dataclass
class TrainState:
    theta: nt.ParamStore
    phi1: nt.ParamStore | None
    phi2: nt.ParamStore | None
    pi: nt.ParamStore | None
    adam: dict = field(default_factory=dict)
    streams: dict = field(default_factory=dict)
    epoch: int = 0
    step: int = 0
    consecutive_aborts: int = 0

    def groups(self) -> dict:
        out = {"theta": self.theta}
        if self.phi1 is not None:
            out["phi1"] = self.phi1
        if self.phi2 is not None:
            out["phi2"] = self.phi2
        if self.pi is not None:
            out["pi"] = self.pi
        return out

    def snapshot(self):
        params = {name: store.snapshot() for name, store in self.groups().items()}
        adam = {k: (s.m.copy(), s.v.copy(), s.t) for k, s in self.adam.items()}
        return params, adam

    def restore(self, snap) -> None:
        params, adam = snap
        for name, store in self.groups().items():
            store.restore(params[name])
        self.adam = {k: AdamSlot(m=m.copy(), v=v.copy(), t=t) for k, (m, v, t) in adam.items()}


def init_state(feature_dim: int, cfg: TrainConfig, seed: int) -> TrainState:
    streams = rng_streams(seed)
    dt = cfg.np_dtype()
    rng = streams["init"]
    theta = init_encoder_params(feature_dim, cfg.hidden, cfg.layers, rng, dt)
    phi1 = phi2 = pi = None
    if cfg.uses_generators:
        phi1 = init_generator_params(feature_dim, cfg.hidden, cfg.layers, cfg.latent_dim, rng, dt)
        phi2 = init_generator_params(feature_dim, cfg.hidden, cfg.layers, cfg.latent_dim, rng, dt)
    if cfg.uses_estimator:
        pi = init_encoder_params(feature_dim, cfg.hidden, cfg.layers, rng, dt)
    return TrainState(theta=theta, phi1=phi1, phi2=phi2, pi=pi, streams=streams)


def adam_update(state: TrainState, group: str, params: nt.ParamStore, lr: float) -> None:
    """One bias-corrected Adam step per parameter; non-finite grads skip that parameter."""
    for name, tensor in params.items():
        g = tensor.grad
        if g is None:
            continue
        if not np.all(np.isfinite(g)):
            logger.warning("adam: non-finite gradient for %s/%s, update skipped", group, name)
            continue
        key = f"{group}/{name}"
        slot = state.adam.get(key)
        if slot is None:
            slot = AdamSlot(m=np.zeros_like(tensor.values), v=np.zeros_like(tensor.values))
            state.adam[key] = slot
        slot.t += 1
        slot.m = ADAM_BETA1 * slot.m + (1.0 - ADAM_BETA1) * g
        slot.v = ADAM_BETA2 * slot.v + (1.0 - ADAM_BETA2) * g * g
        m_hat = slot.m / (1.0 - ADAM_BETA1 ** slot.t)
        v_hat = slot.v / (1.0 - ADAM_BETA2 ** slot.t)
        tensor.values -= lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)


def _per_graph_generator_losses(batch, params, streams, dt):
    """Posterior, latent sample and per-anchor generation losses, recorded."""
    post = vgae_encode(batch, params, dt)
    z = reparameterize(post, streams["reparam"])
    losses = []
    p_blocks = []
    for k, g in enumerate(batch.graphs):
        rows = batch.node_index(k)
        z_k = z.gather_rows(rows)
        logits = nt.matmul(z_k, z_k.transpose())
        mask = nt.const(1.0 - np.eye(g.n), dtype=dt)
        p_k = nt.mul(logits.sigmoid(), mask)
        post_k = LatentPosterior(mu=post.mu.gather_rows(rows), logvar=post.logvar.gather_rows(rows))
        losses.append(gen_loss(g, p_k, post_k))
        p_blocks.append(p_k.values.copy())
    return losses, p_blocks


def _sample_views(batch, p_blocks, cfg: TrainConfig, streams):
    views = []
    for g, p in zip(batch.graphs, p_blocks):
        wl = cfg.walk_len if cfg.walk_len > 0 else default_walk_params(g.n)[0]
        nw = cfg.n_walks if cfg.n_walks > 0 else default_walk_params(g.n)[1]
        views.append(sample_view(g, p, wl, nw, streams["walks"]))
    return views


def _augment_views(batch, kind: str, ratio: float, streams):
    return [apply_augmentation(g, kind, ratio, streams["augment"]) for g in batch.graphs]


def train_step(batch, state: TrainState, cfg: TrainConfig) -> dict:
    """One alternating step over a block-diagonal batch; see the module docstring."""
    dt = cfg.np_dtype()
    snap = state.snapshot()
    audit = {}
    if cfg.audit_isolation:
        before = {k: store.block_hash() for k, store in state.groups().items()}

    def aborted(phase: str) -> dict:
        state.restore(snap)
        state.consecutive_aborts += 1
        logger.warning("step %d aborted in phase %s (non-finite loss), rolled back", state.step, phase)
        if state.consecutive_aborts >= MAX_CONSECUTIVE_ABORTS:
            raise RuntimeError(
                f"{MAX_CONSECUTIVE_ABORTS} consecutive aborted steps, run failed"
            )
        return {"aborted": True, "abort_phase": phase}

    # (a) view construction
    gen_tapes = []
    gen_losses = []
    if cfg.uses_generators:
        for params in (state.phi1, state.phi2):
            tape = nt.Tape()
            with tape:
                losses, p_blocks = _per_graph_generator_losses(batch, params, state.streams, dt)
            gen_tapes.append(tape)
            gen_losses.append(losses)
            views = _sample_views(batch, p_blocks, cfg, state.streams)
            if len(gen_tapes) == 1:
                views1 = views
            else:
                views2 = views
        gen_vals = [np.array([float(l.values) for l in losses]) for losses in gen_losses]
        if not all(np.all(np.isfinite(v)) for v in gen_vals):
            return aborted("a:generator-forward")
    else:
        views1 = _augment_views(batch, cfg.aug_kind1, cfg.aug_ratio, state.streams)
        views2 = _augment_views(batch, cfg.aug_kind2, cfg.aug_ratio, state.streams)
        gen_vals = []
    vb1 = make_batch(views1)
    vb2 = make_batch(views2)

    # (b) encoder step on the contrastive loss, views detached
    state.theta.zero_grad()
    with nt.Tape():
        z1 = encode_projected(vb1, state.theta, dt)
        z2 = encode_projected(vb2, state.theta, dt)
        loss_cl, _ = contrastive_loss(z1, z2)
        loss_cl_val = float(loss_cl.values)
        if not math.isfinite(loss_cl_val):
            return aborted("b:encoder")
        nt.backward(loss_cl)
    adam_update(state, "theta", state.theta, cfg.lr_theta)
    if cfg.audit_isolation:
        audit["after_theta"] = {k: store.block_hash() for k, store in state.groups().items()}

    # (c) condition values with the updated encoder; code-path identity with the loss
    z1c = encode_projected(vb1, state.theta, dt)
    z2c = encode_projected(vb2, state.theta, dt)
    _, per_cl = contrastive_loss(z1c, z2c)
    cl_cond = np.asarray(per_cl.values, dtype=np.float64)
    ibn_cond = None
    if cfg.uses_estimator:
        zp1 = encode_projected(vb1, state.pi, dt)
        zp2 = encode_projected(vb2, state.pi, dt)
        _, per_ibn = infobn_loss(zp1, z1c.detach(), zp2, z2c.detach())
        ibn_cond = np.asarray(per_ibn.values, dtype=np.float64)

    metrics = {
        "aborted": False,
        "loss_cl": loss_cl_val,
        "cl_mean": float(np.mean(cl_cond)),
    }
    if ibn_cond is not None:
        metrics["ibn_mean"] = float(np.mean(ibn_cond))

    # (d) rewards
    rc = cfg.reward_config()
    if cfg.ablate_no_reward or rc.principle == "none" or not cfg.uses_generators:
        weights = np.ones(len(batch.graphs))
        threshold = None
    else:
        weights, threshold = compute_rewards(cl_cond, ibn_cond, rc)
    metrics["threshold"] = threshold
    metrics["reward_hi_frac"] = float(np.mean(weights == 1.0))
    metrics["weights"] = weights

    # (e) generator steps on the reward-weighted objective
    if cfg.uses_generators:
        lower_objective = 0.0
        for gi, (params, tape, losses) in enumerate(
            zip((state.phi1, state.phi2), gen_tapes, gen_losses), start=1
        ):
            params.zero_grad()
            with tape:
                total = nt.smul(losses[0], float(weights[0]))
                for i in range(1, len(losses)):
                    total = nt.add(total, nt.smul(losses[i], float(weights[i])))
                total_val = float(total.values)
                if not math.isfinite(total_val):
                    return aborted(f"e:generator{gi}")
                nt.backward(total)
            lower_objective += total_val
            adam_update(state, f"phi{gi}", params, cfg.lr_phi)
        metrics["loss_gen1"] = float(np.mean(gen_vals[0]))
        metrics["loss_gen2"] = float(np.mean(gen_vals[1]))
        metrics["per_sample_gen1"] = gen_vals[0]
        metrics["per_sample_gen2"] = gen_vals[1]
        metrics["lower_objective"] = lower_objective
        if cfg.audit_isolation:
            audit["after_phi"] = {k: store.block_hash() for k, store in state.groups().items()}

    # (f) estimator step on fresh views from the updated generators
    if cfg.uses_estimator:
        fresh = []
        for params in (state.phi1, state.phi2):
            post = vgae_encode(batch, params, dt)
            z = reparameterize(post, state.streams["reparam"])
            p = decode_edge_probs(z, batch.graph_id)
            blocks = [
                p.values[np.ix_(batch.node_index(k), batch.node_index(k))]
                for k in range(batch.num_graphs)
            ]
            fresh.append(_sample_views(batch, blocks, cfg, state.streams))
        fb1, fb2 = make_batch(fresh[0]), make_batch(fresh[1])
        zt1 = encode_projected(fb1, state.theta, dt).detach()
        zt2 = encode_projected(fb2, state.theta, dt).detach()
        state.pi.zero_grad()
        with nt.Tape():
            zp1 = encode_projected(fb1, state.pi, dt)
            zp2 = encode_projected(fb2, state.pi, dt)
            loss_ibn, _ = infobn_loss(zp1, zt1, zp2, zt2)
            loss_ibn_val = float(loss_ibn.values)
            if not math.isfinite(loss_ibn_val):
                return aborted("f:estimator")
            nt.backward(loss_ibn)
        adam_update(state, "pi", state.pi, cfg.lr_pi)
        metrics["loss_ibn"] = loss_ibn_val

    if cfg.audit_isolation:
        ok = (
            all(audit["after_theta"][k] == before[k] for k in before if k != "theta")
        )
        if cfg.uses_generators:
            ok = ok and audit["after_phi"]["theta"] == audit["after_theta"]["theta"]
            if state.pi is not None:
                ok = ok and audit["after_phi"]["pi"] == audit["after_theta"]["pi"]
                final = {k: store.block_hash() for k, store in state.groups().items()}
                ok = ok and final["theta"] == audit["after_phi"]["theta"]
                ok = ok and final["phi1"] == audit["after_phi"]["phi1"]
                ok = ok and final["phi2"] == audit["after_phi"]["phi2"]
        metrics["isolation_ok"] = bool(ok)

    state.consecutive_aborts = 0
    state.step += 1
    return metrics


def _epoch_aggregate(step_metrics: list, cfg: TrainConfig, epoch: int) -> dict:
    def mean_of(key):
        vals = [m[key] for m in step_metrics if m.get(key) is not None]
        return float(np.mean(vals)) if vals else None

    log = {
        "epoch": epoch,
        "loss_cl": mean_of("loss_cl"),
        "loss_gen1": mean_of("loss_gen1"),
        "loss_gen2": mean_of("loss_gen2"),
        "cl_mean": mean_of("cl_mean"),
        "threshold": mean_of("threshold"),
        "reward_hi_frac": mean_of("reward_hi_frac"),
    }
    if cfg.uses_estimator:
        log["loss_ibn"] = mean_of("loss_ibn")
        log["ibn_mean"] = mean_of("ibn_mean")
    return log


def pretrain(dataset, cfg: TrainConfig, seed: int, run_dir: str | None = None,
             config_echo: dict | None = None):
    """Full pretraining loop.

    Returns (state, epoch_logs, timings_ms). When run_dir is set, writes
    final.ckpt and any cadence checkpoints there.
    """
    graphs = list(dataset.graphs)
    if len(graphs) < 2:
        raise ValueError("pretraining needs at least 2 graphs")
    feature_dim = graphs[0].x.shape[1]
    state = init_state(feature_dim, cfg, seed)
    epoch_logs = []
    timings = []
    echo = config_echo or {}
    for epoch in range(cfg.epochs):
        t0 = time.perf_counter()
        order = state.streams["batching"].permutation(len(graphs))
        step_metrics = []
        for start in range(0, len(order), cfg.batch_size):
            chunk = order[start:start + cfg.batch_size]
            if chunk.shape[0] < 2:
                logger.debug("skipping trailing chunk of size %d", chunk.shape[0])
                continue
            batch = make_batch([graphs[i] for i in chunk])
            m = train_step(batch, state, cfg)
            if not m.get("aborted"):
                step_metrics.append(m)
        if not step_metrics:
            raise RuntimeError(f"epoch {epoch}: every step aborted")
        epoch_logs.append(_epoch_aggregate(step_metrics, cfg, epoch))
        timings.append({"epoch": epoch, "wall_ms": (time.perf_counter() - t0) * 1000.0})
        state.epoch = epoch + 1
        if run_dir and cfg.checkpoint_every > 0 and (epoch + 1) % cfg.checkpoint_every == 0:
            save_checkpoint(
                f"{run_dir}/epoch_{epoch + 1:04d}.ckpt", state.groups(), echo, epoch + 1
            )
    if run_dir:
        save_checkpoint(f"{run_dir}/final.ckpt", state.groups(), echo, cfg.epochs)
    return state, epoch_logs, timings


def train_generator(graphs, feature_dim: int | None = None, hidden: int = 32, layers: int = 3,
                    latent_dim: int = 16, epochs: int = 100, lr: float = 1e-2,
                    seed: int = 0, optimizer: str = "adam", fixed_noise: bool = False):
    """Train one generator alone on plain unweighted generation loss.

    Returns (params, per-epoch mean losses). Full batch per epoch.
    fixed_noise re-seeds the reparameterization draw every epoch so the
    objective stays a single deterministic function; together with
    optimizer="gd" (plain full-batch descent at the given fixed rate)
    that makes the loss sequence monotone for small enough lr, which is
    the setting used to verify optimization progress. The default Adam
    path is what the bilevel trainer uses.
    """
    graphs = list(graphs)
    if not graphs:
        raise ValueError("no graphs to train on")
    if optimizer not in ("adam", "gd"):
        raise ValueError(f"unknown optimizer {optimizer!r}")
    feature_dim = feature_dim or graphs[0].x.shape[1]
    streams = rng_streams(seed)
    params = init_generator_params(feature_dim, hidden, layers, latent_dim, streams["init"])
    state = TrainState(theta=nt.ParamStore(), phi1=params, phi2=None, pi=None, streams=streams)
    batch = make_batch(graphs)
    losses = []
    for _ in range(epochs):
        epoch_streams = rng_streams(seed) if fixed_noise else streams
        params.zero_grad()
        with nt.Tape():
            per, _ = _per_graph_generator_losses(batch, params, epoch_streams, np.float64)
            total = per[0]
            for t in per[1:]:
                total = nt.add(total, t)
            total = nt.smul(total, 1.0 / len(per))
            loss_val = float(total.values)
            if not math.isfinite(loss_val):
                raise RuntimeError("generator training diverged to a non-finite loss")
            nt.backward(total)
        if optimizer == "adam":
            adam_update(state, "phi1", params, lr)
        else:
            for t in params.tensors():
                if t.grad is not None:
                    t.values -= lr * t.grad
        losses.append(loss_val)
    return params, losses
