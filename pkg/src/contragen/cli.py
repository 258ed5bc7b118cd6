"""Command line interface: run, grid, dump-probs.

``run`` pretrains under one config and leaves run.jsonl, timing.jsonl,
final.ckpt, results.csv and config.echo in the output directory; with
report.figures=true it also renders figures beside the CSVs. ``grid``
sweeps one axis (gamma, delta or threshold) with a shared seed and
emits summary.csv with one row per value. ``dump-probs`` writes decoded
edge-probability CSVs for chosen graphs from a checkpoint. Exit status
0 means success, 1 a reported error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from multiprocessing import get_context

import numpy as np

from . import __version__
from .checkpoint import load_checkpoint, params_from_arrays
from .config import (
    ConfigError,
    build_dataset,
    echo_dict,
    echo_text,
    parse_config_file,
    resolve_config,
    to_train_config,
)
from .encoder import embed_graphs
from .evalkit import eval_generator, kfold_splits, linear_probe, make_link_eval_set, link_pred_metrics
from .generator import vgae_encode
from .graphdata import make_batch
from .trainer import pretrain, rng_streams

logger = logging.getLogger(__name__)

GAMMA_GRID = (0.1, 0.3, 0.5, 0.7, 0.9)
DELTA_GRID = (0.1, 0.01, 0.001)
THRESHOLD_GRID = ("mean-sd", "mean", "mean+sd")


def _write_jsonl(path: str, records: list) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def _link_scores(graphs, params, fraction: float, rng) -> tuple[list, list]:
    """Pooled held-out link scores over a graph sample (posterior-mean decoding)."""
    pos_all, neg_all = [], []
    for g in graphs:
        if g.num_edges < 2:
            continue
        held = make_link_eval_set(g, fraction, rng)
        kept = {(min(int(i), int(j)), max(int(i), int(j))) for i, j in held.pos_pairs}
        from .graphdata import Graph, canonical_edges

        train_edges = [e for e in map(tuple, g.edges) if e not in kept]
        g_train = Graph(n=g.n, edges=canonical_edges(train_edges, g.n), x=g.x.copy(), label=g.label)
        post = vgae_encode(make_batch([g_train]), params)
        mu = post.mu.values
        for pairs, sink in ((held.pos_pairs, pos_all), (held.neg_pairs, neg_all)):
            logits = np.einsum("ij,ij->i", mu[pairs[:, 0]], mu[pairs[:, 1]])
            z = np.exp(-np.abs(logits))
            probs = np.where(logits >= 0, 1.0 / (1.0 + z), z / (1.0 + z))
            sink.extend(float(p) for p in probs)
    return pos_all, neg_all


def run_experiment(cfg: dict, out_dir: str) -> dict:
    """Pretrain, evaluate, and write every run artifact into out_dir."""
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "config.echo"), "w", encoding="utf-8") as fh:
        fh.write(echo_text(cfg))

    dataset = build_dataset(cfg)
    train_cfg = to_train_config(cfg)
    seed = cfg["seed"]
    state, epoch_logs, timings = pretrain(
        dataset, train_cfg, seed, run_dir=out_dir, config_echo=echo_dict(cfg)
    )
    _write_jsonl(os.path.join(out_dir, "run.jsonl"), epoch_logs)
    _write_jsonl(os.path.join(out_dir, "timing.jsonl"), timings)

    run_id = os.path.basename(os.path.normpath(out_dir))
    results = {}
    rows = []

    labels = dataset.labels()
    if dataset.num_classes >= 2:
        embeds = embed_graphs(dataset.graphs, state.theta)
        splits = kfold_splits(len(dataset), cfg["eval.probe_folds"], seed)
        probe = linear_probe(
            embeds, labels, splits,
            l2=cfg["eval.probe_l2"], seed=seed,
            iters=cfg["eval.probe_iters"], lr=cfg["eval.probe_lr"],
        )
        results["probe_accuracy"] = probe.mean
        rows.append((run_id, "final", "probe_accuracy", probe.mean, probe.sd))

    if train_cfg.uses_generators:
        sample = dataset.graphs[: cfg["eval.max_link_graphs"]]
        for gname, params in (("gen1", state.phi1), ("gen2", state.phi2)):
            rng = rng_streams(seed)["linkeval"]
            pos, neg = _link_scores(sample, params, cfg["eval.link_fraction"], rng)
            if pos and neg:
                auroc_v, auprc_v = link_pred_metrics(pos, neg)
                rows.append((run_id, "final", f"link_auroc_{gname}", auroc_v, ""))
                rows.append((run_id, "final", f"link_auprc_{gname}", auprc_v, ""))
                if gname == "gen1":
                    results["link_auroc"] = auroc_v
    if epoch_logs and epoch_logs[-1]["loss_cl"] is not None:
        rows.append((run_id, "final", "loss_cl_final", epoch_logs[-1]["loss_cl"], ""))
        results["loss_cl_final"] = epoch_logs[-1]["loss_cl"]

    with open(os.path.join(out_dir, "results.csv"), "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["run_id", "checkpoint", "metric", "value", "sd"])
        writer.writerows(rows)

    if cfg["report.figures"]:
        try:
            from .figures import render_training_curves

            render_training_curves(epoch_logs, os.path.join(out_dir, "figures", "training.png"))
        except Exception as exc:  # rendering must never sink a finished run
            logger.warning("figure rendering failed: %s", exc)

    results.setdefault("probe_accuracy", None)
    results.setdefault("link_auroc", None)
    return results


def _grid_values(axis: str, raw: str | None):
    if raw:
        parts = [p.strip() for p in raw.split(",") if p.strip()]
        return parts if axis == "threshold" else [float(p) for p in parts]
    return list(
        {"gamma": GAMMA_GRID, "delta": DELTA_GRID, "threshold": THRESHOLD_GRID}[axis]
    )


def _apply_axis(cfg: dict, axis: str, value) -> dict:
    out = dict(cfg)
    if axis == "gamma":
        out["train.gamma"] = float(value)
    elif axis == "delta":
        out["train.delta"] = float(value)
    else:
        out["train.threshold_mode"] = str(value)
    return out


def _grid_worker(task):
    cfg, axis, value, sub_dir = task
    res = run_experiment(_apply_axis(cfg, axis, value), sub_dir)
    return {
        "value": value,
        "probe_accuracy": res.get("probe_accuracy"),
        "link_auroc": res.get("link_auroc"),
    }


def run_grid(cfg: dict, axis: str, values, out_dir: str, jobs: int = 1) -> list:
    """One run per value with a shared seed; rows come back in value order."""
    if axis not in ("gamma", "delta", "threshold"):
        raise ConfigError(f"unknown grid axis {axis!r}")
    if axis == "gamma" and cfg["train.principle"] != "minbn":
        raise ConfigError("gamma axis requires train.principle=minbn")
    for v in values:
        # every candidate config must validate before any run starts
        to_train_config(_apply_axis(cfg, axis, v))
    os.makedirs(out_dir, exist_ok=True)
    tasks = [
        (cfg, axis, v, os.path.join(out_dir, f"{axis}_{v}")) for v in values
    ]
    if jobs > 1:
        with get_context("fork").Pool(processes=jobs) as pool:
            rows = pool.map(_grid_worker, tasks)
    else:
        rows = [_grid_worker(t) for t in tasks]

    with open(os.path.join(out_dir, "summary.csv"), "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["value", "probe_accuracy", "link_auroc"])
        for row in rows:
            writer.writerow([
                row["value"],
                "" if row["probe_accuracy"] is None else row["probe_accuracy"],
                "" if row["link_auroc"] is None else row["link_auroc"],
            ])
    if cfg["report.figures"]:
        try:
            from .figures import render_grid_summary

            render_grid_summary(rows, axis, os.path.join(out_dir, "figures", f"grid_{axis}.png"))
        except Exception as exc:
            logger.warning("figure rendering failed: %s", exc)
    return rows


def dump_probs(cfg: dict, checkpoint_path: str, graph_indices, out_dir: str) -> list:
    """Per-graph CSVs of decoded probabilities (i, j, p_ij) plus the edge lists."""
    indices = list(graph_indices)
    if not indices:
        raise ConfigError("no graph indices given to dump-probs")
    dataset = build_dataset(cfg)
    for idx in indices:
        if not (0 <= idx < len(dataset)):
            raise ConfigError(f"graph index {idx} out of range for dataset of {len(dataset)}")
    groups, _header = load_checkpoint(checkpoint_path)
    gens = [name for name in ("phi1", "phi2") if name in groups]
    if not gens:
        raise ConfigError("checkpoint has no generator parameters")
    os.makedirs(out_dir, exist_ok=True)
    written = []
    for idx in indices:
        g = dataset[idx]
        batch = make_batch([g])
        edge_path = os.path.join(out_dir, f"graph{idx}_edges.csv")
        with open(edge_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["i", "j"])
            for i, j in g.edges:
                writer.writerow([int(i), int(j)])
        written.append(edge_path)
        for key, tag in (("phi1", "gen1"), ("phi2", "gen2")):
            if key not in groups:
                continue
            params = params_from_arrays(groups[key], requires_grad=False)
            mu = vgae_encode(batch, params).mu.values
            logits = mu @ mu.T
            z = np.exp(-np.abs(logits))
            probs = np.where(logits >= 0, 1.0 / (1.0 + z), z / (1.0 + z))
            path = os.path.join(out_dir, f"graph{idx}_{tag}_probs.csv")
            with open(path, "w", newline="", encoding="utf-8") as fh:
                writer = csv.writer(fh)
                writer.writerow(["i", "j", "p"])
                for i in range(g.n):
                    for j in range(i + 1, g.n):
                        writer.writerow([i, j, repr(float(probs[i, j]))])
            written.append(path)
    return written


# ---------------------------------------------------------------------------
# argument parsing


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", metavar="PATH", help="key=value config file")
    parser.add_argument("--seed", type=int, metavar="N")
    parser.add_argument("--principle", choices=["none", "infomin", "infobn", "minbn"])
    parser.add_argument("--gamma", type=float, metavar="F")
    parser.add_argument("--delta", type=float, metavar="F")
    parser.add_argument("--threshold-mode", choices=["mean-sd", "mean", "mean+sd"])
    parser.add_argument("--epochs", type=int, metavar="N")
    parser.add_argument("--out", metavar="DIR")
    parser.add_argument(
        "--set", action="append", default=[], metavar="KEY=VALUE",
        help="override any config key, repeatable",
    )


def _collect_overrides(args) -> dict:
    overrides: dict = {}
    flag_map = {
        "seed": "seed",
        "principle": "train.principle",
        "gamma": "train.gamma",
        "delta": "train.delta",
        "threshold_mode": "train.threshold_mode",
        "epochs": "train.epochs",
        "out": "out",
    }
    for attr, key in flag_map.items():
        value = getattr(args, attr, None)
        if value is not None:
            overrides[key] = value
    for item in getattr(args, "set", []):
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        overrides[key.strip()] = value.strip()
    return overrides


def _resolve_from_args(args) -> dict:
    file_values = parse_config_file(args.config) if args.config else None
    return resolve_config(file_values, _collect_overrides(args))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="contragen",
        description="Contrastive graph pretraining with generator-learned views",
    )
    parser.add_argument("--version", action="version", version=f"contragen {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="pretrain and evaluate one configuration")
    _add_common(p_run)

    p_grid = sub.add_parser("grid", help="sweep gamma, delta or threshold")
    _add_common(p_grid)
    p_grid.add_argument("--axis", required=True, choices=["gamma", "delta", "threshold"])
    p_grid.add_argument("--values", metavar="V1,V2,...", help="sweep values; defaults per axis")
    p_grid.add_argument("--jobs", type=int, default=1, metavar="N", help="parallel runs")

    p_dump = sub.add_parser("dump-probs", help="dump decoded edge probabilities to CSV")
    _add_common(p_dump)
    p_dump.add_argument("--checkpoint", required=True, metavar="PATH")
    p_dump.add_argument("--graphs", required=True, metavar="I1,I2,...", help="graph indices")

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _resolve_from_args(args)
        out_dir = cfg["out"]
        if args.command == "run":
            res = run_experiment(cfg, out_dir)
            print(f"run complete: {out_dir}")
            for key, value in res.items():
                if value is not None:
                    print(f"  {key} = {value:.4f}")
            return 0
        if args.command == "grid":
            values = _grid_values(args.axis, args.values)
            rows = run_grid(cfg, args.axis, values, out_dir, jobs=args.jobs)
            print(f"grid complete: {out_dir} ({len(rows)} rows)")
            return 0
        if args.command == "dump-probs":
            indices = [int(p) for p in args.graphs.split(",") if p.strip() != ""]
            written = dump_probs(cfg, args.checkpoint, indices, out_dir)
            print(f"wrote {len(written)} file(s) to {out_dir}")
            return 0
        parser.error(f"unknown command {args.command!r}")
    except (ConfigError, ValueError, FileNotFoundError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
