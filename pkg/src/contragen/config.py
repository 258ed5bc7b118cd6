"""Flat key=value configuration with dotted namespaces.

A config file holds one ``key = value`` pair per line, ``#`` comments
and blank lines are ignored. Every key has a documented default below;
unknown keys are rejected by name. CLI flags override file values, and
the fully resolved config is echoed next to the run outputs so a run can
be reproduced from the echo alone.
"""

from __future__ import annotations

import numpy as np

from .graphdata import Dataset, load_tudataset, synth_two_community
from .trainer import TrainConfig


class ConfigError(ValueError):
    pass


def _float_or_empty(s: str):
    return None if s == "" else float(s)


# key -> (default, parser, help)
SCHEMA = {
    "seed": (0, int, "global seed; every random stream derives from it"),
    "out": ("runs/run", str, "output directory for the run command"),
    "dataset.source": ("synthetic", str, "synthetic | tudataset"),
    "dataset.dir": ("", str, "directory holding TUDataset-format files"),
    "dataset.name": ("", str, "TUDataset name prefix"),
    "dataset.max_degree": (64, int, "degree-feature cap; overflow shares the top bucket"),
    "dataset.n_graphs": (200, int, "synthetic graph count"),
    "dataset.n_nodes": (40, int, "synthetic nodes per graph (even)"),
    "dataset.p_in": (0.6, float, "within-community edge probability for label 0"),
    "dataset.p_out": (0.05, float, "across-community edge probability"),
    "dataset.features": ("degree", str, "degree | ones | identity"),
    "model.layers": (3, int, "GIN rounds for encoder, estimator and generator trunks"),
    "model.hidden": (32, int, "hidden width"),
    "model.latent_dim": (16, int, "generator latent dimension"),
    "model.dtype": ("float64", str, "float64 | float32"),
    "train.principle": ("infomin", str, "none | infomin | infobn | minbn"),
    "train.delta": (0.01, float, "attenuated reward in (0, 1)"),
    "train.threshold_mode": ("mean", str, "mean-sd | mean | mean+sd"),
    "train.gamma": (None, _float_or_empty, "mixing weight in [0, 1]; required iff principle=minbn"),
    "train.epochs": (100, int, "pretraining epochs"),
    "train.batch_size": (32, int, "graphs per step (>= 2)"),
    "train.lr_theta": (1e-3, float, "encoder Adam learning rate"),
    "train.lr_phi": (1e-3, float, "generator Adam learning rate"),
    "train.lr_pi": (1e-3, float, "estimator Adam learning rate"),
    "train.checkpoint_every": (0, int, "checkpoint cadence in epochs; 0 keeps only final"),
    "train.views": ("generator", str, "generator | augment (fixed-prior baseline)"),
    "train.ablate_no_reward": (False, None, "force reward 1 everywhere (no principle gating)"),
    "train.walk_len": (0, int, "view walk length; 0 selects n per graph"),
    "train.n_walks": (0, int, "walks per view; 0 selects max(1, ceil(n/4))"),
    "augment.kind1": ("nodedrop", str, "first-view augmentation for train.views=augment"),
    "augment.kind2": ("nodedrop", str, "second-view augmentation for train.views=augment"),
    "augment.ratio": (0.2, float, "augmentation strength in [0, 1]"),
    "eval.probe_folds": (5, int, "cross-validation folds for the linear probe"),
    "eval.probe_l2": (1e-3, float, "probe L2 penalty"),
    "eval.probe_iters": (300, int, "probe gradient-descent iterations"),
    "eval.probe_lr": (0.5, float, "probe gradient-descent learning rate"),
    "eval.link_fraction": (0.1, float, "held-out edge fraction per graph for link eval"),
    "eval.max_link_graphs": (50, int, "cap on graphs used for link eval"),
    "report.figures": (True, None, "render matplotlib figures beside the delimited outputs"),
}

_BOOL_KEYS = {k for k, (d, p, h) in SCHEMA.items() if p is None}


def _parse_bool(s: str) -> bool:
    low = str(s).strip().lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise ConfigError(f"expected a boolean, got {s!r}")


def default_config() -> dict:
    return {k: d for k, (d, _, _) in SCHEMA.items()}


def parse_config_file(path: str) -> dict:
    """Raw key -> string pairs from a config file."""
    raw = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {stripped!r}")
            key, value = stripped.split("=", 1)
            raw[key.strip()] = value.strip()
    return raw


def resolve_config(file_values: dict | None = None, overrides: dict | None = None) -> dict:
    """Defaults, then file values, then overrides; values typed per schema."""
    resolved = default_config()
    for source in (file_values or {}, overrides or {}):
        for key, value in source.items():
            if key not in SCHEMA:
                raise ConfigError(f"unknown config key {key!r}")
            if isinstance(value, str):
                parser = _parse_bool if key in _BOOL_KEYS else SCHEMA[key][1]
                try:
                    resolved[key] = parser(value)
                except ConfigError:
                    raise
                except Exception:
                    raise ConfigError(f"bad value for {key!r}: {value!r}") from None
            else:
                resolved[key] = value
    validate_config(resolved)
    return resolved


def validate_config(cfg: dict) -> None:
    if cfg["train.principle"] == "minbn" and cfg["train.gamma"] is None:
        raise ConfigError("gamma required when train.principle=minbn")
    if cfg["dataset.source"] not in ("synthetic", "tudataset"):
        raise ConfigError(f"unknown dataset.source {cfg['dataset.source']!r}")
    if cfg["dataset.source"] == "tudataset" and not (cfg["dataset.dir"] and cfg["dataset.name"]):
        raise ConfigError("dataset.dir and dataset.name required for dataset.source=tudataset")
    # TrainConfig re-validates principle/delta/gamma/threshold combinations
    to_train_config(cfg)


def to_train_config(cfg: dict) -> TrainConfig:
    return TrainConfig(
        principle=cfg["train.principle"],
        delta=cfg["train.delta"],
        threshold_mode=cfg["train.threshold_mode"],
        gamma=cfg["train.gamma"],
        lr_theta=cfg["train.lr_theta"],
        lr_phi=cfg["train.lr_phi"],
        lr_pi=cfg["train.lr_pi"],
        epochs=cfg["train.epochs"],
        batch_size=cfg["train.batch_size"],
        layers=cfg["model.layers"],
        hidden=cfg["model.hidden"],
        latent_dim=cfg["model.latent_dim"],
        walk_len=cfg["train.walk_len"],
        n_walks=cfg["train.n_walks"],
        checkpoint_every=cfg["train.checkpoint_every"],
        ablate_no_reward=cfg["train.ablate_no_reward"],
        views=cfg["train.views"],
        aug_kind1=cfg["augment.kind1"],
        aug_kind2=cfg["augment.kind2"],
        aug_ratio=cfg["augment.ratio"],
        dtype=cfg["model.dtype"],
    )


def build_dataset(cfg: dict) -> Dataset:
    if cfg["dataset.source"] == "tudataset":
        return load_tudataset(cfg["dataset.dir"], cfg["dataset.name"], cfg["dataset.max_degree"])
    return synth_two_community(
        n_graphs=cfg["dataset.n_graphs"],
        n_nodes=cfg["dataset.n_nodes"],
        p_in=cfg["dataset.p_in"],
        p_out=cfg["dataset.p_out"],
        seed=cfg["seed"],
        max_degree=cfg["dataset.max_degree"],
        features=cfg["dataset.features"],
    )


def _format_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def echo_text(cfg: dict) -> str:
    """Deterministic one-key-per-line rendering of the resolved config."""
    return "".join(f"{k}={_format_value(cfg[k])}\n" for k in sorted(cfg))


def echo_dict(cfg: dict) -> dict:
    return {k: _format_value(cfg[k]) for k in sorted(cfg)}
