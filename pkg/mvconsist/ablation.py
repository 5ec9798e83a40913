# -*- coding: utf-8 -*-
#
# This file is part of MVConsist.
# Copyright (C) 2026 MVConsist contributors.
#
# MVConsist is free software; you can redistribute it and/or modify it
# under the terms of the MIT License; see LICENSE file for more details.

"""Ablation sweeps.

A sweep varies one parameter, or a preset of several, over a grid of values
and several seeds. Each grid point is trained (or taken from the weight
cache), sampled on the evaluation scenes and scored; the result is one table
row per value with 95% confidence intervals.
"""

import copy
import logging
import pathlib
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence

import tablib

from mvconsist.checkpoint import load_checkpoint, save_checkpoint
from mvconsist.config import (
    COMPONENT_PRESETS,
    FILTER_DIRECTION_SEPARATOR,
    FILTER_DIRECTIONS,
    FILTER_KINDS,
    NOISE_MODES,
)
from mvconsist.denoiser import TinyUNet
from mvconsist.experiment import ExperimentConfig, merge_dicts
from mvconsist.metrics import SUMMARY_FIELDS, SceneReport, summarize
from mvconsist.pipeline import (
    build_model,
    evaluate_samples,
    fit_base,
    fit_fba,
    generate_samples,
)
from mvconsist.scenes import SceneDataset
from mvconsist.utils import fingerprint

DEFAULT_GRID_VALUES = {
    "w": [0.0, 0.25, 0.5, 0.75, 1.0],
    "filter_kind": list(FILTER_KINDS) + ["gaussian_lpf:constant"],
    "filter_direction": list(FILTER_DIRECTIONS),
    "noise_mode": list(NOISE_MODES),
    "components": list(COMPONENT_PRESETS),
}
"""Values swept when the configuration does not list any."""

GRID_KEYS = {
    "w": ("noise", "w"),
    "filter_kind": ("fba", "filter_kind"),
    "filter_direction": ("fba", "filter_direction"),
    "noise_mode": ("noise", "mode"),
}
"""Configuration key path of every single-parameter grid."""

NOISE_ORDERING = ("coordinate", "shared", "independent")
"""Expected psnr_ratio ordering of the noise initializations, best first."""

COMPONENT_ORDERING = ("fba_xa", "fba", "caa_coordinate", "caa_shared", "caa")
"""Expected psnr_ratio ordering of the component build-up, best first."""

ABLATION_HEADERS = ["method", "value", "seeds", "scenes"] + [
    name for metric in SUMMARY_FIELDS for name in (metric, f"{metric}_ci95")
]


@dataclass
class AblationRow:
    """Aggregated metrics of one grid value over seeds and scenes."""

    method: str
    value: Any
    seeds: List[int]
    reports: List[SceneReport] = field(default_factory=list)

    def summary(self) -> Dict:
        """Means and 95% interval half-widths of the scene reports."""
        return dict(
            summarize(self.reports),
            method=self.method,
            value=self.value,
            seeds=len(self.seeds),
        )


@dataclass
class OrderingCheck:
    """Outcome of a directional comparison between rows."""

    order: Sequence[str]
    metric: str
    means: Dict[str, float]
    holds: bool
    overlapping: bool

    @property
    def message(self) -> str:
        """Human readable verdict."""
        chain = " >= ".join(
            f"{name} ({self.means[name]:.4f})" for name in self.order
        )
        verdict = "holds" if self.holds else "does not hold"
        if self.overlapping:
            verdict += "; confidence intervals overlap, ordering is within seed noise"
        return f"{self.metric}: {chain} {verdict}."


def grid_values(config: ExperimentConfig) -> List[Any]:
    """Values swept by the configured grid."""
    values = config.ablation.values
    if values is None:
        return list(DEFAULT_GRID_VALUES[config.ablation.grid])
    return list(values)


def method_label(grid: str, value: Any) -> str:
    """Row label of a grid value."""
    if grid == "w":
        return f"w={float(value):g}"
    return str(value)


def grid_overrides(grid: str, value: Any) -> Dict[str, Dict[str, Any]]:
    """Configuration sections set by one grid value.

    ``components`` values name a preset of :data:`COMPONENT_PRESETS`;
    ``filter_kind`` values of the form ``kind:direction`` also set the
    filter direction.
    """
    if grid == "components":
        return copy.deepcopy(COMPONENT_PRESETS[value])
    if grid == "filter_kind":
        kind, _, direction = str(value).partition(FILTER_DIRECTION_SEPARATOR)
        fba = {"filter_kind": kind}
        if direction:
            fba["filter_direction"] = direction
        return {"fba": fba}
    section, key = GRID_KEYS[grid]
    return {section: {key: value}}


def variant(
    config: ExperimentConfig, grid: str, value: Any, seed: int
) -> ExperimentConfig:
    """Configuration of one grid point and seed."""
    overrides = dict(grid_overrides(grid, value), seed=seed)
    return ExperimentConfig.from_dict(merge_dicts(config.to_dict(), overrides))


def base_training_hash(config: ExperimentConfig, dataset_hash: str = "") -> str:
    """Fingerprint of everything the trained base weights depend on."""
    data = config.to_dict()
    return fingerprint(
        {
            "views": data["views"],
            "diffusion": data["diffusion"],
            "model": data["model"],
            "dataset": dataset_hash or data["dataset"],
            "train": {
                key: data["train"][key]
                for key in ("base_steps", "batch_size", "learning_rate")
            },
            "seed": config.seed,
        }
    )


def fba_training_hash(config: ExperimentConfig, dataset_hash: str = "") -> str:
    """Fingerprint of everything the trained multi-view weights depend on."""
    data = config.to_dict()
    return fingerprint(
        {
            "base": base_training_hash(config, dataset_hash),
            "fba": data["fba"],
            "xa": data["xa"],
            "train": data["train"],
            # noise.mode only affects sampling; its grid reuses one training.
            "noise": {
                "w": config.noise.w,
                "coord_source": config.noise.coord_source,
            },
        }
    )


class WeightCache:
    """Trained checkpoints keyed by architecture and training configuration.

    Checkpoints live under ``<root>/<architecture hash>/<training hash>/``
    and are loaded through the architecture check of
    :func:`~mvconsist.checkpoint.load_checkpoint`.
    """

    def __init__(self, root: pathlib.Path):
        """Use ``root`` as cache directory."""
        self.root = pathlib.Path(root)
        self.hits = 0
        self.misses = 0

    def path(self, model: TinyUNet, training_hash: str, name: str) -> pathlib.Path:
        """Checkpoint location of a trained model."""
        architecture = model.settings.architecture_hash[:16]
        return self.root / architecture / training_hash / name

    def fetch(
        self,
        model: TinyUNet,
        training_hash: str,
        name: str,
        train: Callable[[TinyUNet], TinyUNet],
    ) -> TinyUNet:
        """Load the cached weights into ``model`` or train and store them."""
        path = self.path(model, training_hash, name)
        architecture_hash = model.settings.architecture_hash
        if path.exists():
            self.hits += 1
            logging.info(f"Reusing cached weights {path}.")
            return load_checkpoint(model, architecture_hash, path)
        self.misses += 1
        model = train(model)
        path.parent.mkdir(parents=True, exist_ok=True)
        save_checkpoint(model, architecture_hash, path)
        return model


def trained_model(
    config: ExperimentConfig, dataset: SceneDataset, cache: WeightCache
) -> TinyUNet:
    """Both training stages of a configuration, through the cache."""
    model = build_model(config)
    model = cache.fetch(
        model,
        base_training_hash(config, dataset.config_hash),
        "base.ckpt",
        lambda m: fit_base(config, dataset, m)[0],
    )
    return cache.fetch(
        model,
        fba_training_hash(config, dataset.config_hash),
        "fba.ckpt",
        lambda m: fit_fba(config, dataset, m)[0],
    )


def run_ablation(
    config: ExperimentConfig,
    dataset: SceneDataset,
    cache: WeightCache,
    scene_ids: Optional[Sequence[int]] = None,
) -> List[AblationRow]:
    """Sweep the configured grid over every seed."""
    grid = config.ablation.grid
    scene_ids = list(dataset.eval_ids if scene_ids is None else scene_ids)
    rows = []
    for value in grid_values(config):
        row = AblationRow(
            method=method_label(grid, value), value=value, seeds=config.ablation.seeds
        )
        for seed in config.ablation.seeds:
            point = variant(config, grid, value, seed)
            model = trained_model(point, dataset, cache)
            samples = generate_samples(point, dataset, model, scene_ids)
            row.reports += evaluate_samples(
                point, dataset, samples, scene_ids, row.method
            )
        summary = row.summary()
        logging.info(
            f"{row.method}: overlap_psnr={summary['overlap_psnr']:.3f}, "
            f"psnr_ratio={summary['psnr_ratio']:.4f}, "
            f"intra_distance={summary['intra_distance']:.4f}"
        )
        rows.append(row)
    return rows


def ablation_table(rows: Sequence[AblationRow]) -> tablib.Dataset:
    """One line per grid value, method by metric."""
    table = tablib.Dataset()
    table.headers = ABLATION_HEADERS
    for row in rows:
        summary = row.summary()
        table.append([summary[header] for header in ABLATION_HEADERS])
    return table


def check_ordering(
    rows: Sequence[AblationRow],
    order: Sequence[str] = NOISE_ORDERING,
    metric: str = "psnr_ratio",
) -> Optional[OrderingCheck]:
    """Compare rows against an expected best-first ordering.

    The check is reported, never enforced: ``holds`` tells whether the means
    follow ``order`` and ``overlapping`` whether any consecutive pair has
    overlapping 95% intervals.

    :return: ``None`` when some method of ``order`` was not swept.
    """
    summaries = {row.method: row.summary() for row in rows}
    if any(name not in summaries for name in order):
        return None
    means = {name: summaries[name][metric] for name in order}
    holds = all(means[a] >= means[b] for a, b in zip(order, order[1:]))
    overlapping = any(
        abs(means[a] - means[b])
        <= summaries[a][f"{metric}_ci95"] + summaries[b][f"{metric}_ci95"]
        for a, b in zip(order, order[1:])
    )
    return OrderingCheck(
        order=list(order),
        metric=metric,
        means=means,
        holds=holds,
        overlapping=overlapping,
    )
