# -*- coding: utf-8 -*-
#
# This file is part of MVConsist.
# Copyright (C) 2026 MVConsist contributors.
#
# MVConsist is free software; you can redistribute it and/or modify it
# under the terms of the MIT License; see LICENSE file for more details.

"""Experiment stages and the run directory they share.

Every stage reads its prerequisites from the run directory, fails with the
command to run first when one is missing, and writes its own artifacts
next to ``config.yaml`` and ``config.sha``.
"""

import logging
import pathlib
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import tablib
import torch

from mvconsist.checkpoint import load_checkpoint, save_checkpoint
from mvconsist.denoiser import (
    DenoiserSettings,
    TinyUNet,
    count_parameters,
    sample_multiview,
)
from mvconsist.diffusion import Schedule, make_schedule
from mvconsist.errors import MVConsistConfigError
from mvconsist.experiment import ExperimentConfig, load_config, save_config
from mvconsist.geometry import GeometryContext, ViewSet, make_view_ring
from mvconsist.metrics import (
    SUMMARY_FIELDS,
    CorrelationReport,
    SceneReport,
    noise_correlation_report,
    scene_report,
    summarize,
)
from mvconsist.noise import sample_bundle
from mvconsist.scenes import SceneDataset, generate_dataset, load_dataset
from mvconsist.training import TrainingSettings, TrainState, train_base, train_fba
from mvconsist.utils import (
    create_run_directory,
    derive_seed,
    require_artifact,
    save_png,
    write_json_lines,
)


ARTIFACTS = {
    "config": "config.yaml",
    "config_sha": "config.sha",
    "dataset": "dataset.pt",
    "base_checkpoint": "base.ckpt",
    "base_state": "base.state.pt",
    "fba_checkpoint": "fba.ckpt",
    "fba_state": "fba.state.pt",
    "samples": "samples.pt",
    "sample_images": "samples",
    "reports": "reports.jsonl",
    "summary": "summary.csv",
    "ablation": "ablation.csv",
}
"""File name of every artifact in a run directory."""


@dataclass(frozen=True)
class RunPaths:
    """Artifact locations inside one run directory."""

    root: pathlib.Path
    config: pathlib.Path
    config_sha: pathlib.Path
    dataset: pathlib.Path
    base_checkpoint: pathlib.Path
    base_state: pathlib.Path
    fba_checkpoint: pathlib.Path
    fba_state: pathlib.Path
    samples: pathlib.Path
    sample_images: pathlib.Path
    reports: pathlib.Path
    summary: pathlib.Path
    ablation: pathlib.Path

    @classmethod
    def of(cls, root: pathlib.Path) -> "RunPaths":
        """Paths of the artifacts under ``root``."""
        root = pathlib.Path(root)
        return cls(root=root, **{key: root / name for key, name in ARTIFACTS.items()})


def prepare_run(config: ExperimentConfig) -> RunPaths:
    """Create the run directory and record the configuration in it.

    :raises MVConsistConfigError: If the directory already holds a run made
        with settings its artifacts depend on that differ from ``config``.
    """
    paths = RunPaths.of(create_run_directory(config.output_dir))
    if paths.config.exists():
        previous = load_config(paths.config)
        if previous.artifact_hash != config.artifact_hash:
            raise MVConsistConfigError(
                f"Run directory {paths.root} was created with configuration "
                f"{previous.config_hash}, not {config.config_hash}. Please use a "
                "fresh --out or the configuration the run was created with."
            )
    save_config(config, paths.root)
    return paths


def build_view_set(config: ExperimentConfig) -> ViewSet:
    """Camera ring of the experiment."""
    views = config.views
    return make_view_ring(views.n_views, views.fov_deg, views.height, views.width)


def build_schedule(config: ExperimentConfig) -> Schedule:
    """Diffusion schedule of the experiment."""
    diffusion = config.diffusion
    return make_schedule(diffusion.T, diffusion.beta_start, diffusion.beta_end)


def build_denoiser_settings(config: ExperimentConfig) -> DenoiserSettings:
    """Denoiser architecture and multi-view block behaviour."""
    return DenoiserSettings(
        height=config.views.height,
        width=config.views.width,
        widths=tuple(config.model.widths),
        prompt_dim=config.model.prompt_dim,
        timesteps=config.diffusion.T,
        fba_enabled=config.fba.enabled,
        fba_layers=tuple(config.fba.layers),
        xa_layers=tuple(config.xa.layers),
        pe_bands=config.fba.pe_bands,
        scale_attention=config.fba.scale_attention,
        filter_kind=config.fba.filter_kind,
        filter_direction=config.fba.filter_direction,
        stop_freq=config.fba.stop_freq,
        non_overlap=config.fba.non_overlap,
    )


def build_training_settings(config: ExperimentConfig) -> TrainingSettings:
    """Optimization settings of both training stages."""
    return TrainingSettings(
        base_steps=config.train.base_steps,
        fba_steps=config.train.fba_steps,
        batch_size=config.train.batch_size,
        views_per_sample=config.train.views_per_sample,
        learning_rate=config.train.learning_rate,
        xa_lambda=config.xa.weight,
        maps0_with_fba=config.xa.maps0_with_fba,
        g_uses_clean_latent=config.fba.g_uses_clean_latent,
        noise_w=config.noise.w,
        coord_source=config.noise.coord_source,
    )


def build_model(config: ExperimentConfig) -> TinyUNet:
    """Freshly initialized denoiser, deterministic under the seed."""
    torch.manual_seed(derive_seed(config.seed, "init"))
    return TinyUNet(build_denoiser_settings(config))


def _log_trainable(model: TinyUNet, partitions: Sequence[str]) -> None:
    logging.info(
        f"Training {count_parameters(model, partitions)} of "
        f"{count_parameters(model)} parameters ({', '.join(partitions)})."
    )


def fit_base(
    config: ExperimentConfig,
    dataset: SceneDataset,
    model: Optional[TinyUNet] = None,
    state: Optional[TrainState] = None,
) -> Tuple[TinyUNet, TrainState]:
    """Train the base partition, resuming from ``model`` and ``state``."""
    model = model if model is not None else build_model(config)
    _log_trainable(model, ["base"])
    return train_base(
        model,
        dataset,
        build_schedule(config),
        build_training_settings(config),
        config.seed,
        state,
    )


def fit_fba(
    config: ExperimentConfig,
    dataset: SceneDataset,
    model: TinyUNet,
    state: Optional[TrainState] = None,
) -> Tuple[TinyUNet, TrainState]:
    """Train the multi-view partitions of a model with a trained base."""
    _log_trainable(model, ["fba", "xa"])
    return train_fba(
        model,
        dataset,
        build_schedule(config),
        build_training_settings(config),
        config.seed,
        state,
    )


def scene_seed(config: ExperimentConfig, scene_id: int) -> int:
    """Seed of the noise and sampling draws of one scene."""
    return derive_seed(config.seed, "scene", scene_id)


def generate_samples(
    config: ExperimentConfig,
    dataset: SceneDataset,
    model: TinyUNet,
    scene_ids: Sequence[int],
) -> torch.Tensor:
    """Sample every view of the given scenes.

    :return: ``(S, N, 3, H, W)`` images in [0, 1].
    """
    view_set = dataset.view_set
    schedule = build_schedule(config)
    geometry = GeometryContext(view_set)
    model.eval()
    samples = []
    for scene_id in scene_ids:
        scene = dataset.scenes[scene_id]
        seed = scene_seed(config, scene_id)
        bundle = sample_bundle(
            view_set,
            schedule,
            config.noise.w,
            seed,
            channels=scene.images.shape[1],
            coord_source=config.noise.coord_source,
            depth=scene.depth,
        )
        samples.append(
            sample_multiview(
                model,
                view_set,
                bundle,
                schedule,
                scene.prompts,
                seed,
                mode=config.noise.mode,
                recollect_g=config.fba.recollect_g,
                geometry=geometry,
                alpha_mix=config.noise.alpha_mix,
                stop_freq=config.noise.stop_freq,
            )
        )
        logging.info(f"Sampled scene {scene_id}.")
    return torch.stack(samples)


def evaluate_samples(
    config: ExperimentConfig,
    dataset: SceneDataset,
    samples: torch.Tensor,
    scene_ids: Sequence[int],
    method: str = "",
) -> List[SceneReport]:
    """Consistency reports of sampled scenes against their ground truth."""
    return [
        scene_report(
            generated,
            dataset.scenes[scene_id].images,
            dataset.view_set,
            scene_id,
            config_hash=config.config_hash,
            method=method,
            wrap_pairs=config.metrics.wrap_pairs,
            cap=config.metrics.psnr_cap,
        )
        for scene_id, generated in zip(scene_ids, samples)
    ]


def correlation_report(
    config: ExperimentConfig, dataset: SceneDataset, scene_ids: Sequence[int]
) -> CorrelationReport:
    """Band correlations of the configured initial noise, averaged over scenes."""
    schedule = build_schedule(config)
    reports = []
    for scene_id in scene_ids:
        bundle = sample_bundle(
            dataset.view_set,
            schedule,
            config.noise.w,
            scene_seed(config, scene_id),
            coord_source=config.noise.coord_source,
            depth=dataset.scenes[scene_id].depth,
        )
        reports.append(
            noise_correlation_report(
                bundle,
                n_bands=config.metrics.n_bands,
                alignment=config.metrics.alignment,
                view_set=dataset.view_set,
                mode=config.noise.mode,
            )
        )
    bands = zip(*(report.correlations for report in reports))
    return CorrelationReport(
        correlations=[sum(values) / len(values) for values in bands],
        n_pairs=reports[0].n_pairs,
        alignment=config.metrics.alignment,
    )


def method_name(config: ExperimentConfig) -> str:
    """Short label of the sampling method of a configuration."""
    return f"{config.noise.mode}/w={config.noise.w:g}/{config.fba.filter_kind}"


def run_gen_data(config: ExperimentConfig) -> SceneDataset:
    """Render the dataset into ``dataset.pt``."""
    paths = prepare_run(config)
    dataset = generate_dataset(
        build_view_set(config),
        config.dataset.n_scenes,
        config.seed,
        max_objects=config.dataset.max_objects,
        eval_fraction=config.dataset.eval_fraction,
        config_hash=config.config_hash,
    )
    dataset.save(paths.dataset)
    return dataset


def _resume_state(
    model: TinyUNet, checkpoint: pathlib.Path, state_path: pathlib.Path
) -> Optional[TrainState]:
    if checkpoint.exists() and state_path.exists():
        load_checkpoint(model, model.settings.architecture_hash, checkpoint)
        logging.info(f"Resuming from {checkpoint}.")
        return TrainState.load(state_path)
    return None


def run_train_base(config: ExperimentConfig) -> TrainState:
    """Train the base denoiser into ``base.ckpt``, resuming if possible."""
    paths = prepare_run(config)
    dataset = load_dataset(paths.dataset)
    model = build_model(config)
    state = _resume_state(model, paths.base_checkpoint, paths.base_state)
    model, state = fit_base(config, dataset, model, state)
    save_checkpoint(model, model.settings.architecture_hash, paths.base_checkpoint)
    state.save(paths.base_state)
    return state


def run_train_fba(config: ExperimentConfig) -> TrainState:
    """Train the multi-view blocks into ``fba.ckpt``, resuming if possible."""
    paths = prepare_run(config)
    dataset = load_dataset(paths.dataset)
    require_artifact(paths.base_checkpoint, "train-base")
    model = build_model(config)
    state = _resume_state(model, paths.fba_checkpoint, paths.fba_state)
    if state is None:
        load_checkpoint(
            model, model.settings.architecture_hash, paths.base_checkpoint
        )
    model, state = fit_fba(config, dataset, model, state)
    save_checkpoint(model, model.settings.architecture_hash, paths.fba_checkpoint)
    state.save(paths.fba_state)
    return state


def load_trained_model(config: ExperimentConfig, paths: RunPaths) -> TinyUNet:
    """Model with the trained multi-view checkpoint of a run directory."""
    require_artifact(paths.fba_checkpoint, "train-fba")
    model = build_model(config)
    return load_checkpoint(
        model, model.settings.architecture_hash, paths.fba_checkpoint
    )


def save_samples(
    paths: RunPaths,
    samples: torch.Tensor,
    scene_ids: Sequence[int],
    config: ExperimentConfig,
) -> None:
    """Write ``samples.pt`` and one PNG per view."""
    torch.save(
        {
            "config_hash": config.config_hash,
            "method": method_name(config),
            "scene_ids": list(scene_ids),
            "images": samples,
        },
        paths.samples,
    )
    for scene_id, images in zip(scene_ids, samples):
        for view, image in enumerate(images):
            save_png(
                image,
                paths.sample_images / f"scene_{scene_id:04d}" / f"view_{view:02d}.png",
            )
    logging.info(f"Wrote {len(scene_ids)} sampled scenes to {paths.samples}.")


def run_sample(config: ExperimentConfig) -> torch.Tensor:
    """Sample the evaluation scenes into ``samples.pt`` and PNG files."""
    paths = prepare_run(config)
    dataset = load_dataset(paths.dataset)
    model = load_trained_model(config, paths)
    samples = generate_samples(config, dataset, model, dataset.eval_ids)
    save_samples(paths, samples, dataset.eval_ids, config)
    return samples


def summary_table(rows: Sequence[Dict], headers: Sequence[str]) -> tablib.Dataset:
    """Tabulate records, one row per record."""
    table = tablib.Dataset()
    table.headers = list(headers)
    for row in rows:
        table.append([row.get(header, "") for header in headers])
    return table


SUMMARY_HEADERS = ["method", "scenes"] + [
    name for field in SUMMARY_FIELDS for name in (field, f"{field}_ci95")
]


def run_eval(config: ExperimentConfig, ground_truth: bool = False) -> Dict:
    """Score the samples (or the ground truth itself) of a run directory.

    Writes ``reports.jsonl`` and ``summary.csv``.

    :param ground_truth: Score the ground-truth renders in place of samples.
    :return: The summary record.
    """
    paths = prepare_run(config)
    dataset = load_dataset(paths.dataset)
    if ground_truth:
        scene_ids = list(dataset.eval_ids)
        samples = torch.stack([dataset.scenes[i].images for i in scene_ids])
        method = "ground_truth"
    else:
        require_artifact(paths.samples, "sample")
        stored = torch.load(paths.samples)
        scene_ids, samples, method = (
            stored["scene_ids"],
            stored["images"],
            stored["method"],
        )
    reports = evaluate_samples(config, dataset, samples, scene_ids, method)
    write_json_lines((report.to_dict() for report in reports), paths.reports)
    summary = dict(summarize(reports), method=method)
    with open(paths.summary, "w") as summary_file:
        summary_file.write(summary_table([summary], SUMMARY_HEADERS).export("csv"))
    return summary
