# -*- coding: utf-8 -*-
#
# This file is part of MVConsist.
# Copyright (C) 2026 MVConsist contributors.
#
# MVConsist is free software; you can redistribute it and/or modify it
# under the terms of the MIT License; see LICENSE file for more details.

"""Experiment configuration.

An experiment is described by one YAML file whose sections mirror the
:class:`ExperimentConfig` dataclasses. The file is validated with
marshmallow schemas; unknown keys are errors.
"""

import copy
import logging
import pathlib
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Union

import yaml
from marshmallow import RAISE, Schema, ValidationError, fields, validate

from mvconsist.config import (
    COORDINATE_SOURCES,
    CORRELATION_ALIGNMENTS,
    DEFAULT_ALPHA_MIX,
    DEFAULT_BETA_END,
    DEFAULT_BETA_START,
    DEFAULT_FOV_DEG,
    DEFAULT_LEARNING_RATE,
    DEFAULT_N_VIEWS,
    DEFAULT_NOISE_WEIGHT,
    DEFAULT_PE_BANDS,
    DEFAULT_STOP_FREQ,
    DEFAULT_TIMESTEPS,
    DEFAULT_VIEWS_PER_SAMPLE,
    DEFAULT_XA_LAMBDA,
    DENOISER_LEVELS,
    FILTER_DIRECTIONS,
    FILTER_KINDS,
    MVCONSIST_OUTPUT_DIR,
    NOISE_MODES,
    PSNR_CAP,
    XA_LAYERS,
)
from mvconsist.errors import MVConsistConfigError
from mvconsist.utils import fingerprint

ABLATION_GRIDS = ["w", "filter_kind", "filter_direction", "noise_mode", "components"]
"""Parameters the ablation command can sweep."""


@dataclass
class ViewsConfig:
    """Camera ring."""

    n_views: int = DEFAULT_N_VIEWS
    fov_deg: float = DEFAULT_FOV_DEG
    height: int = 32
    width: int = 32


@dataclass
class DiffusionConfig:
    """Variance schedule."""

    T: int = DEFAULT_TIMESTEPS
    beta_start: float = DEFAULT_BETA_START
    beta_end: float = DEFAULT_BETA_END


@dataclass
class NoiseConfig:
    """Noise initialization."""

    mode: str = "coordinate"
    w: float = DEFAULT_NOISE_WEIGHT
    alpha_mix: float = DEFAULT_ALPHA_MIX
    stop_freq: float = DEFAULT_STOP_FREQ
    coord_source: str = "coordinates"


@dataclass
class FbaConfig:
    """Fourier-based attention blocks."""

    enabled: bool = True
    layers: List[str] = field(default_factory=lambda: list(DENOISER_LEVELS))
    filter_kind: str = "binary_hpf"
    filter_direction: str = "r_t"
    stop_freq: float = DEFAULT_STOP_FREQ
    pe_bands: int = DEFAULT_PE_BANDS
    scale_attention: bool = True
    non_overlap: bool = True
    recollect_g: bool = True
    g_uses_clean_latent: bool = False


@dataclass
class XaConfig:
    """Prompt cross-attention loss."""

    weight: float = DEFAULT_XA_LAMBDA
    layers: List[str] = field(default_factory=lambda: list(XA_LAYERS))
    maps0_with_fba: bool = True


@dataclass
class ModelConfig:
    """Toy denoiser widths."""

    widths: List[int] = field(default_factory=lambda: [16, 32])
    prompt_dim: int = 16


@dataclass
class TrainConfig:
    """Training budget."""

    base_steps: int = 2000
    fba_steps: int = 1000
    batch_size: int = 16
    views_per_sample: int = DEFAULT_VIEWS_PER_SAMPLE
    learning_rate: float = DEFAULT_LEARNING_RATE


@dataclass
class DatasetConfig:
    """Procedural scenes."""

    n_scenes: int = 32
    eval_fraction: float = 0.25
    max_objects: int = 3


@dataclass
class MetricsConfig:
    """Evaluation."""

    psnr_cap: float = PSNR_CAP
    wrap_pairs: bool = True
    n_bands: int = 4
    alignment: str = "correspondence"


@dataclass
class AblationConfig:
    """Ablation sweep."""

    grid: str = "w"
    values: Optional[List[Any]] = None
    seeds: List[int] = field(default_factory=lambda: [0, 1, 2])


@dataclass
class ExperimentConfig:
    """Every setting of an experiment."""

    views: ViewsConfig = field(default_factory=ViewsConfig)
    diffusion: DiffusionConfig = field(default_factory=DiffusionConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    fba: FbaConfig = field(default_factory=FbaConfig)
    xa: XaConfig = field(default_factory=XaConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    metrics: MetricsConfig = field(default_factory=MetricsConfig)
    ablation: AblationConfig = field(default_factory=AblationConfig)
    seed: int = 0
    output_dir: str = MVCONSIST_OUTPUT_DIR

    def to_dict(self) -> Dict:
        """Serialize to the YAML key layout."""
        return ExperimentSchema().dump(asdict(self))

    @property
    def config_hash(self) -> str:
        """Fingerprint of every setting except the output directory."""
        data = self.to_dict()
        data.pop("output_dir")
        return fingerprint(data)

    @property
    def artifact_hash(self) -> str:
        """Fingerprint of the settings the artifacts of a run directory depend on.

        Ablation settings are left out: sweeps write only their own table and
        keep their weights in a content-addressed cache.
        """
        data = self.to_dict()
        data.pop("output_dir")
        data.pop("ablation")
        return fingerprint(data)

    @classmethod
    def from_dict(cls, data: Dict) -> "ExperimentConfig":
        """Validate a YAML-layout dictionary and build the configuration.

        :raises MVConsistConfigError: On unknown keys or invalid values.
        """
        try:
            loaded = ExperimentSchema().load(data or {})
        except ValidationError as error:
            raise MVConsistConfigError(f"Invalid configuration: {error.messages}")
        sections = {
            "views": ViewsConfig,
            "diffusion": DiffusionConfig,
            "noise": NoiseConfig,
            "fba": FbaConfig,
            "xa": XaConfig,
            "model": ModelConfig,
            "train": TrainConfig,
            "dataset": DatasetConfig,
            "metrics": MetricsConfig,
            "ablation": AblationConfig,
        }
        values = {
            name: section(**loaded.get(name, {}))
            for name, section in sections.items()
        }
        for key in ("seed", "output_dir"):
            if key in loaded:
                values[key] = loaded[key]
        config = cls(**values)
        from mvconsist.validation import validate_config

        validate_config(config)
        return config


def _positive_int():
    return fields.Integer(strict=True, validate=validate.Range(min=1))


def _unit_float():
    return fields.Float(validate=validate.Range(min=0.0, max=1.0))


class ViewsSchema(Schema):
    """Schema of the ``views`` section."""

    class Meta:
        unknown = RAISE

    n_views = _positive_int()
    fov_deg = fields.Float(
        validate=validate.Range(
            min=0.0, max=180.0, min_inclusive=False, max_inclusive=False
        )
    )
    height = _positive_int()
    width = _positive_int()


class DiffusionSchema(Schema):
    """Schema of the ``diffusion`` section."""

    class Meta:
        unknown = RAISE

    T = _positive_int()
    beta_start = fields.Float(
        validate=validate.Range(min=0.0, max=1.0, min_inclusive=False)
    )
    beta_end = fields.Float(
        validate=validate.Range(min=0.0, max=1.0, max_inclusive=False)
    )


class NoiseSchema(Schema):
    """Schema of the ``noise`` section."""

    class Meta:
        unknown = RAISE

    mode = fields.String(validate=validate.OneOf(NOISE_MODES))
    w = _unit_float()
    alpha_mix = fields.Float(validate=validate.Range(min=0.0))
    stop_freq = _unit_float()
    coord_source = fields.String(validate=validate.OneOf(COORDINATE_SOURCES))


class FbaSchema(Schema):
    """Schema of the ``fba`` section."""

    class Meta:
        unknown = RAISE

    enabled = fields.Boolean()
    layers = fields.List(fields.String(validate=validate.OneOf(DENOISER_LEVELS)))
    filter_kind = fields.String(validate=validate.OneOf(FILTER_KINDS))
    filter_direction = fields.String(validate=validate.OneOf(FILTER_DIRECTIONS))
    stop_freq = _unit_float()
    pe_bands = _positive_int()
    scale_attention = fields.Boolean()
    non_overlap = fields.Boolean()
    recollect_g = fields.Boolean()
    g_uses_clean_latent = fields.Boolean()


class XaSchema(Schema):
    """Schema of the ``xa`` section."""

    class Meta:
        unknown = RAISE

    weight = fields.Float(data_key="lambda", validate=validate.Range(min=0.0))
    layers = fields.List(fields.String(validate=validate.OneOf(XA_LAYERS)))
    maps0_with_fba = fields.Boolean()


class ModelSchema(Schema):
    """Schema of the ``model`` section."""

    class Meta:
        unknown = RAISE

    widths = fields.List(_positive_int(), validate=validate.Length(equal=2))
    prompt_dim = _positive_int()


class TrainSchema(Schema):
    """Schema of the ``train`` section."""

    class Meta:
        unknown = RAISE

    base_steps = fields.Integer(strict=True, validate=validate.Range(min=0))
    fba_steps = fields.Integer(strict=True, validate=validate.Range(min=0))
    batch_size = _positive_int()
    views_per_sample = _positive_int()
    learning_rate = fields.Float(validate=validate.Range(min=0.0, min_inclusive=False))


class DatasetSchema(Schema):
    """Schema of the ``dataset`` section."""

    class Meta:
        unknown = RAISE

    n_scenes = _positive_int()
    eval_fraction = fields.Float(
        validate=validate.Range(min=0.0, max=1.0, max_inclusive=False)
    )
    max_objects = _positive_int()


class MetricsSchema(Schema):
    """Schema of the ``metrics`` section."""

    class Meta:
        unknown = RAISE

    psnr_cap = fields.Float(validate=validate.Range(min=0.0, min_inclusive=False))
    wrap_pairs = fields.Boolean()
    n_bands = _positive_int()
    alignment = fields.String(validate=validate.OneOf(CORRELATION_ALIGNMENTS))


class AblationSchema(Schema):
    """Schema of the ``ablation`` section."""

    class Meta:
        unknown = RAISE

    grid = fields.String(validate=validate.OneOf(ABLATION_GRIDS))
    values = fields.List(fields.Raw(), allow_none=True)
    seeds = fields.List(fields.Integer(strict=True), validate=validate.Length(min=1))


class ExperimentSchema(Schema):
    """Schema of a whole experiment file."""

    class Meta:
        unknown = RAISE

    views = fields.Nested(ViewsSchema)
    diffusion = fields.Nested(DiffusionSchema)
    noise = fields.Nested(NoiseSchema)
    fba = fields.Nested(FbaSchema)
    xa = fields.Nested(XaSchema)
    model = fields.Nested(ModelSchema)
    train = fields.Nested(TrainSchema)
    dataset = fields.Nested(DatasetSchema)
    metrics = fields.Nested(MetricsSchema)
    ablation = fields.Nested(AblationSchema)
    seed = fields.Integer(strict=True, validate=validate.Range(min=0))
    output_dir = fields.String()


SMOKE_PRESET = {
    "views": {"height": 16, "width": 16},
    "diffusion": {"T": 50},
    "model": {"widths": [8, 16], "prompt_dim": 8},
    "train": {"base_steps": 400, "fba_steps": 100, "batch_size": 8},
    "dataset": {"n_scenes": 4},
    "ablation": {"seeds": [0]},
}
"""Tiny preset selected with ``--smoke``."""


def merge_dicts(base: Dict, update: Dict) -> Dict:
    """Recursively merge ``update`` into a copy of ``base``."""
    merged = copy.deepcopy(base)
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = merge_dicts(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def read_config_file(path: Union[str, pathlib.Path]) -> Dict:
    """Read a YAML experiment file.

    :raises MVConsistConfigError: If the file cannot be parsed.
    """
    try:
        with open(path) as config_file:
            data = yaml.safe_load(config_file)
    except (OSError, yaml.YAMLError) as error:
        raise MVConsistConfigError(f"Cannot read configuration {path}: {error}")
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise MVConsistConfigError(f"Configuration {path} must be a mapping.")
    return data


def load_config(
    path: Optional[Union[str, pathlib.Path]] = None,
    seed: Optional[int] = None,
    out: Optional[str] = None,
    views: Optional[int] = None,
    smoke: bool = False,
) -> ExperimentConfig:
    """Build the configuration of a command.

    The file (if any) is applied first, then the smoke preset, then the
    command line flags.
    """
    data = read_config_file(path) if path else {}
    if smoke:
        data = merge_dicts(data, SMOKE_PRESET)
    overrides: Dict[str, Any] = {}
    if seed is not None:
        overrides["seed"] = seed
    if out is not None:
        overrides["output_dir"] = out
    if views is not None:
        overrides["views"] = {"n_views": views}
    config = ExperimentConfig.from_dict(merge_dicts(data, overrides))
    logging.debug(f"Loaded configuration {config.config_hash}.")
    return config


def save_config(config: ExperimentConfig, run_dir: pathlib.Path) -> None:
    """Write ``config.yaml`` and ``config.sha`` into the run directory."""
    with open(run_dir / "config.yaml", "w") as config_file:
        yaml.safe_dump(config.to_dict(), config_file, sort_keys=True)
    (run_dir / "config.sha").write_text(config.config_hash + "\n")
