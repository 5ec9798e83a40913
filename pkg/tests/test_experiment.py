# -*- coding: utf-8 -*-
#
# This file is part of MVConsist.
# Copyright (C) 2026 MVConsist contributors.
#
# MVConsist is free software; you can redistribute it and/or modify it
# under the terms of the MIT License; see LICENSE file for more details.

"""MVConsist tests for experiment configuration."""

from contextlib import nullcontext as does_not_raise

import pytest
import yaml

from mvconsist.errors import MVConsistConfigError
from mvconsist.experiment import (
    ExperimentConfig,
    load_config,
    merge_dicts,
    read_config_file,
    save_config,
)


def test_defaults():
    config = ExperimentConfig.from_dict({})
    assert config == ExperimentConfig()
    assert config.views.n_views == 8
    assert config.views.fov_deg == 90.0
    assert config.diffusion.T == 100
    assert config.noise.w == 0.5
    assert config.xa.weight == 10.0
    assert config.fba.filter_kind == "binary_hpf"


def test_lambda_key():
    config = ExperimentConfig.from_dict({"xa": {"lambda": 2.5}})
    assert config.xa.weight == 2.5
    data = config.to_dict()
    assert data["xa"]["lambda"] == 2.5
    assert "weight" not in data["xa"]
    assert ExperimentConfig.from_dict(data) == config


@pytest.mark.parametrize(
    "data, expectation",
    [
        ({"views": {"n_views": 4, "fov_deg": 120}}, does_not_raise()),
        ({"noise": {"mode": "mixed", "alpha_mix": 2.0}}, does_not_raise()),
        ({"colour": "red"}, pytest.raises(MVConsistConfigError, match="colour")),
        ({"views": {"n_view": 8}}, pytest.raises(MVConsistConfigError, match="n_view")),
        ({"views": {"n_views": 0}}, pytest.raises(MVConsistConfigError)),
        ({"views": {"n_views": "8"}}, pytest.raises(MVConsistConfigError)),
        ({"views": {"fov_deg": 180}}, pytest.raises(MVConsistConfigError)),
        ({"noise": {"mode": "pink"}}, pytest.raises(MVConsistConfigError)),
        ({"noise": {"w": 1.2}}, pytest.raises(MVConsistConfigError)),
        ({"model": {"widths": [8]}}, pytest.raises(MVConsistConfigError)),
        ({"xa": {"weight": 1.0}}, pytest.raises(MVConsistConfigError)),
        (
            {"views": {"height": 30}},
            pytest.raises(MVConsistConfigError, match="divisible by 4"),
        ),
        (
            {"ablation": {"grid": "noise_mode", "values": ["pink"]}},
            pytest.raises(MVConsistConfigError, match="Unknown noise_mode"),
        ),
    ],
)
def test_from_dict_validation(data, expectation):
    with expectation:
        ExperimentConfig.from_dict(data)


def test_config_hash():
    config = ExperimentConfig.from_dict({"output_dir": "runs/a"})
    moved = ExperimentConfig.from_dict({"output_dir": "runs/b"})
    reseeded = ExperimentConfig.from_dict({"output_dir": "runs/a", "seed": 1})
    assert config.config_hash == moved.config_hash
    assert config.config_hash != reseeded.config_hash
    assert len(config.config_hash) == 16


def test_artifact_hash_ignores_ablation_settings():
    config = ExperimentConfig.from_dict({"output_dir": "runs/a"})
    swept = ExperimentConfig.from_dict(
        {"output_dir": "runs/b", "ablation": {"grid": "components", "seeds": [3]}}
    )
    reweighted = ExperimentConfig.from_dict({"noise": {"w": 0.25}})
    assert config.artifact_hash == swept.artifact_hash
    assert config.config_hash != swept.config_hash
    assert config.artifact_hash != reweighted.artifact_hash


def test_merge_dicts():
    base = {"views": {"n_views": 4, "height": 8}, "seed": 1}
    merged = merge_dicts(base, {"views": {"n_views": 6}, "seed": 2})
    assert merged == {"views": {"n_views": 6, "height": 8}, "seed": 2}
    assert base["views"]["n_views"] == 4


def test_load_config_precedence(tmp_path):
    path = tmp_path / "experiment.yaml"
    path.write_text(
        yaml.safe_dump({"views": {"n_views": 4}, "diffusion": {"T": 10}, "seed": 3})
    )
    config = load_config(path, views=6, out=str(tmp_path / "run"), smoke=True)
    assert config.views.n_views == 6
    assert config.views.height == 16
    assert config.diffusion.T == 50
    assert config.seed == 3
    assert config.output_dir == str(tmp_path / "run")
    assert load_config(path, seed=9).seed == 9


def test_smoke_preset():
    config = load_config(smoke=True)
    assert config.model.widths == [8, 16]
    assert config.train.base_steps == 400
    assert config.dataset.n_scenes == 4
    assert config.ablation.seeds == [0]


@pytest.mark.parametrize(
    "content, match",
    [("views: [1, 2", "Cannot read"), ("- 1\n- 2\n", "must be a mapping")],
)
def test_read_config_file_errors(tmp_path, content, match):
    path = tmp_path / "broken.yaml"
    path.write_text(content)
    with pytest.raises(MVConsistConfigError, match=match):
        read_config_file(path)


def test_empty_config_file(tmp_path):
    path = tmp_path / "empty.yaml"
    path.write_text("")
    assert read_config_file(path) == {}


def test_save_config(tmp_path):
    config = ExperimentConfig.from_dict({"seed": 4, "xa": {"lambda": 1.0}})
    save_config(config, tmp_path)
    assert (tmp_path / "config.sha").read_text().strip() == config.config_hash
    assert load_config(tmp_path / "config.yaml") == config
