# -*- coding: utf-8 -*-
#
# This file is part of MVConsist.
# Copyright (C) 2026 MVConsist contributors.
#
# MVConsist is free software; you can redistribute it and/or modify it
# under the terms of the MIT License; see LICENSE file for more details.

"""MVConsist tests for ablation sweeps."""

import mock
import pytest
import torch

from mvconsist.ablation import (
    ABLATION_HEADERS,
    COMPONENT_ORDERING,
    AblationRow,
    WeightCache,
    ablation_table,
    base_training_hash,
    check_ordering,
    fba_training_hash,
    grid_overrides,
    grid_values,
    method_label,
    run_ablation,
    variant,
)
from mvconsist.config import COMPONENT_PRESETS
from mvconsist.denoiser import TinyUNet
from mvconsist.experiment import ExperimentConfig
from mvconsist.metrics import SceneReport


def _row(method, ratios):
    reports = [
        SceneReport(
            scene_id=index,
            overlap_psnr=20.0 * ratio,
            ground_truth_psnr=20.0,
            psnr_ratio=ratio,
            intra_distance=0.1,
        )
        for index, ratio in enumerate(ratios)
    ]
    return AblationRow(method=method, value=method, seeds=[0, 1], reports=reports)


@pytest.mark.parametrize(
    "ablation, expected",
    [
        ({"grid": "w"}, [0.0, 0.25, 0.5, 0.75, 1.0]),
        ({"grid": "filter_direction"}, ["r_t", "one_minus_r_t", "constant"]),
        ({"grid": "noise_mode", "values": ["shared"]}, ["shared"]),
        (
            {"grid": "components"},
            ["caa", "caa_shared", "caa_coordinate", "fba", "fba_xa"],
        ),
    ],
)
def test_grid_values(ablation, expected):
    config = ExperimentConfig.from_dict({"ablation": ablation})
    assert grid_values(config) == expected


@pytest.mark.parametrize(
    "grid, value, label",
    [("w", 0.5, "w=0.5"), ("w", 1, "w=1"), ("noise_mode", "shared", "shared")],
)
def test_method_label(grid, value, label):
    assert method_label(grid, value) == label


def test_variant():
    config = ExperimentConfig.from_dict({"noise": {"w": 0.5}, "seed": 0})
    point = variant(config, "filter_kind", "gaussian_hpf", seed=2)
    assert point.fba.filter_kind == "gaussian_hpf"
    assert point.seed == 2
    assert point.noise == config.noise
    assert variant(config, "w", 0.25, 0).noise.w == 0.25
    assert variant(config, "noise_mode", "shared", 0).noise.mode == "shared"


def test_training_hashes():
    config = ExperimentConfig()
    reweighted = variant(config, "w", 0.25, 0)
    refiltered = variant(config, "filter_kind", "gaussian_hpf", 0)
    remoded = variant(config, "noise_mode", "shared", 0)
    assert base_training_hash(config) == base_training_hash(reweighted)
    assert base_training_hash(config) == base_training_hash(refiltered)
    assert fba_training_hash(config) != fba_training_hash(reweighted)
    assert fba_training_hash(config) != fba_training_hash(refiltered)
    assert fba_training_hash(config) == fba_training_hash(remoded)
    assert base_training_hash(config, "a") != base_training_hash(config, "b")
    reseeded = variant(config, "w", 0.5, 1)
    assert base_training_hash(config) != base_training_hash(reseeded)


def test_weight_cache(tiny_settings, tmp_path):
    cache = WeightCache(tmp_path)
    torch.manual_seed(0)
    trained = TinyUNet(tiny_settings)
    train = mock.Mock(return_value=trained)

    torch.manual_seed(1)
    first = cache.fetch(TinyUNet(tiny_settings), "abc", "base.ckpt", train)
    assert first is trained
    assert (cache.misses, cache.hits) == (1, 0)
    assert cache.path(first, "abc", "base.ckpt").exists()

    torch.manual_seed(2)
    second = cache.fetch(TinyUNet(tiny_settings), "abc", "base.ckpt", train)
    assert (cache.misses, cache.hits) == (1, 1)
    assert train.call_count == 1
    for expected, actual in zip(trained.parameters(), second.parameters()):
        assert torch.equal(expected, actual)


def test_check_ordering_holds():
    rows = [
        _row("independent", [0.5, 0.5]),
        _row("shared", [0.7, 0.7]),
        _row("coordinate", [0.9, 0.9]),
    ]
    check = check_ordering(rows)
    assert check.holds
    assert not check.overlapping
    assert check.means["coordinate"] == pytest.approx(0.9)
    assert "holds" in check.message


def test_check_ordering_within_noise():
    rows = [
        _row("independent", [0.6, 0.8]),
        _row("shared", [0.5, 0.9]),
        _row("coordinate", [0.65, 0.65]),
    ]
    check = check_ordering(rows)
    assert not check.holds
    assert check.overlapping
    assert "does not hold" in check.message
    assert "within seed noise" in check.message


def test_check_ordering_needs_every_method():
    assert check_ordering([_row("shared", [0.5])]) is None


def test_ablation_table():
    rows = [_row(f"w={value:g}", [value, value]) for value in (0, 0.25, 0.5, 0.75, 1)]
    table = ablation_table(rows)
    assert table.headers == ABLATION_HEADERS
    assert table.height == 5
    assert table[2][table.headers.index("psnr_ratio")] == pytest.approx(0.5)
    assert table[2][table.headers.index("scenes")] == 2


def test_run_ablation_sweeps_values_and_seeds(tiny_dataset, tmp_path):
    config = ExperimentConfig.from_dict(
        {"ablation": {"grid": "w", "values": [0.0, 1.0], "seeds": [0, 1, 2]}}
    )

    def evaluate(point, dataset, samples, scene_ids, method):
        return [_row(method, [point.noise.w]).reports[0]]

    with mock.patch("mvconsist.ablation.trained_model") as trained, mock.patch(
        "mvconsist.ablation.generate_samples"
    ) as generate, mock.patch(
        "mvconsist.ablation.evaluate_samples", side_effect=evaluate
    ):
        rows = run_ablation(config, tiny_dataset, WeightCache(tmp_path))
    assert [row.method for row in rows] == ["w=0", "w=1"]
    assert trained.call_count == generate.call_count == 6
    assert [len(row.reports) for row in rows] == [3, 3]
    assert rows[1].summary()["psnr_ratio"] == pytest.approx(1.0)
    seeds = [call.args[0].seed for call in trained.call_args_list]
    assert seeds == [0, 1, 2, 0, 1, 2]
    assert generate.call_args_list[0].args[3] == tiny_dataset.eval_ids


@pytest.mark.parametrize(
    "value, non_overlap, weight, mode",
    [
        ("caa", False, 0.0, "independent"),
        ("caa_shared", False, 0.0, "shared"),
        ("caa_coordinate", False, 0.0, "coordinate"),
        ("fba", True, 0.0, "coordinate"),
        ("fba_xa", True, 10.0, "coordinate"),
    ],
)
def test_component_variants(value, non_overlap, weight, mode):
    config = ExperimentConfig.from_dict({"fba": {"enabled": False}})
    point = variant(config, "components", value, seed=3)
    assert point.fba.enabled
    assert point.fba.non_overlap is non_overlap
    assert point.xa.weight == weight
    assert point.noise.mode == mode
    assert point.seed == 3
    assert point.fba.filter_kind == config.fba.filter_kind


def test_component_overrides_leave_presets_untouched():
    overrides = grid_overrides("components", "caa")
    overrides["fba"]["non_overlap"] = True
    assert COMPONENT_PRESETS["caa"]["fba"]["non_overlap"] is False
    assert set(COMPONENT_ORDERING) == set(COMPONENT_PRESETS)


def test_component_training_hashes():
    config = ExperimentConfig()
    hashes = {
        value: fba_training_hash(variant(config, "components", value, 0))
        for value in COMPONENT_PRESETS
    }
    assert hashes["caa"] == hashes["caa_shared"] == hashes["caa_coordinate"]
    assert len({hashes["caa"], hashes["fba"], hashes["fba_xa"]}) == 3


@pytest.mark.parametrize(
    "value, kind, direction",
    [
        ("gaussian_lpf", "gaussian_lpf", "r_t"),
        ("gaussian_lpf:constant", "gaussian_lpf", "constant"),
        ("binary_hpf:one_minus_r_t", "binary_hpf", "one_minus_r_t"),
    ],
)
def test_filter_kind_variant_with_direction(value, kind, direction):
    config = ExperimentConfig.from_dict({"fba": {"filter_direction": "r_t"}})
    point = variant(config, "filter_kind", value, seed=0)
    assert point.fba.filter_kind == kind
    assert point.fba.filter_direction == direction


def test_noise_mode_sweep_trains_once(tiny_dataset, tmp_path):
    config = ExperimentConfig.from_dict(
        {
            "views": {"n_views": 8, "fov_deg": 90.0, "height": 16, "width": 16},
            "diffusion": {"T": 5},
            "model": {"widths": [4, 4], "prompt_dim": 4},
            "ablation": {
                "grid": "noise_mode",
                "values": ["coordinate", "shared", "independent"],
                "seeds": [0],
            },
        }
    )
    cache = WeightCache(tmp_path / "cache")

    def fit(point, dataset, model):
        return model, None

    with mock.patch(
        "mvconsist.ablation.fit_base", side_effect=fit
    ) as fit_base, mock.patch(
        "mvconsist.ablation.fit_fba", side_effect=fit
    ) as fit_fba, mock.patch(
        "mvconsist.ablation.generate_samples"
    ), mock.patch(
        "mvconsist.ablation.evaluate_samples",
        side_effect=lambda point, *args: [_row("x", [0.5]).reports[0]],
    ):
        rows = run_ablation(config, tiny_dataset, cache)
    assert [row.method for row in rows] == ["coordinate", "shared", "independent"]
    assert (cache.misses, cache.hits) == (2, 4)
    assert fit_base.call_count == fit_fba.call_count == 1
