# -*- coding: utf-8 -*-
#
# This file is part of MVConsist.
# Copyright (C) 2026 MVConsist contributors.
#
# MVConsist is free software; you can redistribute it and/or modify it
# under the terms of the MIT License; see LICENSE file for more details.

"""Test command line application."""

import json
import pathlib

import pytest
import yaml
from click.testing import CliRunner

from mvconsist.cli import mvconsist, parse_grid_values
from mvconsist.errors import MVConsistConfigError
from mvconsist.utils import read_json_lines
from mvconsist.version import __version__


def _run_dir(config_file: pathlib.Path) -> pathlib.Path:
    return pathlib.Path(yaml.safe_load(config_file.read_text())["output_dir"])


def _json_rows(output: str):
    lines = [line for line in output.splitlines() if line.startswith("[")]
    return json.loads(lines[-1])


def _invoke(*args):
    return CliRunner().invoke(mvconsist, [str(arg) for arg in args])


def test_version():
    result = _invoke("--version")
    assert result.exit_code == 0
    assert __version__ in result.output


def test_full_pipeline(smoke_config_file):
    """Run every stage of an experiment on the smoke configuration."""
    run_dir = _run_dir(smoke_config_file)

    result = _invoke("gen-data", "--config", smoke_config_file)
    assert result.exit_code == 0, result.output
    assert "Generated 2 scenes (1 train, 1 eval)" in result.output
    assert (run_dir / "dataset.pt").exists()
    assert (run_dir / "config.sha").exists()

    result = _invoke("train-base", "--config", smoke_config_file)
    assert result.exit_code == 0, result.output
    assert "Base denoiser at step 2" in result.output
    assert (run_dir / "base.ckpt").exists()

    result = _invoke("train-fba", "--config", smoke_config_file)
    assert result.exit_code == 0, result.output
    assert "Multi-view blocks at step 1" in result.output
    assert (run_dir / "fba.ckpt").exists()

    result = _invoke("sample", "--config", smoke_config_file)
    assert result.exit_code == 0, result.output
    assert "Sampled 1 scenes of 8 views" in result.output
    assert (run_dir / "samples" / "scene_0001" / "view_07.png").exists()

    result = _invoke("eval", "--config", smoke_config_file, "--json")
    assert result.exit_code == 0, result.output
    summary = _json_rows(result.output)[0]
    assert summary["method"] == "coordinate/w=0.5/binary_hpf"
    assert summary["scenes"] == 1
    reports = read_json_lines(run_dir / "reports.jsonl")
    assert [report["scene_id"] for report in reports] == [1]
    assert (run_dir / "summary.csv").exists()

    result = _invoke("eval", "--config", smoke_config_file, "--ground-truth", "--json")
    assert result.exit_code == 0, result.output
    summary = _json_rows(result.output)[0]
    assert summary["method"] == "ground_truth"
    assert summary["psnr_ratio"] == pytest.approx(1.0)

    result = _invoke(
        "eval", "--config", smoke_config_file, "--ground-truth", "--noise-correlation"
    )
    assert result.exit_code == 0, result.output
    assert "correlation" in result.output

    result = _invoke("train-base", "--config", smoke_config_file)
    assert result.exit_code == 0, result.output
    assert "Base denoiser at step 2" in result.output


def test_ablate(smoke_config_file):
    run_dir = _run_dir(smoke_config_file)
    assert _invoke("gen-data", "--config", smoke_config_file).exit_code == 0
    result = _invoke(
        "ablate",
        "--config",
        smoke_config_file,
        "--values",
        "coordinate,shared,independent",
        "--json",
    )
    assert result.exit_code == 0, result.output
    rows = _json_rows(result.output)
    assert [row["method"] for row in rows] == ["coordinate", "shared", "independent"]
    assert "psnr_ratio: coordinate" in result.output
    assert (run_dir / "ablation.csv").exists()
    assert len(list((run_dir / "cache").glob("*/*/fba.ckpt"))) == 1


@pytest.mark.parametrize(
    "command, producer",
    [
        ("train-base", "gen-data"),
        ("sample", "gen-data"),
        ("eval", "gen-data"),
        ("ablate", "gen-data"),
    ],
)
def test_missing_prerequisite(smoke_config_file, command, producer):
    result = _invoke(command, "--config", smoke_config_file)
    assert result.exit_code == 2
    assert f"Please run `mvconsist {producer}` first." in result.output


def test_stage_order(smoke_config_file):
    assert _invoke("gen-data", "--config", smoke_config_file).exit_code == 0
    result = _invoke("train-fba", "--config", smoke_config_file)
    assert result.exit_code == 2
    assert "Please run `mvconsist train-base` first." in result.output
    result = _invoke("eval", "--config", smoke_config_file)
    assert result.exit_code == 2
    assert "Please run `mvconsist sample` first." in result.output


def test_run_directory_refuses_a_changed_configuration(smoke_config_file):
    run_dir = _run_dir(smoke_config_file)
    assert _invoke("gen-data", "--config", smoke_config_file).exit_code == 0
    config_sha = (run_dir / "config.sha").read_text()

    result = _invoke("train-base", "--config", smoke_config_file, "--seed", "1")
    assert result.exit_code == 1
    assert "fresh --out" in result.output
    assert not (run_dir / "base.ckpt").exists()
    assert (run_dir / "config.sha").read_text() == config_sha

    changed = yaml.safe_load(smoke_config_file.read_text())
    changed.setdefault("noise", {})["w"] = 0.25
    smoke_config_file.write_text(yaml.safe_dump(changed))
    result = _invoke("train-base", "--config", smoke_config_file)
    assert result.exit_code == 1
    assert "was created with configuration" in result.output


def test_invalid_configuration(tmp_path):
    path = tmp_path / "config.yaml"
    path.write_text(yaml.safe_dump({"views": {"n_views": 8, "colour": "red"}}))
    result = _invoke("gen-data", "--config", path, "--out", tmp_path / "run")
    assert result.exit_code == 1
    assert "Invalid configuration" in result.output


@pytest.mark.parametrize(
    "args",
    [
        ["gen-data", "--views", "0"],
        ["ablate", "--grid", "colour"],
        ["gen-data", "--config", "does-not-exist.yaml"],
        ["unknown-command"],
    ],
)
def test_usage_errors(args):
    assert _invoke(*args).exit_code == 1


@pytest.mark.parametrize(
    "grid, text, expected",
    [
        ("w", "0, 0.5,1", [0.0, 0.5, 1.0]),
        ("noise_mode", "shared,coordinate,", ["shared", "coordinate"]),
    ],
)
def test_parse_grid_values(grid, text, expected):
    assert parse_grid_values(grid, text) == expected


def test_parse_grid_values_rejects_text_weights():
    with pytest.raises(MVConsistConfigError, match="must be numbers"):
        parse_grid_values("w", "low,high")
