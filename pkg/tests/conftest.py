# -*- coding: utf-8 -*-
#
# This file is part of MVConsist.
# Copyright (C) 2026 MVConsist contributors.
#
# MVConsist is free software; you can redistribute it and/or modify it
# under the terms of the MIT License; see LICENSE file for more details.

"""Pytest configuration for MVConsist."""

import pathlib

import pytest
import torch
import yaml

from mvconsist.denoiser import DenoiserSettings, TinyUNet
from mvconsist.diffusion import make_schedule
from mvconsist.geometry import make_view_ring
from mvconsist.scenes import generate_dataset


@pytest.fixture()
def view_ring():
    """Eight views of 90 degrees at 16x16 pixels."""
    return make_view_ring(8, 90.0, 16, 16)


@pytest.fixture()
def schedule():
    """Short linear schedule."""
    return make_schedule(50, 1e-4, 0.02)


@pytest.fixture()
def tiny_settings():
    """Denoiser settings small enough for exhaustive checks."""
    return DenoiserSettings(
        height=16, width=16, widths=(8, 8), prompt_dim=8, timesteps=50
    )


@pytest.fixture()
def tiny_model(tiny_settings):
    """Seeded tiny denoiser."""
    torch.manual_seed(0)
    return TinyUNet(tiny_settings)


@pytest.fixture(scope="session")
def tiny_dataset():
    """Three procedural scenes on an eight-view ring."""
    return generate_dataset(
        make_view_ring(8, 90.0, 16, 16), n_scenes=3, seed=0, eval_fraction=0.34
    )


@pytest.fixture()
def fd_probe():
    """Compare analytic and central finite-difference gradients.

    The returned callable takes a scalar-valued closure, a leaf tensor and the
    flat indices to probe, and returns the largest relative error.
    """

    def probe(loss_fn, tensor, indices, step=1e-6):
        tensor.grad = None
        loss_fn().backward()
        analytic = tensor.grad.detach().flatten().clone()
        errors = []
        flat = tensor.data.view(-1)
        for index in indices:
            original = float(flat[index])
            flat[index] = original + step
            with torch.no_grad():
                upper = float(loss_fn())
            flat[index] = original - step
            with torch.no_grad():
                lower = float(loss_fn())
            flat[index] = original
            numeric = (upper - lower) / (2.0 * step)
            scale = max(abs(numeric), abs(float(analytic[index])), 1e-8)
            errors.append(abs(numeric - float(analytic[index])) / scale)
        return max(errors)

    return probe


@pytest.fixture()
def smoke_config_file(tmp_path: pathlib.Path):
    """Write a configuration that runs the whole pipeline in seconds."""
    config = {
        "views": {"n_views": 8, "fov_deg": 90.0, "height": 16, "width": 16},
        "diffusion": {"T": 5},
        "model": {"widths": [4, 4], "prompt_dim": 4},
        "train": {
            "base_steps": 2,
            "fba_steps": 1,
            "batch_size": 2,
            "views_per_sample": 2,
        },
        "dataset": {"n_scenes": 2, "eval_fraction": 0.5, "max_objects": 1},
        "ablation": {"grid": "noise_mode", "seeds": [0]},
        "output_dir": str(tmp_path / "run"),
    }
    path = tmp_path / "config.yaml"
    path.write_text(yaml.safe_dump(config))
    return path
