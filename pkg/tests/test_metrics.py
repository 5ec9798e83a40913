# -*- coding: utf-8 -*-
#
# This file is part of MVConsist.
# Copyright (C) 2026 MVConsist contributors.
#
# MVConsist is free software; you can redistribute it and/or modify it
# under the terms of the MIT License; see LICENSE file for more details.

"""MVConsist tests for the consistency metrics."""

import math

import pytest
import torch

from mvconsist.diffusion import make_schedule
from mvconsist.errors import MVConsistConfigError, MVConsistPreconditionError
from mvconsist.geometry import make_view_ring
from mvconsist.metrics import (
    CorrelationReport,
    intra_distance,
    mean_with_interval,
    noise_correlation_report,
    overlap_psnr,
    patch_statistics,
    psnr,
    psnr_ratio,
    ring_pairs,
    scene_report,
    summarize,
)
from mvconsist.noise import sample_bundle


def test_psnr_of_constant_offset():
    a = torch.rand(3, 8, 8, dtype=torch.float64) * 0.8
    assert psnr(a, a + 0.1) == pytest.approx(20.0, abs=1e-9)


def test_psnr_cap_and_empty_mask():
    a = torch.rand(3, 4, 4)
    assert psnr(a, a) == 100.0
    assert psnr(a, a, cap=60.0) == 60.0
    assert psnr(a, a + 0.1, mask=torch.zeros(4, 4, dtype=torch.bool)) is None


def test_psnr_uses_only_masked_pixels():
    a = torch.zeros(1, 2, 2, dtype=torch.float64)
    b = a.clone()
    b[0, 0, 0] = 0.1
    b[0, 1, 1] = 1.0
    mask = torch.tensor([[True, True], [False, False]])
    assert psnr(a, b, mask) == pytest.approx(10.0 * math.log10(200.0))


@pytest.mark.parametrize(
    "n_views, wrap, expected",
    [
        (2, True, [(0, 1)]),
        (4, True, [(0, 1), (1, 2), (2, 3), (3, 0)]),
        (4, False, [(0, 1), (1, 2), (2, 3)]),
    ],
)
def test_ring_pairs(n_views, wrap, expected):
    assert ring_pairs(n_views, wrap) == expected


def test_ground_truth_ratio_is_one(tiny_dataset):
    scene = tiny_dataset.scenes[0]
    ring = tiny_dataset.view_set
    assert psnr_ratio(scene.images, scene.images, ring) == pytest.approx(1.0)
    report = scene_report(scene.images, scene.images, ring, 0, "abc", "ground_truth")
    assert report.psnr_ratio == pytest.approx(1.0)
    assert set(report.pairs) == {f"{i}-{(i + 1) % 8}" for i in range(8)}
    assert report.to_dict()["method"] == "ground_truth"


def test_overlap_psnr_preconditions(tiny_dataset):
    images = tiny_dataset.scenes[0].images
    with pytest.raises(MVConsistPreconditionError, match="at least two"):
        overlap_psnr(images[:1], tiny_dataset.view_set)
    with pytest.raises(MVConsistPreconditionError, match="overlaps"):
        overlap_psnr(images[:4], make_view_ring(4, 90.0, 16, 16))


def test_intra_distance():
    image = torch.rand(3, 16, 16)
    assert intra_distance(torch.stack([image, image, image])) == 0.0
    assert intra_distance(torch.stack([image, 1.0 - image])) > 0.0
    with pytest.raises(MVConsistPreconditionError):
        intra_distance(image[None])
    assert patch_statistics(image).shape == (16 * (3 + 3 + 8),)


def test_summarize():
    reports = [
        {"overlap_psnr": value, "psnr_ratio": value / 10.0, "intra_distance": 0.5}
        for value in (10.0, 20.0, 30.0)
    ]
    summary = summarize(reports)
    assert summary["scenes"] == 3
    assert summary["overlap_psnr"] == pytest.approx(20.0)
    assert summary["overlap_psnr_ci95"] == pytest.approx(1.96 * 10.0 / 3**0.5)
    assert summary["intra_distance_ci95"] == 0.0
    with pytest.raises(MVConsistPreconditionError):
        summarize([])
    assert mean_with_interval([4.0]) == (4.0, 0.0)


@pytest.fixture()
def ring():
    return make_view_ring(8, 90.0, 32, 32)


@pytest.fixture()
def long_schedule():
    return make_schedule(50, 1e-4, 0.02)


def test_independent_noise_is_uncorrelated(ring, long_schedule):
    bundle = sample_bundle(ring, long_schedule, 0.5, seed=0)
    report = noise_correlation_report(bundle, mode="independent")
    assert report.n_pairs == 28
    assert all(abs(value) < 0.05 for value in report.correlations)


def test_shared_noise_correlation(ring, long_schedule):
    bundle = sample_bundle(ring, long_schedule, 0.5, seed=0)
    report = noise_correlation_report(bundle, mode="shared")
    for value in report.correlations:
        assert value == pytest.approx(bundle.alpha_bar_T, abs=0.08)


def test_coordinate_noise_is_correlated_at_low_frequencies(ring, long_schedule):
    low, high = [], []
    for seed in range(20):
        bundle = sample_bundle(ring, long_schedule, 0.5, seed=seed)
        report = noise_correlation_report(
            bundle, alignment="correspondence", view_set=ring
        )
        low.append(report.correlations[0])
        high.append(report.correlations[-1])
    assert report.n_pairs == 8
    assert sum(low) / 20 > sum(high) / 20


def test_correlation_report_rows():
    rows = CorrelationReport([0.5, 0.25], n_pairs=3, alignment="pixel").rows()
    assert rows[1] == {"band": 1, "low": 0.5, "high": 1.0, "correlation": 0.25}


def test_correlation_report_errors(ring):
    latents = torch.randn(2, 3, 32, 32)
    with pytest.raises(MVConsistConfigError, match="needs the view ring"):
        noise_correlation_report(latents, alignment="correspondence")
    with pytest.raises(MVConsistConfigError, match="Unknown alignment"):
        noise_correlation_report(latents, alignment="diagonal", view_set=ring)
    with pytest.raises(MVConsistPreconditionError):
        noise_correlation_report(latents[:1])
