# -*- coding: utf-8 -*-
#
# This file is part of MVConsist.
# Copyright (C) 2026 MVConsist contributors.
#
# MVConsist is free software; you can redistribute it and/or modify it
# under the terms of the MIT License; see LICENSE file for more details.

"""MVConsist tests for the view geometry."""

import math

import pytest
import torch
import torch.nn.functional as F

from mvconsist.errors import MVConsistConfigError, MVConsistShapeError
from mvconsist.geometry import (
    Correspondence,
    GeometryContext,
    OverlapMask,
    adjacent_overlap_fraction,
    coordinate_field,
    correspondence,
    depth_field,
    make_view_ring,
    overlap_mask,
    pixel_grid,
    warp_features,
)


@pytest.mark.parametrize(
    "n_views, fov_deg, height, width",
    [(0, 90.0, 8, 8), (4, 0.0, 8, 8), (4, 180.0, 8, 8), (4, 90.0, 0, 8)],
)
def test_make_view_ring_rejects_invalid_arguments(n_views, fov_deg, height, width):
    with pytest.raises(MVConsistConfigError):
        make_view_ring(n_views, fov_deg, height, width)


def test_make_view_ring_layout():
    ring = make_view_ring(8, 90.0, 16, 32)
    assert ring.yaw_step_deg == 45.0
    assert ring.center_index == 4
    assert ring.yaw_deg(7) == 315.0
    assert ring.tan_half_fov_y == pytest.approx(0.5)


def test_view_index_out_of_range(view_ring):
    with pytest.raises(MVConsistConfigError, match="out of range"):
        correspondence(view_ring, 0, 8)


def test_identity_correspondence(view_ring):
    corr = correspondence(view_ring, 3, 3)
    assert corr.identity
    assert bool(corr.valid.all())
    assert torch.equal(corr.map_u, pixel_grid(16, 16))
    assert float(corr.displacement.abs().max()) == 0.0


def test_adjacent_overlap_matches_ray_cast_per_column(view_ring):
    corr = correspondence(view_ring, 0, 1)
    row = corr.valid[view_ring.height // 2]
    columns = (torch.arange(view_ring.width, dtype=torch.float64) + 0.5) / 16
    # Column angles beyond the yaw step lie in the right neighbour.
    angles = torch.atan((2.0 * columns - 1.0) * view_ring.tan_half_fov_x)
    expected = angles > math.radians(view_ring.yaw_step_deg) - math.radians(45.0)
    assert torch.equal(row, expected)
    assert float(row.double().mean()) == pytest.approx(
        adjacent_overlap_fraction(view_ring)
    )
    assert adjacent_overlap_fraction(view_ring) == pytest.approx(0.5)


@pytest.mark.parametrize(
    "n_views, fov_deg, fraction",
    [(4, 90.0, 0.0), (8, 90.0, 0.5), (1, 60.0, 1.0), (2, 60.0, 0.0)],
)
def test_adjacent_overlap_fraction(n_views, fov_deg, fraction):
    ring = make_view_ring(n_views, fov_deg, 8, 8)
    assert adjacent_overlap_fraction(ring) == pytest.approx(fraction)


def test_opposite_views_do_not_overlap(view_ring):
    corr = correspondence(view_ring, 0, 4)
    assert not bool(corr.valid.any())
    assert float(corr.displacement.abs().max()) == 0.0


def test_invalid_pixels_keep_their_coordinates(view_ring):
    corr = correspondence(view_ring, 2, 3)
    grid = pixel_grid(16, 16)
    assert torch.equal(corr.map_u[~corr.valid], grid[~corr.valid])


def _erode(mask: torch.Tensor, size: int) -> torch.Tensor:
    inverted = 1.0 - mask.double()[None, None]
    pad = size // 2
    inverted = F.pad(inverted, (pad, pad, pad, pad), value=1.0)
    grown = F.max_pool2d(inverted, size, stride=1)
    return (1.0 - grown)[0, 0]


def test_warp_composition_recovers_smooth_features():
    ring = make_view_ring(8, 90.0, 32, 32)
    grid = pixel_grid(32, 32)
    features = (0.3 + 0.5 * grid[..., 0] + 0.2 * grid[..., 1])[None]
    forward = correspondence(ring, 1, 0)
    backward = correspondence(ring, 0, 1)

    in_view_1 = warp_features(features, forward)
    recovered = warp_features(in_view_1, backward)

    safe_in_view_1 = _erode(forward.valid, 5)
    footprint = warp_features(safe_in_view_1[None], backward)[0]
    interior = backward.valid & (footprint > 1.0 - 1e-9)
    assert int(interior.sum()) > 0
    difference = (recovered - features)[0][interior].abs().max()
    assert float(difference) < 1e-4


def test_warp_features_zeroes_invalid_pixels(view_ring):
    corr = correspondence(view_ring, 0, 1)
    warped = warp_features(torch.ones(2, 3, 16, 16), corr)
    assert warped.shape == (2, 3, 16, 16)
    assert float(warped[:, :, ~corr.valid].abs().max()) == 0.0


def test_warp_features_shape_mismatch(view_ring):
    corr = correspondence(view_ring, 0, 1, (8, 8))
    with pytest.raises(MVConsistShapeError):
        warp_features(torch.ones(3, 16, 16), corr)


def test_overlap_mask_majority_pooling(view_ring):
    mask = overlap_mask(correspondence(view_ring, 0, 1), 4, 4)
    assert mask.pair == (0, 1)
    assert float(mask.mask[:, :2].abs().max()) == 0.0
    assert bool((mask.mask[1:3, 2:] == 1.0).all())


def test_overlap_mask_identity_is_full():
    corr = Correspondence.identity_map(0, 0, 8, 8)
    mask = overlap_mask(corr, 2, 2)
    assert mask.area == 4


def test_overlap_mask_requires_divisible_grid(view_ring):
    with pytest.raises(MVConsistShapeError, match="does not divide"):
        overlap_mask(correspondence(view_ring, 0, 1), 5, 5)


def test_coordinate_field_of_center_view(view_ring):
    field = coordinate_field(view_ring, view_ring.center_index, dtype=torch.float64)
    expected = torch.cos(math.pi * pixel_grid(16, 16)).permute(2, 0, 1)
    assert field.shape == (2, 16, 16)
    assert torch.allclose(field, expected, atol=1e-12)


@pytest.mark.parametrize("view", [0, 3, 7])
def test_coordinate_field_is_bounded(view_ring, view):
    field = coordinate_field(view_ring, view)
    assert field.dtype == torch.float32
    assert float(field.abs().max()) <= 1.0


def test_depth_field_normalization():
    depth = torch.tensor([[[1.0, 2.0], [3.0, 5.0]]])
    normalized = depth_field(depth)
    assert float(normalized.min()) == -1.0
    assert float(normalized.max()) == 1.0
    assert torch.equal(depth_field(torch.full((2, 3, 3), 4.0)), torch.zeros(2, 3, 3))


def test_geometry_context_caches_pairs(view_ring):
    context = GeometryContext(view_ring, indices=[2, 3])
    corr, mask = context.pair(0, 1, 4, 4)
    assert context.n_views == 2
    assert corr.source_view == 2 and corr.target_view == 3
    assert mask.pair == (0, 1)
    assert context.pair(0, 1, 4, 4)[0] is corr


def test_geometry_context_injected_pairs(view_ring):
    identity = Correspondence.identity_map(0, 1, 4, 4)
    full = OverlapMask.full((0, 1), 4, 4)
    context = GeometryContext(view_ring, pairs={(0, 1, 4, 4): (identity, full)})
    corr, mask = context.pair(0, 1, 4, 4)
    assert corr is identity
    assert mask is full


def test_geometry_context_rejects_unknown_views(view_ring):
    with pytest.raises(MVConsistConfigError):
        GeometryContext(view_ring, indices=[0, 9])


@pytest.mark.parametrize("feat_h, feat_w", [(16, 16), (8, 8), (4, 4)])
def test_overlap_area_is_symmetric(view_ring, feat_h, feat_w):
    for i in range(view_ring.n_views):
        for j in range(view_ring.n_views):
            forward = overlap_mask(correspondence(view_ring, i, j), feat_h, feat_w)
            backward = overlap_mask(correspondence(view_ring, j, i), feat_h, feat_w)
            assert forward.area == backward.area, (i, j)
