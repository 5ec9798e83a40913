# -*- coding: utf-8 -*-
#
# This file is part of MVConsist.
# Copyright (C) 2026 MVConsist contributors.
#
# MVConsist is free software; you can redistribute it and/or modify it
# under the terms of the MIT License; see LICENSE file for more details.

"""Camera ring geometry.

Every view is a pinhole camera sharing one center and differing only by its
yaw. Pixel coordinates are normalized to [0, 1] with pixel ``x`` centered at
``(x + 0.5) / width``; camera space has ``x`` pointing right, ``y`` down and
``z`` along the optical axis.
"""

import math
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import torch
import torch.nn.functional as F

from mvconsist.errors import MVConsistConfigError, MVConsistShapeError

_MIN_DEPTH = 1e-9


@dataclass(frozen=True)
class ViewSet:
    """Ring of views rotating about a shared camera center."""

    n_views: int
    yaw_step_deg: float
    fov_deg: float
    height: int
    width: int
    center_index: int

    def yaw_deg(self, i: int) -> float:
        """Return the yaw of view ``i`` in degrees."""
        return (i * self.yaw_step_deg) % 360.0

    @property
    def tan_half_fov_x(self) -> float:
        """Half-width of the image plane at unit depth."""
        return math.tan(math.radians(self.fov_deg) / 2.0)

    @property
    def tan_half_fov_y(self) -> float:
        """Half-height of the image plane at unit depth (square pixels)."""
        return self.tan_half_fov_x * self.height / self.width

    def check_index(self, i: int) -> None:
        """Raise if ``i`` is not a view of the ring."""
        if not 0 <= i < self.n_views:
            raise MVConsistConfigError(
                f"View index {i} is out of range for a ring of {self.n_views} views."
            )

    def to_dict(self) -> Dict:
        """Serialize the ring."""
        return {
            "n_views": self.n_views,
            "fov_deg": self.fov_deg,
            "height": self.height,
            "width": self.width,
        }


@dataclass(frozen=True)
class Correspondence:
    """Where every pixel of ``source_view`` lands in ``target_view``.

    ``map_u`` has shape ``(h, w, 2)`` holding normalized ``(x, y)`` target
    coordinates; pixels outside the target frustum are flagged invalid in
    ``valid`` and keep their own source coordinates.
    """

    source_view: int
    target_view: int
    map_u: torch.Tensor
    valid: torch.Tensor
    identity: bool = False

    @property
    def resolution(self) -> Tuple[int, int]:
        """Grid resolution ``(h, w)`` of the map."""
        return tuple(self.valid.shape)

    @property
    def displacement(self) -> torch.Tensor:
        """Displacement ``u* - u`` in normalized units, shape ``(h, w, 2)``."""
        return self.map_u - pixel_grid(*self.resolution, dtype=self.map_u.dtype)

    @classmethod
    def identity_map(
        cls, source_view: int, target_view: int, height: int, width: int
    ) -> "Correspondence":
        """Build an identity correspondence with every pixel valid."""
        return cls(
            source_view=source_view,
            target_view=target_view,
            map_u=pixel_grid(height, width),
            valid=torch.ones(height, width, dtype=torch.bool),
            identity=True,
        )


@dataclass(frozen=True)
class OverlapMask:
    """Binary overlap mask of a view pair at a feature resolution."""

    mask: torch.Tensor
    pair: Tuple[int, int]

    @property
    def area(self) -> int:
        """Number of overlapping cells."""
        return int(self.mask.sum().item())

    @classmethod
    def full(cls, pair: Tuple[int, int], height: int, width: int) -> "OverlapMask":
        """Build an all-ones mask."""
        return cls(mask=torch.ones(height, width), pair=pair)


def make_view_ring(n_views: int, fov_deg: float, height: int, width: int) -> ViewSet:
    """Build a ring of ``n_views`` equally spaced views.

    :param n_views: Number of views, at least one.
    :param fov_deg: Horizontal field of view in degrees, in (0, 180).
    :param height: Image height in pixels.
    :param width: Image width in pixels.
    :raises MVConsistConfigError: If any argument is out of range.
    """
    if n_views < 1:
        raise MVConsistConfigError("A view ring needs at least one view.")
    if not 0.0 < fov_deg < 180.0:
        raise MVConsistConfigError(
            f"Field of view must lie in (0, 180) degrees, got {fov_deg}."
        )
    if height < 1 or width < 1:
        raise MVConsistConfigError(f"Invalid image size {height}x{width}.")
    return ViewSet(
        n_views=n_views,
        yaw_step_deg=360.0 / n_views,
        fov_deg=float(fov_deg),
        height=height,
        width=width,
        center_index=n_views // 2,
    )


def pixel_grid(height: int, width: int, dtype=torch.float64) -> torch.Tensor:
    """Normalized pixel-center coordinates ``(x, y)``, shape ``(h, w, 2)``."""
    ys = (torch.arange(height, dtype=dtype) + 0.5) / height
    xs = (torch.arange(width, dtype=dtype) + 0.5) / width
    grid_y, grid_x = torch.meshgrid(ys, xs, indexing="ij")
    return torch.stack([grid_x, grid_y], dim=-1)


def _yaw_matrix(yaw_deg: float) -> torch.Tensor:
    """Rotation taking camera coordinates of a yawed view to world coordinates."""
    yaw = math.radians(yaw_deg)
    cos, sin = math.cos(yaw), math.sin(yaw)
    return torch.tensor(
        [[cos, 0.0, sin], [0.0, 1.0, 0.0], [-sin, 0.0, cos]], dtype=torch.float64
    )


def _resolution(view_set: ViewSet, resolution: Optional[Tuple[int, int]]):
    return resolution if resolution is not None else (view_set.height, view_set.width)


def camera_rays(
    view_set: ViewSet, resolution: Optional[Tuple[int, int]] = None
) -> torch.Tensor:
    """Unnormalized camera-space rays through every pixel center, ``(h, w, 3)``."""
    height, width = _resolution(view_set, resolution)
    grid = pixel_grid(height, width)
    x = (2.0 * grid[..., 0] - 1.0) * view_set.tan_half_fov_x
    y = (2.0 * grid[..., 1] - 1.0) * view_set.tan_half_fov_y
    return torch.stack([x, y, torch.ones_like(x)], dim=-1)


def ray_directions(
    view_set: ViewSet, i: int, resolution: Optional[Tuple[int, int]] = None
) -> torch.Tensor:
    """World-space rays through the pixel centers of view ``i``, ``(h, w, 3)``."""
    view_set.check_index(i)
    return camera_rays(view_set, resolution) @ _yaw_matrix(view_set.yaw_deg(i)).T


def _project(view_set: ViewSet, rays: torch.Tensor):
    """Project camera-space rays to normalized coordinates and in-frustum flags."""
    z = rays[..., 2]
    safe_z = torch.where(
        z.abs() < _MIN_DEPTH,
        torch.where(z < 0, -_MIN_DEPTH, _MIN_DEPTH) * torch.ones_like(z),
        z,
    )
    x = (rays[..., 0] / safe_z / view_set.tan_half_fov_x + 1.0) / 2.0
    y = (rays[..., 1] / safe_z / view_set.tan_half_fov_y + 1.0) / 2.0
    coords = torch.stack([x, y], dim=-1)
    inside = (z > _MIN_DEPTH) & (coords >= 0.0).all(-1) & (coords <= 1.0).all(-1)
    return coords, inside


def correspondence(
    view_set: ViewSet,
    i: int,
    j: int,
    resolution: Optional[Tuple[int, int]] = None,
) -> Correspondence:
    """Map every pixel of view ``i`` into view ``j``.

    :param view_set: Camera ring.
    :param i: Source view.
    :param j: Target view.
    :param resolution: Grid ``(h, w)`` on which to evaluate the map; defaults to
        the image resolution.
    """
    view_set.check_index(i)
    view_set.check_index(j)
    height, width = _resolution(view_set, resolution)
    if i == j:
        return Correspondence.identity_map(i, j, height, width)

    rotation = _yaw_matrix(view_set.yaw_deg(j)).T @ _yaw_matrix(view_set.yaw_deg(i))
    rays = camera_rays(view_set, (height, width)) @ rotation.T
    coords, valid = _project(view_set, rays)
    map_u = torch.where(valid[..., None], coords, pixel_grid(height, width))
    return Correspondence(source_view=i, target_view=j, map_u=map_u, valid=valid)


def overlap_mask(corr: Correspondence, feat_h: int, feat_w: int) -> OverlapMask:
    """Pool the validity of a correspondence down to a feature grid.

    A cell is set iff strictly more than half of its pixels are valid.

    :raises MVConsistShapeError: If the feature grid does not divide the image grid.
    """
    height, width = corr.resolution
    if height % feat_h or width % feat_w:
        raise MVConsistShapeError(
            f"Feature resolution {feat_h}x{feat_w} does not divide "
            f"correspondence resolution {height}x{width}."
        )
    if corr.identity:
        return OverlapMask.full((corr.source_view, corr.target_view), feat_h, feat_w)
    pooled = F.avg_pool2d(
        corr.valid.to(torch.float64)[None, None],
        kernel_size=(height // feat_h, width // feat_w),
    )[0, 0]
    return OverlapMask(
        mask=(pooled > 0.5).to(torch.float32),
        pair=(corr.source_view, corr.target_view),
    )


def coordinate_field(
    view_set: ViewSet,
    i: int,
    resolution: Optional[Tuple[int, int]] = None,
    dtype=torch.float32,
) -> torch.Tensor:
    """Cosine-remapped coordinates of view ``i`` in the center view frame.

    The rays of view ``i`` are rotated into the center view and projected with
    the rotation homography; ``cos(pi * coordinate)`` keeps every value in
    [-1, 1]. Returns ``(2, h, w)`` with the ``x`` channel first.
    """
    view_set.check_index(i)
    rotation = _yaw_matrix(view_set.yaw_deg(view_set.center_index)).T @ _yaw_matrix(
        view_set.yaw_deg(i)
    )
    coords, _ = _project(view_set, camera_rays(view_set, resolution) @ rotation.T)
    return torch.cos(math.pi * coords).permute(2, 0, 1).to(dtype).contiguous()


def warp_features(features_j: torch.Tensor, corr: Correspondence) -> torch.Tensor:
    """Bilinearly sample target-view features at the corresponding locations.

    :param features_j: ``(C, h, w)`` or ``(N, C, h, w)`` features of the target view.
    :param corr: Correspondence from the source view into the target view.
    :return: Features on the source grid, zero where ``corr`` is invalid.
    """
    if tuple(features_j.shape[-2:]) != corr.resolution:
        raise MVConsistShapeError(
            f"Features of size {tuple(features_j.shape[-2:])} cannot be warped "
            f"with a correspondence of size {corr.resolution}."
        )
    if corr.identity:
        return features_j.clone()
    batched = features_j if features_j.dim() == 4 else features_j[None]
    grid = (2.0 * corr.map_u - 1.0).to(features_j.dtype)
    grid = grid[None].expand(batched.shape[0], -1, -1, -1)
    warped = F.grid_sample(
        batched, grid, mode="bilinear", padding_mode="border", align_corners=False
    )
    warped = warped * corr.valid.to(features_j.dtype)
    return warped if features_j.dim() == 4 else warped[0]


def adjacent_overlap_fraction(view_set: ViewSet) -> float:
    """Fraction of columns of a view that also lie inside its right neighbour."""
    if view_set.n_views == 1:
        return 1.0
    half = math.radians(view_set.fov_deg) / 2.0
    offset = math.radians(view_set.yaw_step_deg) - half
    if offset >= half or offset >= math.pi / 2.0:
        return 0.0
    fraction = (1.0 - math.tan(offset) / math.tan(half)) / 2.0
    return min(max(fraction, 0.0), 1.0)


def depth_field(depth: torch.Tensor) -> torch.Tensor:
    """Normalize the depth maps of one scene to [-1, 1] with its min and max."""
    low, high = depth.min(), depth.max()
    if float(high - low) == 0.0:
        return torch.zeros_like(depth)
    return 2.0 * (depth - low) / (high - low) - 1.0


class GeometryContext:
    """Correspondences and overlap masks of a sequence of ring views.

    Local view ``k`` of the context is ring view ``indices[k]``. Results are
    cached per ``(i, j, h, w)``; ``pairs`` pre-seeds the cache.
    """

    def __init__(
        self,
        view_set: ViewSet,
        indices: Optional[Sequence[int]] = None,
        pairs: Optional[Dict] = None,
    ):
        """Initialize the geometry context.

        :param view_set: Camera ring.
        :param indices: Ring views in local order; all views by default.
        :param pairs: Optional ``{(i, j, h, w): (Correspondence, OverlapMask)}``.
        """
        self.view_set = view_set
        self.indices = (
            list(indices) if indices is not None else list(range(view_set.n_views))
        )
        for index in self.indices:
            view_set.check_index(index)
        self._pairs = dict(pairs or {})

    @property
    def n_views(self) -> int:
        """Number of views in the context."""
        return len(self.indices)

    def pair(
        self, i: int, j: int, height: int, width: int
    ) -> Tuple[Correspondence, OverlapMask]:
        """Return the correspondence and overlap mask of local views ``i -> j``."""
        key = (i, j, height, width)
        if key not in self._pairs:
            source, target = self.indices[i], self.indices[j]
            corr = correspondence(self.view_set, source, target, (height, width))
            full = correspondence(self.view_set, source, target)
            mask = overlap_mask(full, height, width)
            self._pairs[key] = (corr, OverlapMask(mask.mask, (i, j)))
        return self._pairs[key]
