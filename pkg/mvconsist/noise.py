# -*- coding: utf-8 -*-
#
# This file is part of MVConsist.
# Copyright (C) 2026 MVConsist contributors.
#
# MVConsist is free software; you can redistribute it and/or modify it
# under the terms of the MIT License; see LICENSE file for more details.

"""Initial noise for multi-view sampling."""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import torch

from mvconsist.config import (
    COORDINATE_SOURCES,
    DEFAULT_ALPHA_MIX,
    DEFAULT_STOP_FREQ,
    NOISE_MODES,
)
from mvconsist.diffusion import Schedule
from mvconsist.errors import MVConsistConfigError, MVConsistShapeError
from mvconsist.frequency import apply_mask, hpf_mask
from mvconsist.geometry import ViewSet, coordinate_field, depth_field
from mvconsist.utils import make_generator


@dataclass(frozen=True)
class NoiseBundle:
    """Noise components of one scene.

    ``eps_shared`` is ``(C, H, W)``; ``eps_view`` and ``coord`` are
    ``(N, C, H, W)``.
    """

    eps_shared: torch.Tensor
    eps_view: torch.Tensor
    coord: torch.Tensor
    w: float
    alpha_bar_T: float

    @property
    def n_views(self) -> int:
        """Number of views."""
        return self.eps_view.shape[0]


def tile_channels(field: torch.Tensor, channels: int) -> torch.Tensor:
    """Repeat the channels of ``(K, H, W)`` cyclically up to ``channels``."""
    index = torch.arange(channels) % field.shape[0]
    return field[index]


def sample_bundle(
    view_set: ViewSet,
    schedule: Schedule,
    w: float,
    seed: int,
    channels: int = 3,
    resolution: Optional[Tuple[int, int]] = None,
    coord_source: str = "coordinates",
    depth: Optional[torch.Tensor] = None,
) -> NoiseBundle:
    """Draw the noise of one scene.

    The shared draw and every per-view draw come from their own seed stream,
    so adding views leaves earlier draws unchanged.

    :param view_set: Camera ring.
    :param schedule: Diffusion schedule providing ``alpha_bar_T``.
    :param w: Weight of the coordinate field, in [0, 1].
    :param seed: Scene seed.
    :param channels: Latent channel count.
    :param resolution: Latent ``(H, W)``; the image size by default.
    :param coord_source: ``coordinates`` or ``depth``.
    :param depth: ``(N, H, W)`` synthetic depth, required for ``depth``.
    """
    if not 0.0 <= w <= 1.0:
        raise MVConsistConfigError(f"Noise weight w must lie in [0, 1], got {w}.")
    height, width = resolution or (view_set.height, view_set.width)
    n_views = view_set.n_views

    eps_shared = torch.randn(
        channels, height, width, generator=make_generator(seed, "noise", "shared")
    )
    eps_view = torch.stack(
        [
            torch.randn(
                channels,
                height,
                width,
                generator=make_generator(seed, "noise", "view", i),
            )
            for i in range(n_views)
        ]
    )

    if coord_source == "coordinates":
        coord = torch.stack(
            [
                tile_channels(coordinate_field(view_set, i, (height, width)), channels)
                for i in range(n_views)
            ]
        )
    elif coord_source == "depth":
        if depth is None:
            raise MVConsistConfigError("Depth coordinate source needs depth maps.")
        if tuple(depth.shape) != (n_views, height, width):
            raise MVConsistShapeError(
                f"Depth maps of shape {tuple(depth.shape)} do not match "
                f"{n_views} views of {height}x{width}."
            )
        normalized = depth_field(depth).to(torch.float32)
        coord = normalized[:, None].expand(-1, channels, -1, -1).contiguous()
    else:
        raise MVConsistConfigError(
            f"Unknown coordinate source {coord_source}, "
            f"expected one of {COORDINATE_SOURCES}."
        )
    return NoiseBundle(
        eps_shared=eps_shared,
        eps_view=eps_view,
        coord=coord,
        w=float(w),
        alpha_bar_T=schedule.alpha_bar_T,
    )


def coordinate_noise(bundle: NoiseBundle, i: int) -> torch.Tensor:
    """Blend the coordinate field of view ``i`` with the shared noise."""
    return bundle.w * bundle.coord[i] + (1.0 - bundle.w) * bundle.eps_shared


def init_latent(
    bundle: NoiseBundle, i: int, eps_hat: Optional[torch.Tensor] = None
) -> torch.Tensor:
    """Noisy latent of view ``i`` in forward-sample form.

    :param eps_hat: Low-frequency term standing in for the clean latent;
        :func:`coordinate_noise` by default.
    """
    if eps_hat is None:
        eps_hat = coordinate_noise(bundle, i)
    alpha_bar = bundle.alpha_bar_T
    return alpha_bar**0.5 * eps_hat + (1.0 - alpha_bar) ** 0.5 * bundle.eps_view[i]


def mixed_noise(bundle: NoiseBundle, i: int, alpha_mix: float) -> torch.Tensor:
    """Mixed noise baseline with ``alpha^2 / (1 + alpha^2)`` on the shared draw."""
    if alpha_mix < 0:
        raise MVConsistConfigError(f"alpha_mix must be non-negative, got {alpha_mix}.")
    square = float(alpha_mix) ** 2
    return (
        bundle.eps_shared * (square / (1.0 + square))
        + bundle.eps_view[i] * (1.0 / (1.0 + square))
    )


def low_freq_coordinate_noise(
    bundle: NoiseBundle, i: int, stop_freq: float
) -> torch.Tensor:
    """Low band of the coordinate field plus the high band of view noise."""
    height, width = bundle.coord.shape[-2:]
    low = apply_mask(bundle.coord[i], hpf_mask(stop_freq, height, width, "binary_lpf"))
    high = apply_mask(
        bundle.eps_view[i], hpf_mask(stop_freq, height, width, "binary_hpf")
    )
    return low + high


def initial_noise(
    bundle: NoiseBundle,
    i: int,
    mode: str,
    alpha_mix: float = DEFAULT_ALPHA_MIX,
    stop_freq: float = DEFAULT_STOP_FREQ,
) -> torch.Tensor:
    """Initial latent ``z_T`` of view ``i`` for a noise mode."""
    if mode == "independent":
        return bundle.eps_view[i].clone()
    if mode == "shared":
        return init_latent(bundle, i, eps_hat=bundle.eps_shared)
    if mode == "coordinate":
        return init_latent(bundle, i)
    if mode == "mixed":
        return mixed_noise(bundle, i, alpha_mix)
    if mode == "low_freq_coordinate":
        return low_freq_coordinate_noise(bundle, i, stop_freq)
    raise MVConsistConfigError(
        f"Unknown noise mode {mode}, expected one of {NOISE_MODES}."
    )


def initial_latents(bundle: NoiseBundle, mode: str, **kwargs) -> torch.Tensor:
    """Stack :func:`initial_noise` over every view."""
    logging.debug(f"Initializing {bundle.n_views} views with {mode} noise.")
    return torch.stack(
        [initial_noise(bundle, i, mode, **kwargs) for i in range(bundle.n_views)]
    )
