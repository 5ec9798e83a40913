# -*- coding: utf-8 -*-
#
# This file is part of MVConsist.
# Copyright (C) 2026 MVConsist contributors.
#
# MVConsist is free software; you can redistribute it and/or modify it
# under the terms of the MIT License; see LICENSE file for more details.

"""Toy U-Net noise predictor with pluggable multi-view blocks.

The network has two resolution levels below the input (``"0"`` at full
resolution, ``"1"`` at half resolution) and a ``"mid"`` level at quarter
resolution. Each level can carry an FBA block right after its residual block;
the mid level also carries the prompt cross-attention. Parameters are
partitioned by name prefix: ``fba.*``, ``xa.*`` and everything else (base).
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import torch
import torch.nn.functional as F
from torch import nn

from mvconsist.attention import AttentionMap, FbaBlock, PromptCrossAttention
from mvconsist.config import (
    DEFAULT_PE_BANDS,
    DEFAULT_STOP_FREQ,
    DEFAULT_TIMESTEPS,
    DENOISER_LEVELS,
    PROMPT_VOCABULARY_SIZE,
    XA_LAYERS,
)
from mvconsist.diffusion import Schedule, ddpm_step
from mvconsist.encoding import sinusoidal_embedding
from mvconsist.errors import MVConsistConfigError, MVConsistShapeError
from mvconsist.geometry import GeometryContext, ViewSet
from mvconsist.noise import NoiseBundle, coordinate_noise, initial_latents
from mvconsist.utils import fingerprint, make_generator, progress

PARTITIONS = ("base", "fba", "xa")


@dataclass(frozen=True)
class DenoiserSettings:
    """Architecture and behaviour of a :class:`TinyUNet`."""

    height: int
    width: int
    channels: int = 3
    widths: Tuple[int, int] = (16, 32)
    prompt_dim: int = 16
    timesteps: int = DEFAULT_TIMESTEPS
    fba_enabled: bool = True
    fba_layers: Tuple[str, ...] = tuple(DENOISER_LEVELS)
    xa_layers: Tuple[str, ...] = tuple(XA_LAYERS)
    pe_bands: int = DEFAULT_PE_BANDS
    scale_attention: bool = True
    filter_kind: str = "binary_hpf"
    filter_direction: str = "r_t"
    stop_freq: float = DEFAULT_STOP_FREQ
    non_overlap: bool = True

    def architecture(self) -> Dict:
        """Fields that determine the parameter names and shapes."""
        return {
            "height": self.height,
            "width": self.width,
            "channels": self.channels,
            "widths": list(self.widths),
            "prompt_dim": self.prompt_dim,
            "fba_layers": sorted(self.fba_layers) if self.fba_enabled else [],
            "xa_layers": sorted(self.xa_layers),
            "pe_bands": self.pe_bands,
            "vocabulary": PROMPT_VOCABULARY_SIZE,
        }

    @property
    def architecture_hash(self) -> str:
        """Fingerprint of :meth:`architecture`."""
        return fingerprint(self.architecture(), length=64)


@dataclass
class DenoiserOutput:
    """Noise prediction with the attention maps and pre-FBA features."""

    eps: torch.Tensor
    maps: Dict[str, AttentionMap] = field(default_factory=dict)
    features: Dict[str, torch.Tensor] = field(default_factory=dict)


def _groups(channels: int) -> int:
    return math.gcd(channels, 8)


class ResBlock(nn.Module):
    """Two 3x3 convolutions with group norm, SiLU and a time-embedding shift."""

    def __init__(self, in_channels: int, out_channels: int, time_dim: int):
        """Map ``in_channels`` to ``out_channels`` under a ``time_dim`` embedding."""
        super().__init__()
        self.norm1 = nn.GroupNorm(_groups(in_channels), in_channels)
        self.conv1 = nn.Conv2d(in_channels, out_channels, 3, padding=1)
        self.time_proj = nn.Linear(time_dim, out_channels)
        self.norm2 = nn.GroupNorm(_groups(out_channels), out_channels)
        self.conv2 = nn.Conv2d(out_channels, out_channels, 3, padding=1)
        self.skip = (
            nn.Conv2d(in_channels, out_channels, 1)
            if in_channels != out_channels
            else nn.Identity()
        )

    def forward(self, x: torch.Tensor, temb: torch.Tensor) -> torch.Tensor:
        """Residual update of ``x`` conditioned on the time embedding ``temb``."""
        h = self.conv1(F.silu(self.norm1(x)))
        h = h + self.time_proj(temb)[:, :, None, None]
        h = self.conv2(F.silu(self.norm2(h)))
        return h + self.skip(x)


class TinyUNet(nn.Module):
    """Two-level U-Net predicting the noise of every view."""

    def __init__(self, settings: DenoiserSettings):
        """Build the network.

        :raises MVConsistShapeError: If the image size is not divisible by 4.
        :raises MVConsistConfigError: For unknown FBA or cross-attention levels.
        """
        super().__init__()
        if settings.height % 4 or settings.width % 4:
            raise MVConsistShapeError(
                f"Image size {settings.height}x{settings.width} must be divisible by 4."
            )
        unknown = set(settings.fba_layers) - set(DENOISER_LEVELS)
        unknown |= set(settings.xa_layers) - set(XA_LAYERS)
        if unknown:
            raise MVConsistConfigError(f"Unknown denoiser levels {sorted(unknown)}.")
        self.settings = settings
        w0, w1 = settings.widths
        time_dim = 4 * w0
        self.level_widths = {"0": w0, "1": w1, "mid": w1}

        self.time_mlp = nn.Sequential(
            nn.Linear(w0, time_dim), nn.SiLU(), nn.Linear(time_dim, time_dim)
        )
        self.prompt_embedding = nn.Embedding(
            PROMPT_VOCABULARY_SIZE, settings.prompt_dim
        )
        self.prompt_proj = nn.Linear(settings.prompt_dim, time_dim)

        self.conv_in = nn.Conv2d(settings.channels, w0, 3, padding=1)
        self.res0 = ResBlock(w0, w0, time_dim)
        self.down0 = nn.Conv2d(w0, w0, 3, stride=2, padding=1)
        self.res1 = ResBlock(w0, w1, time_dim)
        self.down1 = nn.Conv2d(w1, w1, 3, stride=2, padding=1)
        self.mid = ResBlock(w1, w1, time_dim)
        self.dec1 = ResBlock(2 * w1, w1, time_dim)
        self.dec0 = ResBlock(w1 + w0, w0, time_dim)
        self.norm_out = nn.GroupNorm(_groups(w0), w0)
        self.conv_out = nn.Conv2d(w0, settings.channels, 3, padding=1)

        fba_layers = settings.fba_layers if settings.fba_enabled else ()
        self.fba = nn.ModuleDict(
            {
                level: FbaBlock(
                    self.level_widths[level],
                    pe_bands=settings.pe_bands,
                    scale_attention=settings.scale_attention,
                    filter_kind=settings.filter_kind,
                    filter_direction=settings.filter_direction,
                    stop_freq=settings.stop_freq,
                    non_overlap=settings.non_overlap,
                )
                for level in fba_layers
            }
        )
        mid_resolution = (settings.height // 4, settings.width // 4)
        self.xa = nn.ModuleDict(
            {
                level: PromptCrossAttention(
                    self.level_widths[level], settings.prompt_dim, mid_resolution, level
                )
                for level in settings.xa_layers
            }
        )

    @property
    def needs_g_features(self) -> bool:
        """Whether any FBA block attends outside the overlap."""
        return any(block.non_overlap for block in self.fba.values())

    def partition(self) -> Dict[str, List[str]]:
        """Parameter names per partition (``base``, ``fba``, ``xa``)."""
        names = {partition: [] for partition in PARTITIONS}
        for name, _ in self.named_parameters():
            names[partition_of(name)].append(name)
        return names

    def partition_parameters(self, *partitions: str) -> List[nn.Parameter]:
        """Parameters belonging to any of ``partitions``."""
        return [
            parameter
            for name, parameter in self.named_parameters()
            if partition_of(name) in partitions
        ]

    def _apply_fba(self, level, h, t, geometry, g_features, use_fba):
        if not use_fba or level not in self.fba:
            return h
        g = g_features.get(level) if g_features else None
        return self.fba[level](h, int(t), self.settings.timesteps, geometry, g)

    def forward(
        self,
        z_t: torch.Tensor,
        t,
        prompts: torch.Tensor,
        geometry: Optional[GeometryContext] = None,
        g_features: Optional[Dict[str, torch.Tensor]] = None,
        use_fba: bool = True,
        use_xa: bool = True,
    ) -> DenoiserOutput:
        """Predict the noise of ``(N, C, H, W)`` latents.

        :param z_t: Noisy latents, one per view (or per image when the
            multi-view blocks are off).
        :param t: Shared integer step, or a ``(N,)`` tensor of steps when
            ``use_fba`` and ``use_xa`` are off.
        :param prompts: ``(N, P)`` prompt token ids.
        :param geometry: Correspondences between the ``N`` views.
        :param g_features: Coordinate-noise features per level.
        :param use_fba: Run the FBA blocks.
        :param use_xa: Run the prompt cross-attention.
        """
        n_items = z_t.shape[0]
        if isinstance(t, torch.Tensor) and t.dim() > 0:
            if (use_fba and len(self.fba)) or (use_xa and len(self.xa)):
                if bool((t != t[0]).any()):
                    raise MVConsistShapeError(
                        "All views of a multi-view forward must share one time step."
                    )
            steps = t.to(z_t.dtype)
            t = int(t[0])
        else:
            steps = torch.full((n_items,), float(t), dtype=z_t.dtype)
        if use_fba and self.fba and geometry is None:
            raise MVConsistConfigError("FBA blocks need the view geometry.")

        tokens = self.prompt_embedding(prompts)
        temb = self.time_mlp(sinusoidal_embedding(steps, self.settings.widths[0]))
        temb = temb + self.prompt_proj(tokens.mean(dim=1))

        output = DenoiserOutput(eps=z_t)
        h0 = self.res0(self.conv_in(z_t), temb)
        output.features["0"] = h0
        h0 = self._apply_fba("0", h0, t, geometry, g_features, use_fba)

        h1 = self.res1(self.down0(h0), temb)
        output.features["1"] = h1
        h1 = self._apply_fba("1", h1, t, geometry, g_features, use_fba)

        h = self.mid(self.down1(h1), temb)
        output.features["mid"] = h
        h = self._apply_fba("mid", h, t, geometry, g_features, use_fba)
        if use_xa:
            for level, layer in self.xa.items():
                h, attention = layer(h, tokens.reshape(-1, tokens.shape[-1]))
                output.maps[level] = AttentionMap(
                    weights=attention.weights,
                    layer_id=level,
                    prompt_ids=prompts.reshape(-1),
                )

        h = F.interpolate(h, scale_factor=2, mode="nearest")
        h = self.dec1(torch.cat([h, h1], dim=1), temb)
        h = F.interpolate(h, scale_factor=2, mode="nearest")
        h = self.dec0(torch.cat([h, h0], dim=1), temb)
        output.eps = self.conv_out(F.silu(self.norm_out(h)))
        return output


def partition_of(name: str) -> str:
    """Partition of a parameter name."""
    prefix = name.split(".", 1)[0]
    return prefix if prefix in ("fba", "xa") else "base"


def forward(
    model: TinyUNet,
    z_t_views: torch.Tensor,
    t: int,
    prompts: torch.Tensor,
    geometry_ctx: GeometryContext,
    g_features: Optional[Dict[str, torch.Tensor]] = None,
) -> DenoiserOutput:
    """Multi-view forward pass with every block active."""
    return model(z_t_views, t, prompts, geometry_ctx, g_features)


def encode(images: torch.Tensor) -> torch.Tensor:
    """Map images in [0, 1] to latents in [-1, 1]."""
    return 2.0 * images - 1.0


def decode(latents: torch.Tensor) -> torch.Tensor:
    """Map latents back to images clamped to [0, 1]."""
    return ((latents + 1.0) / 2.0).clamp(0.0, 1.0)


def g_latent(
    eps_hat: torch.Tensor,
    t: int,
    schedule: Schedule,
    z0: Optional[torch.Tensor] = None,
) -> torch.Tensor:
    """Latent of the coordinate-noise pass at step ``t``.

    Without ``z0`` the clean term is dropped, as at inference.
    """
    alpha_bar = float(schedule.alpha_bar[t])
    latent = (1.0 - alpha_bar) ** 0.5 * eps_hat
    if z0 is not None:
        latent = latent + alpha_bar**0.5 * z0
    return latent


@torch.no_grad()
def collect_g_features(
    model: TinyUNet,
    eps_hat: torch.Tensor,
    t: int,
    schedule: Schedule,
    prompts: torch.Tensor,
    z0: Optional[torch.Tensor] = None,
) -> Dict[str, torch.Tensor]:
    """Pre-FBA features of the coordinate-noise pass.

    :param eps_hat: ``(N, C, H, W)`` coordinate noise of every view.
    :param z0: Clean latents to include in the pass, if any.
    """
    output = model(g_latent(eps_hat, t, schedule, z0), t, prompts, use_fba=False)
    return {level: features.detach() for level, features in output.features.items()}


def coordinate_noise_views(bundle: NoiseBundle) -> torch.Tensor:
    """Stack the coordinate noise of every view of a bundle."""
    return torch.stack([coordinate_noise(bundle, i) for i in range(bundle.n_views)])


def collect_noise_free_maps(
    model: TinyUNet,
    z0_views: torch.Tensor,
    prompts: torch.Tensor,
    geometry: GeometryContext,
    schedule: Schedule,
    with_fba: bool = True,
) -> Dict[str, AttentionMap]:
    """Cross-attention maps of the clean latents at ``t = 0``."""
    g_features = None
    if with_fba and model.needs_g_features:
        g_features = collect_g_features(
            model, torch.zeros_like(z0_views), 0, schedule, prompts
        )
    with torch.no_grad():
        output = model(z0_views, 0, prompts, geometry, g_features, use_fba=with_fba)
    return {
        level: AttentionMap(
            attention.weights.detach(), attention.layer_id, attention.prompt_ids
        )
        for level, attention in output.maps.items()
    }


@torch.no_grad()
def sample_multiview(
    model: nn.Module,
    view_set: ViewSet,
    bundle: NoiseBundle,
    schedule: Schedule,
    prompts: torch.Tensor,
    seed: int,
    mode: str = "coordinate",
    recollect_g: bool = True,
    geometry: Optional[GeometryContext] = None,
    **noise_kwargs,
) -> torch.Tensor:
    """Generate every view of a scene jointly.

    :param model: Noise predictor.
    :param view_set: Camera ring of the scene.
    :param bundle: Scene noise.
    :param schedule: Diffusion schedule.
    :param prompts: ``(N, P)`` prompt ids.
    :param seed: Scene seed for the ancestral noise.
    :param mode: Noise initialization mode.
    :param recollect_g: Recompute coordinate-noise features at every step
        instead of reusing those of step ``T``.
    :return: ``(N, C, H, W)`` images in [0, 1].
    """
    geometry = geometry or GeometryContext(view_set)
    latents = initial_latents(bundle, mode, **noise_kwargs)
    eps_hat = coordinate_noise_views(bundle)
    generator = make_generator(seed, "sampling")
    g_features = None
    for t in progress(range(schedule.T, 0, -1), desc="sampling"):
        if getattr(model, "needs_g_features", False) and (
            recollect_g or g_features is None
        ):
            g_features = collect_g_features(model, eps_hat, t, schedule, prompts)
        eps = model(latents, t, prompts, geometry, g_features).eps
        noise = None
        if t > 1:
            noise = torch.randn(latents.shape, generator=generator, dtype=latents.dtype)
        latents = ddpm_step(latents, eps, t, schedule, noise)
    logging.debug(f"Sampled {view_set.n_views} views in {schedule.T} steps.")
    return decode(latents)


def count_parameters(model: nn.Module, partitions: Sequence[str] = PARTITIONS) -> int:
    """Number of scalar parameters in ``partitions``."""
    parameters = model.partition_parameters(*partitions)
    return sum(parameter.numel() for parameter in parameters)
