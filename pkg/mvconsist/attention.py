# -*- coding: utf-8 -*-
#
# This file is part of MVConsist.
# Copyright (C) 2026 MVConsist contributors.
#
# MVConsist is free software; you can redistribute it and/or modify it
# under the terms of the MIT License; see LICENSE file for more details.

"""Cross-view Fourier-based attention and prompt cross-attention.

An FBA block lets every view attend to all other views. Inside the overlap
with view ``j`` the targets are the features of ``j`` sampled at the
corresponding locations; outside it they are spectrally filtered features of
the coordinate-noise pass. The block output goes through a zero-initialized
1x1 convolution so a new block is an exact identity.
"""

from dataclasses import dataclass, field
from typing import Mapping, Optional, Tuple, Union

import torch
from torch import nn

from mvconsist.config import DEFAULT_PE_BANDS, DEFAULT_STOP_FREQ
from mvconsist.encoding import DisplacementEncoding, RadiusEncoding
from mvconsist.errors import MVConsistPreconditionError, MVConsistShapeError
from mvconsist.frequency import filter_features
from mvconsist.geometry import Correspondence, GeometryContext, OverlapMask
from mvconsist.geometry import warp_features


@dataclass(frozen=True)
class AttentionMap:
    """Row-stochastic attention weights of shape ``(queries, keys)``."""

    weights: torch.Tensor
    layer_id: str
    prompt_ids: Optional[torch.Tensor] = field(default=None, compare=False)


def zero_module(module: nn.Module) -> nn.Module:
    """Set every parameter of ``module`` to zero and return it."""
    for parameter in module.parameters():
        nn.init.zeros_(parameter)
    return module


def caa_target(
    F_j: torch.Tensor,
    corr: Correspondence,
    pe: Optional[nn.Module] = None,
) -> torch.Tensor:
    """Features of view ``j`` at the locations corresponding to view ``i``.

    :param F_j: ``(C, h, w)`` features of the target view.
    :param corr: Correspondence from view ``i`` into view ``j`` at ``(h, w)``.
    :param pe: Displacement encoding producing ``(C, h, w)``; ``None`` adds nothing.
    """
    warped = warp_features(F_j, corr)
    if pe is None:
        return warped
    return warped + pe(corr.displacement).to(warped.dtype)


def combine_targets(
    F_bar: torch.Tensor,
    G_bar: torch.Tensor,
    overlap: Union[OverlapMask, torch.Tensor],
) -> torch.Tensor:
    """Select ``F_bar`` inside the overlap and ``G_bar`` outside it."""
    mask = overlap.mask if isinstance(overlap, OverlapMask) else overlap
    if F_bar.shape != G_bar.shape or tuple(mask.shape) != tuple(F_bar.shape[-2:]):
        raise MVConsistShapeError(
            f"Cannot combine targets {tuple(F_bar.shape)} and {tuple(G_bar.shape)} "
            f"with a mask of shape {tuple(mask.shape)}."
        )
    mask = mask.to(F_bar.dtype)
    return mask * F_bar + (1.0 - mask) * G_bar


def fba_attention(
    F_i: torch.Tensor,
    targets_V: torch.Tensor,
    wq: torch.Tensor,
    wk: torch.Tensor,
    wv: torch.Tensor,
    scale: bool = True,
) -> torch.Tensor:
    """Single-head attention of a view's features over target features.

    :param F_i: ``(C, h, w)`` query features.
    :param targets_V: ``(K, C)`` target features, one key per row.
    :param wq: ``(C, C)`` query projection.
    :param wk: ``(C, C)`` key projection.
    :param wv: ``(C, C)`` value projection.
    :param scale: Divide the logits by ``sqrt(C)``.
    :return: ``(C, h, w)``; ``F_i`` itself when there are no targets.
    """
    if targets_V.shape[0] == 0:
        return F_i
    channels, height, width = F_i.shape
    queries = F_i.flatten(1).T @ wq.T
    keys = targets_V @ wk.T
    values = targets_V @ wv.T
    logits = queries @ keys.T
    if scale:
        logits = logits / channels**0.5
    attended = torch.softmax(logits, dim=-1) @ values
    return attended.T.reshape(channels, height, width)


class FbaBlock(nn.Module):
    """Fourier-based cross-view attention with a zero-initialized residual."""

    def __init__(
        self,
        channels: int,
        pe_bands: int = DEFAULT_PE_BANDS,
        scale_attention: bool = True,
        filter_kind: str = "binary_hpf",
        filter_direction: str = "r_t",
        stop_freq: float = DEFAULT_STOP_FREQ,
        non_overlap: bool = True,
    ):
        """Initialize the block.

        :param channels: Feature channels at the block's level.
        :param pe_bands: Octaves of the displacement encoding.
        :param scale_attention: Scale attention logits by ``1 / sqrt(C)``.
        :param filter_kind: Spectral mask applied to the coordinate-noise features.
        :param filter_direction: How the mask radius follows the time step.
        :param stop_freq: Radius of the ``constant`` direction.
        :param non_overlap: Attend to coordinate-noise features outside the
            overlap; requires them at every call.
        """
        super().__init__()
        self.channels = channels
        self.scale_attention = scale_attention
        self.filter_kind = filter_kind
        self.filter_direction = filter_direction
        self.stop_freq = stop_freq
        self.non_overlap = non_overlap
        self.wq = nn.Linear(channels, channels, bias=False)
        self.wk = nn.Linear(channels, channels, bias=False)
        self.wv = nn.Linear(channels, channels, bias=False)
        self.displacement = DisplacementEncoding(channels, pe_bands)
        self.radius_encoding = RadiusEncoding(channels)
        self.resid_conv = zero_module(nn.Conv2d(channels, channels, kernel_size=1))

    def targets(
        self,
        features: torch.Tensor,
        g_bar: Optional[torch.Tensor],
        i: int,
        geometry: GeometryContext,
    ) -> torch.Tensor:
        """Concatenate the ``(K, C)`` targets of view ``i`` over every ``j != i``."""
        height, width = features.shape[-2:]
        rows = []
        for j in range(features.shape[0]):
            if j == i:
                continue
            corr, overlap = geometry.pair(i, j, height, width)
            f_bar = caa_target(features[j], corr, self.displacement)
            if g_bar is not None:
                rows.append(combine_targets(f_bar, g_bar[j], overlap).flatten(1).T)
            else:
                inside = overlap.mask.flatten().bool()
                rows.append(f_bar.flatten(1).T[inside])
        return torch.cat(rows)

    def forward(
        self,
        features: torch.Tensor,
        t: int,
        T: int,
        geometry: GeometryContext,
        g_features: Optional[torch.Tensor] = None,
    ) -> torch.Tensor:
        """Apply the block to ``(N, C, h, w)`` features of all views.

        :param t: Shared time step of the views.
        :param T: Number of diffusion steps.
        :param geometry: Correspondences between the ``N`` views.
        :param g_features: ``(N, C, h, w)`` coordinate-noise features of this
            level; without them only overlap targets are used.
        :raises MVConsistPreconditionError: If ``g_features`` is missing while
            non-overlap targets are enabled.
        """
        if features.shape[0] == 1:
            return features
        if g_features is None and self.non_overlap:
            raise MVConsistPreconditionError(
                "FBA blocks attending outside the overlap need coordinate-noise "
                "features; collect them before calling the denoiser."
            )
        g_bar = None
        if g_features is not None:
            g_bar = filter_features(
                g_features,
                t,
                T,
                kind=self.filter_kind,
                direction=self.filter_direction,
                pe=self.radius_encoding,
                stop_freq=self.stop_freq,
            )
        attended = torch.stack(
            [
                fba_attention(
                    features[i],
                    self.targets(features, g_bar, i, geometry),
                    self.wq.weight,
                    self.wk.weight,
                    self.wv.weight,
                    scale=self.scale_attention,
                )
                for i in range(features.shape[0])
            ]
        )
        return features + self.resid_conv(attended)


def fba_block(
    F_all_views: torch.Tensor,
    G_all_views: Optional[torch.Tensor],
    t: int,
    T: int,
    geometry_ctx: GeometryContext,
    params: FbaBlock,
) -> torch.Tensor:
    """Run one FBA block over all views."""
    return params(F_all_views, t, T, geometry_ctx, G_all_views)


class PromptCrossAttention(nn.Module):
    """Cross-attention from spatial features of all views to prompt tokens."""

    def __init__(
        self, channels: int, prompt_dim: int, resolution: Tuple[int, int], layer_id: str
    ):
        """Initialize the layer.

        :param channels: Feature channels of the attended level.
        :param prompt_dim: Width of the prompt token embeddings.
        :param resolution: Feature resolution the maps are defined at.
        :param layer_id: Name of the level, used as the map key.
        """
        super().__init__()
        self.channels = channels
        self.resolution = tuple(resolution)
        self.layer_id = layer_id
        self.to_q = nn.Linear(channels, prompt_dim, bias=False)
        self.to_k = nn.Linear(prompt_dim, prompt_dim, bias=False)
        self.to_v = nn.Linear(prompt_dim, channels, bias=False)
        self.to_out = zero_module(nn.Linear(channels, channels))

    def attention_map(
        self, features: torch.Tensor, prompt_embeddings: torch.Tensor
    ) -> AttentionMap:
        """Attention of every ``(view, position)`` query over all prompt tokens.

        :param features: ``(N, C, h, w)`` features at :attr:`resolution`.
        :param prompt_embeddings: ``(P, D)`` prompt tokens of all views.
        :raises MVConsistShapeError: If the features are at another resolution.
        """
        if tuple(features.shape[-2:]) != self.resolution:
            raise MVConsistShapeError(
                f"Cross-attention at layer {self.layer_id} expects "
                f"{self.resolution} features, got {tuple(features.shape[-2:])}."
            )
        queries = self.to_q(features.permute(0, 2, 3, 1).reshape(-1, self.channels))
        keys = self.to_k(prompt_embeddings)
        logits = queries @ keys.T / keys.shape[-1] ** 0.5
        weights = torch.softmax(logits, dim=-1)
        return AttentionMap(weights=weights, layer_id=self.layer_id)

    def forward(
        self, features: torch.Tensor, prompt_embeddings: torch.Tensor
    ) -> Tuple[torch.Tensor, AttentionMap]:
        """Return the updated features and the attention map."""
        attention = self.attention_map(features, prompt_embeddings)
        n_views, channels, height, width = features.shape
        attended = self.to_out(attention.weights @ self.to_v(prompt_embeddings))
        attended = attended.reshape(n_views, height, width, channels)
        attended = attended.permute(0, 3, 1, 2)
        return features + attended, attention


def xa_maps(
    features: torch.Tensor,
    prompt_embeddings: torch.Tensor,
    layer_params: PromptCrossAttention,
) -> AttentionMap:
    """Prompt cross-attention map of one layer."""
    return layer_params.attention_map(features, prompt_embeddings)


def xa_loss(
    maps_t: Mapping[str, AttentionMap], maps_0: Mapping[str, AttentionMap]
) -> torch.Tensor:
    """Sum over layers of the element-averaged Frobenius distance of two maps.

    Each layer contributes ``||M_t - M_0||_F / sqrt(n)`` with ``n`` the number
    of map entries.

    :raises MVConsistShapeError: If the layers or map shapes differ.
    """
    if set(maps_t) != set(maps_0):
        raise MVConsistShapeError(
            f"Attention maps cover different layers: {sorted(maps_t)} "
            f"and {sorted(maps_0)}."
        )
    losses = []
    for layer_id in sorted(maps_t):
        current, reference = maps_t[layer_id].weights, maps_0[layer_id].weights
        if current.shape != reference.shape:
            raise MVConsistShapeError(
                f"Attention maps of layer {layer_id} differ in shape: "
                f"{tuple(current.shape)} and {tuple(reference.shape)}."
            )
        difference = current - reference
        losses.append(
            torch.linalg.vector_norm(difference) / difference.numel() ** 0.5
        )
    return torch.stack(losses).sum()

