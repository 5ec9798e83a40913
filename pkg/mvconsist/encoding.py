# -*- coding: utf-8 -*-
#
# This file is part of MVConsist.
# Copyright (C) 2026 MVConsist contributors.
#
# MVConsist is free software; you can redistribute it and/or modify it
# under the terms of the MIT License; see LICENSE file for more details.

"""Sinusoidal encodings of time steps, mask radii and displacements."""

import math

import torch
from torch import nn


def sinusoidal_embedding(values: torch.Tensor, dim: int) -> torch.Tensor:
    """Embed a batch of scalars with geometrically spaced sines and cosines.

    :param values: Tensor of shape ``(B,)``.
    :param dim: Embedding width.
    :return: Tensor of shape ``(B, dim)``.
    """
    half_dim = dim // 2
    frequencies = torch.exp(
        torch.arange(half_dim, dtype=torch.float64, device=values.device)
        * -(math.log(10000.0) / max(half_dim, 1))
    )
    angles = values.to(torch.float64)[:, None] * frequencies[None, :]
    embedding = torch.cat([torch.sin(angles), torch.cos(angles)], dim=-1)
    if dim % 2 == 1:
        embedding = nn.functional.pad(embedding, (0, 1))
    return embedding.to(values.dtype if values.is_floating_point() else torch.float32)


def octave_features(values: torch.Tensor, bands: int) -> torch.Tensor:
    """Encode the last axis of ``values`` with ``sin/cos(2^k * pi * x)``.

    :param values: Tensor of shape ``(..., D)``.
    :param bands: Number of octaves ``k = 0 .. bands - 1``.
    :return: Tensor of shape ``(..., 2 * bands * D)``.
    """
    scales = math.pi * 2.0 ** torch.arange(bands, dtype=values.dtype)
    angles = values[..., None] * scales
    features = torch.cat([torch.sin(angles), torch.cos(angles)], dim=-1)
    return features.flatten(start_dim=-2)


class RadiusEncoding(nn.Module):
    """Fixed per-channel bias encoding a mask radius in [0, 1]."""

    def __init__(self, channels: int):
        """Initialize the encoding for ``channels`` feature channels."""
        super().__init__()
        self.channels = channels

    def forward(self, value: float) -> torch.Tensor:
        """Return a ``(channels,)`` vector for a scalar radius."""
        # Spread [0, 1] over a range where the lowest frequency still varies.
        scaled = torch.tensor([1000.0 * float(value)])
        return sinusoidal_embedding(scaled, self.channels)[0].to(torch.float32)


class DisplacementEncoding(nn.Module):
    """Learned projection of octave-encoded 2-D displacements."""

    def __init__(self, channels: int, bands: int):
        """Initialize the encoding.

        :param channels: Output channel width.
        :param bands: Octaves per displacement component.
        """
        super().__init__()
        self.bands = bands
        self.proj = nn.Linear(4 * bands, channels)

    def forward(self, displacement: torch.Tensor) -> torch.Tensor:
        """Encode a ``(h, w, 2)`` displacement field as ``(channels, h, w)``."""
        weight = self.proj.weight
        features = octave_features(displacement.to(weight.dtype), self.bands)
        return self.proj(features).permute(2, 0, 1)
