# -*- coding: utf-8 -*-
#
# This file is part of MVConsist.
# Copyright (C) 2026 MVConsist contributors.
#
# MVConsist is free software; you can redistribute it and/or modify it
# under the terms of the MIT License; see LICENSE file for more details.

"""Centered 2-D spectra and time-dependent frequency masks.

The forward transform is unnormalized and its output is shifted so that the
DC bin sits at index ``(H // 2, W // 2)``. Frequency index ``k`` of a bin is
its offset from that center.
"""

from dataclasses import dataclass
from typing import Callable, List, Optional

import torch

from mvconsist.config import DEFAULT_STOP_FREQ, FILTER_DIRECTIONS, FILTER_KINDS
from mvconsist.errors import MVConsistConfigError


@dataclass(frozen=True)
class Spectrum:
    """Centered complex spectrum over the last two axes."""

    values: torch.Tensor

    @property
    def re(self) -> torch.Tensor:
        """Real part."""
        return self.values.real


@dataclass(frozen=True)
class FreqMask:
    """Spectral mask on the centered layout."""

    mask: torch.Tensor
    kind: str
    r: float

    @property
    def is_all_pass(self) -> bool:
        """Whether every bin passes."""
        return bool((self.mask == 1).all())

    @property
    def is_all_stop(self) -> bool:
        """Whether no bin passes."""
        return bool((self.mask == 0).all())


def fft2(x: torch.Tensor) -> Spectrum:
    """Unnormalized DFT over the last two axes, DC shifted to the center."""
    return Spectrum(torch.fft.fftshift(torch.fft.fft2(x), dim=(-2, -1)))


def ifft2(spectrum: Spectrum) -> torch.Tensor:
    """Inverse of :func:`fft2`, real part only."""
    shifted = torch.fft.ifftshift(spectrum.values, dim=(-2, -1))
    return torch.fft.ifft2(shifted).real


def frequency_indices(height: int, width: int):
    """Signed frequency offsets ``(k_h, k_w)`` of every centered bin."""
    k_h = torch.arange(height, dtype=torch.float64) - height // 2
    k_w = torch.arange(width, dtype=torch.float64) - width // 2
    return torch.meshgrid(k_h, k_w, indexing="ij")


def radius(t: float, T: int) -> float:
    """Mask radius ``1 - t / T``: zero at the noisiest step."""
    if not 0 <= t <= T:
        raise MVConsistConfigError(f"Time step {t} outside [0, {T}].")
    return 1.0 - t / T


def directed_radius(
    t: float, T: int, direction: str, stop_freq: float = DEFAULT_STOP_FREQ
) -> float:
    """Radius for a filter direction.

    ``r_t`` follows :func:`radius`, ``one_minus_r_t`` runs backwards in time and
    ``constant`` ignores the step.
    """
    if direction == "r_t":
        return radius(t, T)
    if direction == "one_minus_r_t":
        return 1.0 - radius(t, T)
    if direction == "constant":
        return float(stop_freq)
    raise MVConsistConfigError(
        f"Unknown filter direction {direction}, expected one of {FILTER_DIRECTIONS}."
    )


def _binary_hpf(r: float, height: int, width: int) -> torch.Tensor:
    if r <= 0.0:
        return torch.ones(height, width, dtype=torch.float64)
    k_h, k_w = frequency_indices(height, width)
    stop = (k_h.abs() <= r * height / 2.0) & (k_w.abs() <= r * width / 2.0)
    return (~stop).to(torch.float64)


def _gaussian_hpf(r: float, height: int, width: int) -> torch.Tensor:
    if r <= 0.0:
        return torch.ones(height, width, dtype=torch.float64)
    k_h, k_w = frequency_indices(height, width)
    sigma = r * min(height, width) / 2.0
    return 1.0 - torch.exp(-(k_h**2 + k_w**2) / sigma**2)


def hpf_mask(r: float, height: int, width: int, kind: str = "binary_hpf") -> FreqMask:
    """Build a spectral mask of radius ``r``.

    ``binary_hpf`` stops the closed centered square ``|k_h| <= r * H / 2``,
    ``|k_w| <= r * W / 2`` (nothing at ``r = 0``, everything at ``r = 1``).
    ``gaussian_hpf`` is ``1 - exp(-(d / sigma)^2)`` with ``sigma = r * min(H, W) / 2``.
    The ``*_lpf`` kinds are the complements and ``none`` passes everything.

    :raises MVConsistConfigError: For an unknown kind or ``r`` outside [0, 1].
    """
    if not 0.0 <= r <= 1.0:
        raise MVConsistConfigError(f"Mask radius must lie in [0, 1], got {r}.")
    if kind == "binary_hpf":
        mask = _binary_hpf(r, height, width)
    elif kind == "binary_lpf":
        mask = 1.0 - _binary_hpf(r, height, width)
    elif kind == "gaussian_hpf":
        mask = _gaussian_hpf(r, height, width)
    elif kind == "gaussian_lpf":
        mask = 1.0 - _gaussian_hpf(r, height, width)
    elif kind == "none":
        mask = torch.ones(height, width, dtype=torch.float64)
    else:
        raise MVConsistConfigError(
            f"Unknown filter kind {kind}, expected one of {FILTER_KINDS}."
        )
    return FreqMask(mask=mask, kind=kind, r=float(r))


def apply_mask(x: torch.Tensor, mask: FreqMask) -> torch.Tensor:
    """Filter ``x`` over its last two axes with a centered spectral mask."""
    if mask.is_all_pass:
        return x.clone()
    if mask.is_all_stop:
        return torch.zeros_like(x)
    spectrum = fft2(x)
    filtered = Spectrum(spectrum.values * mask.mask.to(x.device, spectrum.re.dtype))
    return ifft2(filtered).to(x.dtype)


def filter_features(
    G: torch.Tensor,
    t: float,
    T: int,
    kind: str = "binary_hpf",
    direction: str = "r_t",
    pe: Optional[Callable[[float], torch.Tensor]] = None,
    stop_freq: float = DEFAULT_STOP_FREQ,
) -> torch.Tensor:
    """Spectrally filter features and add the encoded radius.

    :param G: Features of shape ``(..., C, H, W)``.
    :param t: Current time step.
    :param T: Number of diffusion steps.
    :param kind: Mask kind, see :func:`hpf_mask`.
    :param direction: Radius direction, see :func:`directed_radius`.
    :param pe: Encoding returning a ``(C,)`` bias for ``1 - r``; ``None`` adds nothing.
    :param stop_freq: Radius of the ``constant`` direction.
    """
    r = directed_radius(t, T, direction, stop_freq)
    filtered = apply_mask(G, hpf_mask(r, G.shape[-2], G.shape[-1], kind))
    if pe is None:
        return filtered
    bias = pe(1.0 - r).to(G.device, G.dtype)
    return filtered + bias[:, None, None]


def lpf_filter_features(
    G: torch.Tensor,
    t: float,
    T: int,
    direction: str = "r_t",
    pe: Optional[Callable[[float], torch.Tensor]] = None,
    stop_freq: float = DEFAULT_STOP_FREQ,
) -> torch.Tensor:
    """Low-pass counterpart of :func:`filter_features` with a binary mask."""
    return filter_features(
        G, t, T, kind="binary_lpf", direction=direction, pe=pe, stop_freq=stop_freq
    )


def band_masks(height: int, width: int, n_bands: int) -> List[FreqMask]:
    """Partition the centered spectrum into ``n_bands`` square rings.

    Band ``b`` holds the bins whose normalized Chebyshev radius
    ``max(|k_h| / (H / 2), |k_w| / (W / 2))`` lies in ``[b / n, (b + 1) / n)``;
    the last band is closed. Band 0 holds DC.
    """
    if n_bands < 1:
        raise MVConsistConfigError(f"Need at least one band, got {n_bands}.")
    k_h, k_w = frequency_indices(height, width)
    rho = torch.maximum(k_h.abs() / (height / 2.0), k_w.abs() / (width / 2.0))
    band = torch.clamp((rho * n_bands).floor(), max=n_bands - 1)
    return [
        FreqMask(mask=(band == b).to(torch.float64), kind="band", r=(b + 1) / n_bands)
        for b in range(n_bands)
    ]


def band_pass(x: torch.Tensor, mask: FreqMask) -> torch.Tensor:
    """Keep only the frequencies of one band."""
    return apply_mask(x, mask)
