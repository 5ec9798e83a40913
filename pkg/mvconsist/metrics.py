# -*- coding: utf-8 -*-
#
# This file is part of MVConsist.
# Copyright (C) 2026 MVConsist contributors.
#
# MVConsist is free software; you can redistribute it and/or modify it
# under the terms of the MIT License; see LICENSE file for more details.

"""Multi-view consistency metrics and noise correlation diagnostics."""

import itertools
import math
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import torch
import torch.nn.functional as F

from mvconsist.config import PSNR_CAP
from mvconsist.errors import MVConsistConfigError, MVConsistPreconditionError
from mvconsist.frequency import band_masks, band_pass
from mvconsist.geometry import ViewSet, correspondence, warp_features
from mvconsist.noise import NoiseBundle, initial_latents


@dataclass
class SceneReport:
    """Consistency metrics of one generated scene."""

    scene_id: int
    overlap_psnr: float
    ground_truth_psnr: float
    psnr_ratio: float
    intra_distance: float
    pairs: Dict[str, float] = field(default_factory=dict)
    config_hash: str = ""
    method: str = ""

    def to_dict(self) -> Dict:
        """Serialize the report as one JSON-ready record."""
        return asdict(self)


@dataclass
class CorrelationReport:
    """Mean cross-view Pearson correlation per frequency band."""

    correlations: List[float]
    n_pairs: int
    alignment: str

    def rows(self) -> List[Dict]:
        """One record per band, lowest band first."""
        n_bands = len(self.correlations)
        return [
            {
                "band": band,
                "low": band / n_bands,
                "high": (band + 1) / n_bands,
                "correlation": value,
            }
            for band, value in enumerate(self.correlations)
        ]


def psnr(
    a: torch.Tensor,
    b: torch.Tensor,
    mask: Optional[torch.Tensor] = None,
    data_range: float = 1.0,
    cap: float = PSNR_CAP,
) -> Optional[float]:
    """Peak signal-to-noise ratio over the masked pixels, capped at ``cap``.

    :param a: ``(C, H, W)`` image.
    :param b: ``(C, H, W)`` image.
    :param mask: ``(H, W)`` pixels to compare; all by default.
    :return: PSNR in dB, or ``None`` when the mask is empty.
    """
    squared = (a.to(torch.float64) - b.to(torch.float64)) ** 2
    if mask is not None:
        if not bool(mask.any()):
            return None
        squared = squared[:, mask.bool()]
    mse = float(squared.mean())
    if mse == 0.0:
        return float(cap)
    return min(10.0 * math.log10(data_range**2 / mse), float(cap))


def ring_pairs(n_views: int, wrap: bool = True) -> List[Tuple[int, int]]:
    """Unordered pairs of ring-adjacent views."""
    pairs = [(i, i + 1) for i in range(n_views - 1)]
    if wrap and n_views > 2:
        pairs.append((n_views - 1, 0))
    return pairs


def pairwise_overlap_psnr(
    images: torch.Tensor,
    view_set: ViewSet,
    wrap_pairs: bool = True,
    cap: float = PSNR_CAP,
) -> Dict[Tuple[int, int], float]:
    """PSNR of every adjacent pair over the pixels of ``i`` visible in ``j``."""
    results = {}
    for i, j in ring_pairs(images.shape[0], wrap_pairs):
        corr = correspondence(view_set, i, j)
        value = psnr(images[i], warp_features(images[j], corr), corr.valid, cap=cap)
        if value is not None:
            results[(i, j)] = value
    return results


def overlap_psnr(
    images: torch.Tensor,
    view_set: ViewSet,
    wrap_pairs: bool = True,
    cap: float = PSNR_CAP,
) -> float:
    """Mean PSNR over the overlaps of ring-adjacent views.

    :param images: ``(N, C, H, W)`` views in [0, 1].
    :raises MVConsistPreconditionError: With fewer than two views or when no
        adjacent pair overlaps.
    """
    if images.shape[0] < 2:
        raise MVConsistPreconditionError("Overlap PSNR needs at least two views.")
    results = pairwise_overlap_psnr(images, view_set, wrap_pairs, cap)
    if not results:
        raise MVConsistPreconditionError(
            "No pair of adjacent views overlaps; overlap PSNR is undefined."
        )
    return float(np.mean(list(results.values())))


def psnr_ratio(
    generated: torch.Tensor,
    ground_truth: torch.Tensor,
    view_set: ViewSet,
    wrap_pairs: bool = True,
    cap: float = PSNR_CAP,
) -> float:
    """Overlap PSNR of generated views relative to the ground truth.

    :raises MVConsistPreconditionError: If the ground-truth PSNR is zero.
    """
    reference = overlap_psnr(ground_truth, view_set, wrap_pairs, cap)
    if reference == 0.0:
        raise MVConsistPreconditionError("Ground-truth overlap PSNR is zero.")
    return overlap_psnr(generated, view_set, wrap_pairs, cap) / reference


def patch_statistics(
    image: torch.Tensor, patch_size: int = 4, orientation_bins: int = 8
) -> torch.Tensor:
    """Hand-crafted appearance features of a ``(C, H, W)`` image.

    Per patch: the mean and standard deviation of every channel and a
    magnitude-weighted histogram of luminance gradient orientations.
    """
    image = image.to(torch.float64)[None]
    mean = F.avg_pool2d(image, patch_size)
    std = (F.avg_pool2d(image**2, patch_size) - mean**2).clamp_min(0.0).sqrt()

    luminance = image.mean(dim=1, keepdim=True)
    gx = F.pad(luminance[..., :, 1:] - luminance[..., :, :-1], (0, 1, 0, 0))
    gy = F.pad(luminance[..., 1:, :] - luminance[..., :-1, :], (0, 0, 0, 1))
    magnitude = torch.sqrt(gx**2 + gy**2)
    orientation = torch.remainder(torch.atan2(gy, gx), math.pi)
    index = (orientation / math.pi * orientation_bins).long().clamp(
        max=orientation_bins - 1
    )
    histogram = torch.cat(
        [
            F.avg_pool2d(magnitude * (index == b), patch_size)
            for b in range(orientation_bins)
        ],
        dim=1,
    )
    histogram = histogram / (histogram.sum(dim=1, keepdim=True) + 1e-8)
    return torch.cat([mean, std, histogram], dim=1).flatten()


def intra_distance(images: torch.Tensor, patch_size: int = 4) -> float:
    """Mean pairwise distance between the patch statistics of all views.

    The distance of two views is the root-mean-square difference of their
    :func:`patch_statistics`; lower means a more uniform appearance.
    """
    if images.shape[0] < 2:
        raise MVConsistPreconditionError("Intra distance needs at least two views.")
    features = [patch_statistics(image, patch_size) for image in images]
    distances = [
        float(torch.sqrt(((features[a] - features[b]) ** 2).mean()))
        for a, b in itertools.combinations(range(len(features)), 2)
    ]
    return float(np.mean(distances))


def _pearson(a: torch.Tensor, b: torch.Tensor) -> float:
    a = a.to(torch.float64).flatten()
    b = b.to(torch.float64).flatten()
    a = a - a.mean()
    b = b - b.mean()
    denominator = float(torch.sqrt((a**2).sum() * (b**2).sum()))
    return float((a * b).sum()) / denominator if denominator > 0 else 0.0


def noise_correlation_report(
    bundle_or_latents: Union[NoiseBundle, torch.Tensor],
    n_bands: int = 4,
    alignment: str = "pixel",
    view_set: Optional[ViewSet] = None,
    mode: str = "coordinate",
) -> CorrelationReport:
    """Cross-view correlation of initial latents per frequency band.

    ``pixel`` alignment correlates every pair of views pixel by pixel.
    ``correspondence`` alignment warps view ``j`` onto view ``i`` for every
    ring-adjacent pair and correlates the overlapping pixels only.

    :param bundle_or_latents: ``(N, C, H, W)`` latents, or a bundle whose
        ``mode`` latents are analysed.
    :raises MVConsistPreconditionError: With fewer than two views.
    """
    if isinstance(bundle_or_latents, NoiseBundle):
        latents = initial_latents(bundle_or_latents, mode)
    else:
        latents = bundle_or_latents
    n_views, _, height, width = latents.shape
    if n_views < 2:
        raise MVConsistPreconditionError("Correlation needs at least two views.")

    if alignment == "pixel":
        pairs: Sequence[Tuple[int, int]] = list(
            itertools.combinations(range(n_views), 2)
        )
    elif alignment == "correspondence":
        if view_set is None:
            raise MVConsistConfigError("Correspondence alignment needs the view ring.")
        pairs = ring_pairs(n_views)
        corrs = {
            pair: correspondence(view_set, *pair, (height, width)) for pair in pairs
        }
        pairs = [pair for pair in pairs if bool(corrs[pair].valid.any())]
    else:
        raise MVConsistConfigError(f"Unknown alignment {alignment}.")

    correlations = []
    for mask in band_masks(height, width, n_bands):
        filtered = band_pass(latents.to(torch.float64), mask)
        values = []
        for i, j in pairs:
            if alignment == "pixel":
                values.append(_pearson(filtered[i], filtered[j]))
            else:
                corr = corrs[(i, j)]
                warped = warp_features(filtered[j], corr)
                valid = corr.valid
                values.append(_pearson(filtered[i][:, valid], warped[:, valid]))
        correlations.append(float(np.mean(values)) if values else 0.0)
    return CorrelationReport(
        correlations=correlations, n_pairs=len(pairs), alignment=alignment
    )


def scene_report(
    generated: torch.Tensor,
    ground_truth: torch.Tensor,
    view_set: ViewSet,
    scene_id: int,
    config_hash: str = "",
    method: str = "",
    wrap_pairs: bool = True,
    cap: float = PSNR_CAP,
) -> SceneReport:
    """Compute every consistency metric of one scene."""
    pairs = pairwise_overlap_psnr(generated, view_set, wrap_pairs, cap)
    generated_psnr = overlap_psnr(generated, view_set, wrap_pairs, cap)
    reference = overlap_psnr(ground_truth, view_set, wrap_pairs, cap)
    if reference == 0.0:
        raise MVConsistPreconditionError("Ground-truth overlap PSNR is zero.")
    return SceneReport(
        scene_id=scene_id,
        overlap_psnr=generated_psnr,
        ground_truth_psnr=reference,
        psnr_ratio=generated_psnr / reference,
        intra_distance=intra_distance(generated),
        pairs={f"{i}-{j}": value for (i, j), value in pairs.items()},
        config_hash=config_hash,
        method=method,
    )


SUMMARY_FIELDS = ("overlap_psnr", "psnr_ratio", "intra_distance")


def mean_with_interval(values: Sequence[float]) -> Tuple[float, float]:
    """Mean and half-width of its normal 95% confidence interval."""
    array = np.asarray(values, dtype=np.float64)
    if array.size < 2:
        return float(array.mean()), 0.0
    return float(array.mean()), float(1.96 * array.std(ddof=1) / np.sqrt(array.size))


def summarize(reports: Sequence[Union[SceneReport, Dict]]) -> Dict[str, float]:
    """Aggregate scene reports into means and 95% interval half-widths."""
    if not reports:
        raise MVConsistPreconditionError("No scene reports to summarize.")
    records = [
        report.to_dict() if isinstance(report, SceneReport) else report
        for report in reports
    ]
    summary = {"scenes": len(records)}
    for name in SUMMARY_FIELDS:
        mean, half_width = mean_with_interval([record[name] for record in records])
        summary[name] = mean
        summary[f"{name}_ci95"] = half_width
    return summary
