# -*- coding: utf-8 -*-
#
# This file is part of MVConsist.
# Copyright (C) 2026 MVConsist contributors.
#
# MVConsist is free software; you can redistribute it and/or modify it
# under the terms of the MIT License; see LICENSE file for more details.

"""MVConsist configuration validation utilities.

Field ranges are checked by the marshmallow schemas; the helpers here check
constraints that span several fields.
"""

from typing import Any, List, Optional

from mvconsist.config import (
    COMPONENT_PRESETS,
    FILTER_DIRECTION_SEPARATOR,
    FILTER_DIRECTIONS,
    FILTER_KINDS,
    NOISE_MODES,
)
from mvconsist.errors import MVConsistConfigError


def validate_image_size(height: int, width: int) -> None:
    """Validate that views survive the two down-sampling levels of the denoiser.

    :param height: View height in pixels.
    :param width: View width in pixels.

    :raises MVConsistConfigError: Given a size not divisible by 4.
    """
    if height % 4 or width % 4:
        raise MVConsistConfigError(
            f"View size {height}x{width} must be divisible by 4."
        )


def validate_schedule(beta_start: float, beta_end: float) -> None:
    """Validate that the linear schedule is non-decreasing.

    :raises MVConsistConfigError: Given ``beta_start > beta_end``.
    """
    if beta_start > beta_end:
        raise MVConsistConfigError(
            f"diffusion.beta_start ({beta_start}) must not exceed "
            f"diffusion.beta_end ({beta_end})."
        )


def validate_trainable_blocks(
    fba_enabled: bool, fba_layers: List[str], xa_layers: List[str], fba_steps: int
) -> None:
    """Validate that multi-view training has blocks to train.

    :raises MVConsistConfigError: Given ``fba_steps > 0`` with neither FBA nor
        cross-attention layers.
    """
    has_fba = fba_enabled and bool(fba_layers)
    if fba_steps > 0 and not has_fba and not xa_layers:
        raise MVConsistConfigError(
            "train.fba_steps is positive but no FBA or cross-attention layer "
            "is configured."
        )


def validate_ablation_values(grid: str, values: Optional[List[Any]]) -> None:
    """Validate the values swept by an ablation grid.

    :param grid: Swept parameter, one of ``w``, ``filter_kind``,
        ``filter_direction``, ``noise_mode`` or ``components``. A
        ``filter_kind`` value may pin its direction as ``kind:direction``.
    :param values: Swept values, or ``None`` for the grid defaults.

    :raises MVConsistConfigError: Given an empty list or values outside the
        domain of the swept parameter.
    """
    if values is None:
        return
    if not values:
        raise MVConsistConfigError("ablation.values must not be empty.")
    if grid == "w":
        for value in values:
            if (
                isinstance(value, bool)
                or not isinstance(value, (int, float))
                or not 0.0 <= value <= 1.0
            ):
                raise MVConsistConfigError(
                    f"Ablation weight {value!r} is not a number in [0, 1]."
                )
        return
    if grid == "filter_kind":
        _validate_filter_values(values)
        return
    allowed = {
        "filter_direction": FILTER_DIRECTIONS,
        "noise_mode": NOISE_MODES,
        "components": list(COMPONENT_PRESETS),
    }[grid]
    _reject_unknown(grid, values, allowed)


def _reject_unknown(grid: str, values: List[Any], allowed: List[str]) -> None:
    unknown = [value for value in values if value not in allowed]
    if unknown:
        raise MVConsistConfigError(
            f"Unknown {grid} values {unknown}; choose from {', '.join(allowed)}."
        )


def _validate_filter_values(values: List[Any]) -> None:
    kinds, directions = [], []
    for value in values:
        kind, _, direction = str(value).partition(FILTER_DIRECTION_SEPARATOR)
        kinds.append(kind)
        if direction:
            directions.append(direction)
    _reject_unknown("filter_kind", kinds, FILTER_KINDS)
    _reject_unknown("filter_direction", directions, FILTER_DIRECTIONS)


def validate_config(config) -> None:
    """Validate cross-field constraints of an experiment configuration.

    :param config: :class:`~mvconsist.experiment.ExperimentConfig`.

    :raises MVConsistConfigError: Given an inconsistent configuration.
    """
    validate_image_size(config.views.height, config.views.width)
    validate_schedule(config.diffusion.beta_start, config.diffusion.beta_end)
    validate_trainable_blocks(
        config.fba.enabled, config.fba.layers, config.xa.layers, config.train.fba_steps
    )
    validate_ablation_values(config.ablation.grid, config.ablation.values)
