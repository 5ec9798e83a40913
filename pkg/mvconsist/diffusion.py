# -*- coding: utf-8 -*-
#
# This file is part of MVConsist.
# Copyright (C) 2026 MVConsist contributors.
#
# MVConsist is free software; you can redistribute it and/or modify it
# under the terms of the MIT License; see LICENSE file for more details.

"""DDPM variance schedule, forward noising and ancestral reverse steps.

Schedule arrays are indexed by ``t = 0 .. T``; index ``0`` is the clean data
boundary with ``beta[0] = 0`` and ``alpha_bar[0] = 1``.
"""

from dataclasses import dataclass
from typing import Optional, Union

import torch

from mvconsist.errors import MVConsistConfigError, MVConsistShapeError

Timestep = Union[int, torch.Tensor]


@dataclass(frozen=True)
class Schedule:
    """Linear DDPM variance schedule."""

    T: int
    beta: torch.Tensor
    alpha: torch.Tensor
    alpha_bar: torch.Tensor

    @property
    def sigma2(self) -> torch.Tensor:
        """Reverse-step variance, fixed to ``beta``."""
        return self.beta

    @property
    def alpha_bar_T(self) -> float:
        """Signal retention at the noisiest step."""
        return float(self.alpha_bar[self.T])

    def to_dict(self):
        """Serialize the schedule parameters."""
        return {
            "T": self.T,
            "beta_start": float(self.beta[1]),
            "beta_end": float(self.beta[self.T]),
        }


def make_schedule(T: int, beta_start: float, beta_end: float) -> Schedule:
    """Build a linear schedule of ``T`` steps.

    :raises MVConsistConfigError: If ``T < 1`` or the betas are not
        ``0 < beta_start <= beta_end < 1``.
    """
    if T < 1:
        raise MVConsistConfigError(f"The schedule needs at least one step, got T={T}.")
    if not 0.0 < beta_start <= beta_end < 1.0:
        raise MVConsistConfigError(
            "Schedule betas must satisfy 0 < beta_start <= beta_end < 1, "
            f"got beta_start={beta_start}, beta_end={beta_end}."
        )
    beta = torch.zeros(T + 1, dtype=torch.float64)
    beta[1:] = torch.linspace(beta_start, beta_end, T, dtype=torch.float64)
    alpha = 1.0 - beta
    return Schedule(T=T, beta=beta, alpha=alpha, alpha_bar=torch.cumprod(alpha, 0))


def _coefficient(values: torch.Tensor, t: Timestep, like: torch.Tensor):
    """Look up ``values[t]`` broadcastable against ``like``.

    Integer steps give a Python float; a ``(B,)`` tensor of steps gives a
    tensor shaped ``(B, 1, ..., 1)``.
    """
    if isinstance(t, torch.Tensor) and t.dim() > 0:
        picked = values[t.long().cpu()].to(dtype=like.dtype, device=like.device)
        return picked.reshape(-1, *([1] * (like.dim() - 1)))
    return float(values[int(t)])


def _check_step(t: Timestep, schedule: Schedule, low: int) -> None:
    steps = t if isinstance(t, torch.Tensor) else torch.tensor(t)
    if bool((steps < low).any()) or bool((steps > schedule.T).any()):
        raise MVConsistConfigError(
            f"Time step out of range [{low}, {schedule.T}]: {steps.tolist()}."
        )


def forward_sample(
    z0: torch.Tensor, t: Timestep, eps: torch.Tensor, schedule: Schedule
) -> torch.Tensor:
    """Noise ``z0`` to step ``t`` in closed form."""
    if z0.shape != eps.shape:
        raise MVConsistShapeError(
            f"Clean sample {tuple(z0.shape)} and noise {tuple(eps.shape)} differ."
        )
    _check_step(t, schedule, 0)
    alpha_bar = _coefficient(schedule.alpha_bar, t, z0)
    return alpha_bar**0.5 * z0 + (1.0 - alpha_bar) ** 0.5 * eps


def predict_z0(
    z_t: torch.Tensor, eps_pred: torch.Tensor, t: Timestep, schedule: Schedule
) -> torch.Tensor:
    """Invert :func:`forward_sample` given a noise estimate."""
    _check_step(t, schedule, 1)
    alpha_bar = _coefficient(schedule.alpha_bar, t, z_t)
    return (z_t - (1.0 - alpha_bar) ** 0.5 * eps_pred) / alpha_bar**0.5


def ddpm_step(
    z_t: torch.Tensor,
    eps_pred: torch.Tensor,
    t: int,
    schedule: Schedule,
    noise: Optional[torch.Tensor] = None,
) -> torch.Tensor:
    """Take one ancestral step from ``t`` to ``t - 1``.

    :param noise: Standard Gaussian draw; ``None`` means no noise, which is
        what the last step ``t = 1`` uses.
    """
    _check_step(t, schedule, 1)
    beta = float(schedule.beta[t])
    alpha = float(schedule.alpha[t])
    alpha_bar = float(schedule.alpha_bar[t])
    mean = (z_t - beta / (1.0 - alpha_bar) ** 0.5 * eps_pred) / alpha**0.5
    if noise is None:
        return mean
    return mean + beta**0.5 * noise


def sample_timesteps(
    batch_size: int, schedule: Schedule, generator: torch.Generator
) -> torch.Tensor:
    """Draw ``batch_size`` steps uniformly from ``1 .. T``."""
    return torch.randint(1, schedule.T + 1, (batch_size,), generator=generator)
