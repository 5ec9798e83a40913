# -*- coding: utf-8 -*-
#
# This file is part of MVConsist.
# Copyright (C) 2026 MVConsist contributors.
#
# MVConsist is free software; you can redistribute it and/or modify it
# under the terms of the MIT License; see LICENSE file for more details.

"""Two-stage training: the base denoiser on single views, then FBA and
cross-attention on multi-view sequences with the base frozen."""

import logging
import pathlib
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple, Union

import torch
import torch.nn.functional as F

from mvconsist.attention import xa_loss
from mvconsist.config import (
    DEFAULT_LEARNING_RATE,
    DEFAULT_NOISE_WEIGHT,
    DEFAULT_VIEWS_PER_SAMPLE,
    DEFAULT_XA_LAMBDA,
    MVCONSIST_LOG_EVERY,
)
from mvconsist.denoiser import (
    TinyUNet,
    collect_g_features,
    collect_noise_free_maps,
    encode,
    partition_of,
)
from mvconsist.diffusion import Schedule, forward_sample, sample_timesteps
from mvconsist.errors import (
    MVConsistConfigError,
    MVConsistNumericalError,
    MVConsistPreconditionError,
)
from mvconsist.geometry import GeometryContext, coordinate_field, depth_field
from mvconsist.noise import tile_channels
from mvconsist.scenes import SceneDataset
from mvconsist.utils import make_generator, progress


@dataclass
class TrainingSettings:
    """Optimization settings of both training stages."""

    base_steps: int = 2000
    fba_steps: int = 1000
    batch_size: int = 16
    views_per_sample: int = DEFAULT_VIEWS_PER_SAMPLE
    learning_rate: float = DEFAULT_LEARNING_RATE
    xa_lambda: float = DEFAULT_XA_LAMBDA
    maps0_with_fba: bool = True
    g_uses_clean_latent: bool = False
    noise_w: float = DEFAULT_NOISE_WEIGHT
    coord_source: str = "coordinates"


@dataclass
class TrainState:
    """Optimizer, RNG and loss history needed to resume training exactly."""

    step: int = 0
    optimizer: Dict = field(default_factory=dict)
    rng_state: Optional[torch.Tensor] = None
    history: List[Dict[str, float]] = field(default_factory=list)

    def save(self, path: Union[str, pathlib.Path]) -> None:
        """Write the state with ``torch.save``."""
        torch.save(
            {
                "step": self.step,
                "optimizer": self.optimizer,
                "rng_state": self.rng_state,
                "history": self.history,
            },
            path,
        )

    @classmethod
    def load(cls, path: Union[str, pathlib.Path]) -> "TrainState":
        """Read a state written by :meth:`save`."""
        data = torch.load(path)
        return cls(
            step=data["step"],
            optimizer=data["optimizer"],
            rng_state=data["rng_state"],
            history=list(data["history"]),
        )


class Trainer:
    """Adam loop over one parameter partition set.

    Subclasses draw a batch with :meth:`draw_batch` and turn it into named
    losses with :meth:`batch_loss`; the ``total`` entry is optimized.
    """

    name = "trainer"
    partitions: Tuple[str, ...] = ()

    def __init__(
        self,
        model: TinyUNet,
        dataset: SceneDataset,
        schedule: Schedule,
        settings: TrainingSettings,
        seed: int,
        state: Optional[TrainState] = None,
    ):
        """Freeze every parameter outside :attr:`partitions` and set up Adam.

        :param state: Resume from this state instead of starting fresh.
        """
        self.model = model
        self.dataset = dataset
        self.schedule = schedule
        self.settings = settings
        for name, parameter in model.named_parameters():
            parameter.requires_grad_(partition_of(name) in self.partitions)
        parameters = model.partition_parameters(*self.partitions)
        if not parameters:
            raise MVConsistConfigError(
                f"{self.name} has nothing to train in partitions {self.partitions}."
            )
        self.optimizer = torch.optim.Adam(parameters, lr=settings.learning_rate)
        self.generator = make_generator(seed, "train", self.name)
        self.state = state or TrainState()
        if state is not None:
            if state.optimizer:
                self.optimizer.load_state_dict(state.optimizer)
            if state.rng_state is not None:
                self.generator.set_state(state.rng_state)

    def draw_batch(self) -> Dict:
        """Draw the random inputs of one step."""
        raise NotImplementedError

    def batch_loss(self, batch: Dict) -> Dict[str, torch.Tensor]:
        """Compute the named losses of a batch."""
        raise NotImplementedError

    def step(self) -> Dict[str, float]:
        """Run one optimization step and record its losses.

        :raises MVConsistNumericalError: If the total loss is not finite.
        """
        self.optimizer.zero_grad()
        losses = self.batch_loss(self.draw_batch())
        record = {key: float(value) for key, value in losses.items()}
        record["step"] = self.state.step + 1
        if not torch.isfinite(losses["total"]):
            raise MVConsistNumericalError(
                f"{self.name} diverged at step {record['step']}: {record}."
            )
        losses["total"].backward()
        self.optimizer.step()
        self.state.step += 1
        self.state.history.append(record)
        if self.state.step % MVCONSIST_LOG_EVERY == 0:
            logging.info(
                f"{self.name} step {self.state.step}: "
                + ", ".join(f"{key}={record[key]:.5f}" for key in sorted(losses))
            )
        return record

    def snapshot(self) -> TrainState:
        """Store the optimizer and RNG state into :attr:`state`."""
        self.state.optimizer = self.optimizer.state_dict()
        self.state.rng_state = self.generator.get_state()
        return self.state

    def run(self, steps: int) -> TrainState:
        """Run ``steps`` steps and return the resumable state."""
        for _ in progress(range(steps), desc=self.name):
            self.step()
        return self.snapshot()


class BaseTrainer(Trainer):
    """Denoising objective on independent single views."""

    name = "train-base"
    partitions = ("base",)

    def __init__(self, *args, **kwargs):
        """Initialize the trainer; see :class:`Trainer`."""
        super().__init__(*args, **kwargs)
        self.images, self.prompts = self.dataset.single_view_tensors()

    def draw_batch(self) -> Dict:
        """Draw images, steps and noise."""
        size = (self.settings.batch_size,)
        index = torch.randint(0, self.images.shape[0], size, generator=self.generator)
        z0 = encode(self.images[index])
        return {
            "z0": z0,
            "prompts": self.prompts[index],
            "t": sample_timesteps(z0.shape[0], self.schedule, self.generator),
            "eps": torch.randn(z0.shape, generator=self.generator),
        }

    def batch_loss(self, batch: Dict) -> Dict[str, torch.Tensor]:
        """Mean squared error of the noise prediction."""
        z_t = forward_sample(batch["z0"], batch["t"], batch["eps"], self.schedule)
        output = self.model(
            z_t, batch["t"], batch["prompts"], use_fba=False, use_xa=False
        )
        ldm = F.mse_loss(output.eps, batch["eps"])
        return {"ldm": ldm, "total": ldm}


class FbaTrainer(Trainer):
    """Denoising plus cross-attention objective on view sequences."""

    name = "train-fba"
    partitions = ("fba", "xa")

    def __init__(self, *args, **kwargs):
        """Initialize the trainer; see :class:`Trainer`."""
        super().__init__(*args, **kwargs)
        if self.dataset.view_set is None:
            raise MVConsistPreconditionError("FBA training needs the view geometry.")
        self._geometry: Dict[Tuple[int, ...], GeometryContext] = {}
        self._coordinates: Dict[int, torch.Tensor] = {}

    def geometry(self, indices: Tuple[int, ...]) -> GeometryContext:
        """Cached geometry of a ring subsequence."""
        if indices not in self._geometry:
            self._geometry[indices] = GeometryContext(self.dataset.view_set, indices)
        return self._geometry[indices]

    def coordinate_fields(self, scene, indices: Tuple[int, ...]) -> torch.Tensor:
        """Coordinate or depth fields of the selected views, ``(n, C, H, W)``."""
        channels = scene.images.shape[1]
        if self.settings.coord_source == "depth":
            field = depth_field(scene.depth)[list(indices)].to(torch.float32)
            return field[:, None].expand(-1, channels, -1, -1)
        view_set = self.dataset.view_set
        for i in indices:
            if i not in self._coordinates:
                self._coordinates[i] = tile_channels(
                    coordinate_field(view_set, i), channels
                )
        return torch.stack([self._coordinates[i] for i in indices])

    def draw_batch(self) -> Dict:
        """Draw a scene, a ring subsequence, one step and the noise."""
        train_ids = self.dataset.train_ids
        position = int(torch.randint(0, len(train_ids), (), generator=self.generator))
        scene = self.dataset.scenes[train_ids[position]]
        n_views = self.dataset.view_set.n_views
        start = int(torch.randint(0, n_views, (), generator=self.generator))
        count = min(self.settings.views_per_sample, n_views)
        indices = tuple((start + k) % n_views for k in range(count))
        z0 = encode(scene.images[list(indices)])
        eps_shared = torch.randn(z0.shape[1:], generator=self.generator)
        w = self.settings.noise_w
        return {
            "indices": indices,
            "z0": z0,
            "prompts": scene.prompts[list(indices)],
            "t": int(sample_timesteps(1, self.schedule, self.generator)[0]),
            "eps": torch.randn(z0.shape, generator=self.generator),
            "eps_hat": w * self.coordinate_fields(scene, indices)
            + (1.0 - w) * eps_shared,
        }

    def batch_loss(self, batch: Dict) -> Dict[str, torch.Tensor]:
        """Denoising loss plus the weighted cross-attention loss."""
        geometry = self.geometry(batch["indices"])
        t = batch["t"]
        g_features = None
        if self.model.needs_g_features:
            z0 = batch["z0"] if self.settings.g_uses_clean_latent else None
            g_features = collect_g_features(
                self.model, batch["eps_hat"], t, self.schedule, batch["prompts"], z0
            )
        maps_0 = collect_noise_free_maps(
            self.model,
            batch["z0"],
            batch["prompts"],
            geometry,
            self.schedule,
            with_fba=self.settings.maps0_with_fba,
        )
        z_t = forward_sample(batch["z0"], t, batch["eps"], self.schedule)
        output = self.model(z_t, t, batch["prompts"], geometry, g_features)
        ldm = F.mse_loss(output.eps, batch["eps"])
        xa = xa_loss(output.maps, maps_0) if output.maps else torch.zeros(())
        return {"ldm": ldm, "xa": xa, "total": ldm + self.settings.xa_lambda * xa}


def train_base(
    model: TinyUNet,
    dataset: SceneDataset,
    schedule: Schedule,
    settings: TrainingSettings,
    seed: int,
    state: Optional[TrainState] = None,
) -> Tuple[TinyUNet, TrainState]:
    """Train the base partition for the remaining ``base_steps``."""
    trainer = BaseTrainer(model, dataset, schedule, settings, seed, state)
    trainer.run(max(settings.base_steps - trainer.state.step, 0))
    return model, trainer.state


def train_fba(
    model: TinyUNet,
    dataset: SceneDataset,
    schedule: Schedule,
    settings: TrainingSettings,
    seed: int,
    state: Optional[TrainState] = None,
) -> Tuple[TinyUNet, TrainState]:
    """Train the FBA and cross-attention partitions with the base frozen."""
    trainer = FbaTrainer(model, dataset, schedule, settings, seed, state)
    trainer.run(max(settings.fba_steps - trainer.state.step, 0))
    return model, trainer.state
