# -*- coding: utf-8 -*-
#
# This file is part of MVConsist.
# Copyright (C) 2026 MVConsist contributors.
#
# MVConsist is free software; you can redistribute it and/or modify it
# under the terms of the MIT License; see LICENSE file for more details.

"""MVConsist tests for the training stages."""

import copy
import logging

import mock
import pytest
import torch
import torch.nn.functional as F

from mvconsist.denoiser import DenoiserSettings, TinyUNet, count_parameters
from mvconsist.diffusion import forward_sample
from mvconsist.errors import MVConsistConfigError, MVConsistNumericalError
from mvconsist.experiment import ExperimentConfig
from mvconsist.pipeline import fit_base, fit_fba
from mvconsist.training import (
    BaseTrainer,
    FbaTrainer,
    TrainingSettings,
    TrainState,
    train_base,
    train_fba,
)


@pytest.fixture()
def settings():
    return TrainingSettings(
        base_steps=2, fba_steps=2, batch_size=4, views_per_sample=3, xa_lambda=0.5
    )


def _snapshot(model, partition):
    return {
        name: parameter.detach().clone()
        for name, parameter in model.named_parameters()
        if name in model.partition()[partition]
    }


def test_train_fba_freezes_the_base(tiny_model, tiny_dataset, schedule, settings):
    base = _snapshot(tiny_model, "base")
    fba = _snapshot(tiny_model, "fba")
    _, state = train_fba(tiny_model, tiny_dataset, schedule, settings, seed=0)
    assert state.step == 2
    after = dict(tiny_model.named_parameters())
    assert all(torch.equal(after[name], value) for name, value in base.items())
    assert any(not torch.equal(after[name], value) for name, value in fba.items())


def test_train_base_leaves_multi_view_blocks(tiny_model, tiny_dataset, schedule):
    fba = _snapshot(tiny_model, "fba")
    settings = TrainingSettings(base_steps=2, batch_size=4)
    _, state = train_base(tiny_model, tiny_dataset, schedule, settings, seed=0)
    after = dict(tiny_model.named_parameters())
    assert all(torch.equal(after[name], value) for name, value in fba.items())
    assert [record["step"] for record in state.history] == [1, 2]


@pytest.mark.parametrize("xa_lambda", [0.0, 0.5, 2.0])
def test_fba_loss_decomposition(tiny_model, tiny_dataset, schedule, xa_lambda):
    settings = TrainingSettings(views_per_sample=3, xa_lambda=xa_lambda)
    trainer = FbaTrainer(tiny_model, tiny_dataset, schedule, settings, seed=0)
    batch = trainer.draw_batch()
    losses = trainer.batch_loss(batch)
    total = float(losses["ldm"]) + xa_lambda * float(losses["xa"])
    assert float(losses["total"]) == pytest.approx(total, abs=1e-6)
    if xa_lambda == 0.0:
        assert float(losses["total"]) == float(losses["ldm"])
    assert len(batch["indices"]) == 3
    assert batch["prompts"].shape == (3, 3)


def test_base_training_reduces_the_loss(tiny_model, tiny_dataset, schedule):
    settings = TrainingSettings(batch_size=16, learning_rate=3e-3)
    trainer = BaseTrainer(tiny_model, tiny_dataset, schedule, settings, seed=0)
    batch = trainer.draw_batch()

    def loss():
        with torch.no_grad():
            z_t = forward_sample(batch["z0"], batch["t"], batch["eps"], schedule)
            eps = tiny_model(
                z_t, batch["t"], batch["prompts"], use_fba=False, use_xa=False
            ).eps
            return float(F.mse_loss(eps, batch["eps"]))

    before = loss()
    trainer.run(60)
    assert loss() < before


def test_resumed_training_matches_uninterrupted(
    tiny_model, tiny_dataset, schedule, tmp_path
):
    twin = copy.deepcopy(tiny_model)
    train_base(
        twin, tiny_dataset, schedule, TrainingSettings(base_steps=4, batch_size=4), 0
    )

    _, state = train_base(
        tiny_model,
        tiny_dataset,
        schedule,
        TrainingSettings(base_steps=2, batch_size=4),
        seed=0,
    )
    state.save(tmp_path / "base.state.pt")
    restored = TrainState.load(tmp_path / "base.state.pt")
    assert restored.step == 2
    _, state = train_base(
        tiny_model,
        tiny_dataset,
        schedule,
        TrainingSettings(base_steps=4, batch_size=4),
        seed=0,
        state=restored,
    )
    assert state.step == 4
    for (name, parameter), other in zip(
        tiny_model.named_parameters(), twin.parameters()
    ):
        assert torch.allclose(parameter, other, atol=1e-6), name


def test_non_finite_loss_is_reported(tiny_model, tiny_dataset, schedule, settings):
    trainer = BaseTrainer(tiny_model, tiny_dataset, schedule, settings, seed=0)
    nan = torch.tensor(float("nan"), requires_grad=True)
    with mock.patch.object(
        BaseTrainer, "batch_loss", return_value={"ldm": nan, "total": nan}
    ):
        with pytest.raises(MVConsistNumericalError, match="diverged at step 1"):
            trainer.step()
    assert trainer.state.step == 0


def test_nothing_to_train(tiny_dataset, schedule, settings):
    model = TinyUNet(
        DenoiserSettings(height=16, width=16, fba_enabled=False, xa_layers=())
    )
    with pytest.raises(MVConsistConfigError, match="nothing to train"):
        FbaTrainer(model, tiny_dataset, schedule, settings, seed=0)


def test_fitting_logs_trainable_parameters(tiny_model, tiny_dataset, caplog):
    config = ExperimentConfig()
    base = count_parameters(tiny_model, ["base"])
    multi_view = count_parameters(tiny_model, ["fba", "xa"])
    total = count_parameters(tiny_model)
    caplog.set_level(logging.INFO)
    with mock.patch("mvconsist.pipeline.train_base") as train, mock.patch(
        "mvconsist.pipeline.train_fba"
    ) as train_multi_view:
        fit_base(config, tiny_dataset, tiny_model)
        fit_fba(config, tiny_dataset, tiny_model)
    assert train.call_count == train_multi_view.call_count == 1
    assert f"Training {base} of {total} parameters (base)." in caplog.text
    assert f"Training {multi_view} of {total} parameters (fba, xa)." in caplog.text
