# -*- coding: utf-8 -*-
#
# This file is part of MVConsist.
# Copyright (C) 2026 MVConsist contributors.
#
# MVConsist is free software; you can redistribute it and/or modify it
# under the terms of the MIT License; see LICENSE file for more details.

"""MVConsist command line tool."""

import logging
import sys
import traceback

import click
import tablib

from mvconsist.ablation import (
    COMPONENT_ORDERING,
    NOISE_ORDERING,
    WeightCache,
    ablation_table,
    check_ordering,
    run_ablation,
)
from mvconsist.config import MVCONSIST_LOG_FORMAT, MVCONSIST_LOG_LEVEL
from mvconsist.decorators import experiment_options, output_format_option
from mvconsist.errors import MVConsistConfigError, MVConsistError
from mvconsist.experiment import ABLATION_GRIDS, ExperimentConfig, load_config
from mvconsist.pipeline import (
    SUMMARY_HEADERS,
    RunPaths,
    correlation_report,
    prepare_run,
    run_eval,
    run_gen_data,
    run_sample,
    run_train_base,
    run_train_fba,
    summary_table,
)
from mvconsist.scenes import load_dataset
from mvconsist.version import __version__


class MVConsistGroup(click.Group):
    """Command group reporting usage errors with exit code 1."""

    def main(self, args=None, prog_name=None, **kwargs):
        """Run the group, mapping click errors to exit code 1."""
        kwargs.pop("standalone_mode", None)
        try:
            return super().main(args, prog_name, standalone_mode=False, **kwargs)
        except click.ClickException as error:
            error.show()
            sys.exit(1)
        except click.Abort:
            click.echo("Aborted!", err=True)
            sys.exit(1)


def _fail(error: MVConsistError) -> None:
    logging.debug(traceback.format_exc())
    click.secho(error.message, fg="red", err=True)
    sys.exit(error.exit_code)


def _echo_table(table: tablib.Dataset, output_format) -> None:
    if output_format:
        click.echo(table.export(output_format))
    else:
        click.echo(table)


def _last_losses(state) -> str:
    if not state.history:
        return "nothing left to train"
    record = state.history[-1]
    return ", ".join(
        f"{key}={value:.5f}" for key, value in sorted(record.items()) if key != "step"
    )


@click.group(cls=MVConsistGroup)
@click.version_option(__version__, prog_name="mvconsist")
def mvconsist():
    """Multi-view consistent generation experiments."""
    logging.basicConfig(
        level=MVCONSIST_LOG_LEVEL, format=MVCONSIST_LOG_FORMAT, force=True
    )


@mvconsist.command("gen-data")
@experiment_options
def gen_data(config_path, seed, out, views, smoke):
    """Render the procedural scene dataset."""
    try:
        config = load_config(config_path, seed, out, views, smoke)
        dataset = run_gen_data(config)
        click.echo(
            f"Generated {len(dataset.scenes)} scenes "
            f"({len(dataset.train_ids)} train, {len(dataset.eval_ids)} eval) "
            f"in {config.output_dir}."
        )
    except MVConsistError as e:
        _fail(e)


@mvconsist.command("train-base")
@experiment_options
def train_base(config_path, seed, out, views, smoke):
    """Train the single-view base denoiser."""
    try:
        config = load_config(config_path, seed, out, views, smoke)
        state = run_train_base(config)
        click.echo(f"Base denoiser at step {state.step}: {_last_losses(state)}.")
    except MVConsistError as e:
        _fail(e)


@mvconsist.command("train-fba")
@experiment_options
def train_fba(config_path, seed, out, views, smoke):
    """Train the multi-view blocks with the base denoiser frozen."""
    try:
        config = load_config(config_path, seed, out, views, smoke)
        state = run_train_fba(config)
        click.echo(f"Multi-view blocks at step {state.step}: {_last_losses(state)}.")
    except MVConsistError as e:
        _fail(e)


@mvconsist.command("sample")
@experiment_options
def sample(config_path, seed, out, views, smoke):
    """Sample every view of the evaluation scenes."""
    try:
        config = load_config(config_path, seed, out, views, smoke)
        samples = run_sample(config)
        click.echo(
            f"Sampled {samples.shape[0]} scenes of {samples.shape[1]} views "
            f"in {config.output_dir}."
        )
    except MVConsistError as e:
        _fail(e)


@mvconsist.command("eval")
@experiment_options
@click.option(
    "--ground-truth",
    is_flag=True,
    default=False,
    help="Score the ground-truth renders instead of the samples.",
)
@click.option(
    "--noise-correlation",
    is_flag=True,
    default=False,
    help="Also report the cross-view correlation of the initial noise per band.",
)
@output_format_option
def evaluate(
    config_path,
    seed,
    out,
    views,
    smoke,
    ground_truth,
    noise_correlation,
    output_format,
):
    """Score multi-view consistency against the ground truth."""
    try:
        config = load_config(config_path, seed, out, views, smoke)
        summary = run_eval(config, ground_truth=ground_truth)
        _echo_table(summary_table([summary], SUMMARY_HEADERS), output_format)
        if noise_correlation:
            dataset = load_dataset(RunPaths.of(config.output_dir).dataset)
            report = correlation_report(config, dataset, dataset.eval_ids)
            rows = report.rows()
            _echo_table(
                summary_table(rows, ["band", "low", "high", "correlation"]),
                output_format,
            )
    except MVConsistError as e:
        _fail(e)


def parse_grid_values(grid: str, text: str) -> list:
    """Parse comma-separated grid values; weights become floats."""
    values = [value.strip() for value in text.split(",") if value.strip()]
    if grid == "w":
        try:
            return [float(value) for value in values]
        except ValueError:
            raise MVConsistConfigError(f"Ablation weights must be numbers: {text}.")
    return values


@mvconsist.command("ablate")
@experiment_options
@click.option(
    "--grid",
    type=click.Choice(ABLATION_GRIDS),
    help="Swept parameter overriding the configuration.",
)
@click.option(
    "--values",
    "grid_values",
    help="Comma-separated values overriding the configured grid values.",
)
@output_format_option
def ablate(config_path, seed, out, views, smoke, grid, grid_values, output_format):
    """Sweep one parameter and compare the consistency metrics."""
    try:
        config = load_config(config_path, seed, out, views, smoke)
        if grid or grid_values:
            ablation = {"grid": grid or config.ablation.grid}
            if grid_values:
                ablation["values"] = parse_grid_values(ablation["grid"], grid_values)
            elif grid and grid != config.ablation.grid:
                ablation["values"] = None
            data = config.to_dict()
            data["ablation"].update(ablation)
            config = ExperimentConfig.from_dict(data)
        paths = prepare_run(config)
        dataset = load_dataset(paths.dataset)
        rows = run_ablation(config, dataset, WeightCache(paths.root / "cache"))
        table = ablation_table(rows)
        with open(paths.ablation, "w") as ablation_file:
            ablation_file.write(table.export("csv"))
        _echo_table(table, output_format)
        orderings = {"noise_mode": NOISE_ORDERING, "components": COMPONENT_ORDERING}
        if config.ablation.grid in orderings:
            check = check_ordering(rows, orderings[config.ablation.grid])
            if check is not None:
                color = "green" if check.holds and not check.overlapping else "yellow"
                click.secho(check.message, fg=color, err=True)
    except MVConsistError as e:
        _fail(e)


def main():
    """Run the ``mvconsist`` command line tool."""
    mvconsist()
