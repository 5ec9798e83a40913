# -*- coding: utf-8 -*-
#
# This file is part of MVConsist.
# Copyright (C) 2026 MVConsist contributors.
#
# MVConsist is free software; you can redistribute it and/or modify it
# under the terms of the MIT License; see LICENSE file for more details.

"""MVConsist command decorators."""

import functools
import os

import click


def experiment_options(func):
    """Click options selecting the experiment configuration and run directory."""

    @click.option(
        "--config",
        "config_path",
        type=click.Path(exists=True, dir_okay=False),
        default=os.environ.get("MVCONSIST_CONFIG"),
        help="YAML experiment configuration.",
    )
    @click.option("--seed", type=int, help="Seed overriding the configuration.")
    @click.option(
        "--out",
        type=click.Path(file_okay=False),
        help="Run directory overriding the configured output directory.",
    )
    @click.option(
        "--views", type=click.IntRange(min=1), help="Number of views on the ring."
    )
    @click.option(
        "--smoke", is_flag=True, default=False, help="Use the tiny smoke preset."
    )
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        return func(*args, **kwargs)

    return wrapper


def output_format_option(func):
    """Click option choosing how tables are printed."""

    @click.option(
        "--json",
        "output_format",
        flag_value="json",
        default=None,
        help="Get output in JSON format.",
    )
    @click.option(
        "--csv",
        "output_format",
        flag_value="csv",
        default=None,
        help="Get output in CSV format.",
    )
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        return func(*args, **kwargs)

    return wrapper
