# -*- coding: utf-8 -*-
#
# This file is part of MVConsist.
# Copyright (C) 2026 MVConsist contributors.
#
# MVConsist is free software; you can redistribute it and/or modify it
# under the terms of the MIT License; see LICENSE file for more details.
"""MVConsist utils."""

import hashlib
import json
import logging
import os
import pathlib
import sys
from typing import Dict, Iterable, Union

import numpy as np
import torch
from PIL import Image
from tqdm import tqdm

from mvconsist.config import MVCONSIST_PROGRESS_BAR
from mvconsist.errors import MVConsistPreconditionError


def derive_seed(seed: int, *keys: Union[int, str]) -> int:
    """Derive an independent 63-bit seed from a master seed and a key path.

    Seeds are counter based: the stream for ``("view", 3)`` does not depend on
    how many other streams were derived before, so adding views never changes
    the draws of earlier ones.

    :param seed: Master seed of the experiment.
    :param keys: Path identifying the stream, e.g. ``("noise", "view", 2)``.
    :return: Seed usable with ``torch.Generator.manual_seed``.
    """
    spawn_key = tuple(
        int.from_bytes(hashlib.sha256(key.encode()).digest()[:4], "little")
        if isinstance(key, str)
        else int(key)
        for key in keys
    )
    sequence = np.random.SeedSequence(entropy=int(seed), spawn_key=spawn_key)
    return int(sequence.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def make_generator(seed: int, *keys: Union[int, str]) -> torch.Generator:
    """Return a CPU ``torch.Generator`` seeded with :func:`derive_seed`."""
    generator = torch.Generator()
    generator.manual_seed(derive_seed(seed, *keys))
    return generator


def fingerprint(data: Dict, length: int = 16) -> str:
    """Hash a JSON-serializable dictionary independently of key order."""
    canonical = json.dumps(data, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:length]


def progress(iterable: Iterable, **kwargs):
    """Wrap ``iterable`` in a progress bar depending on configuration."""
    if MVCONSIST_PROGRESS_BAR == "never":
        disable = True
    elif MVCONSIST_PROGRESS_BAR == "always":
        disable = False
    else:
        disable = not sys.stderr.isatty()
    return tqdm(iterable, disable=disable, leave=False, **kwargs)


def create_run_directory(run_dir: Union[str, pathlib.Path]) -> pathlib.Path:
    """Create the run directory if it does not exist yet."""
    path = pathlib.Path(run_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def require_artifact(path: pathlib.Path, subcommand: str) -> pathlib.Path:
    """Check that a prerequisite artifact exists.

    :param path: Artifact expected in the run directory.
    :param subcommand: CLI subcommand producing the artifact.
    :raises MVConsistPreconditionError: If the artifact is missing.
    """
    if not path.exists():
        raise MVConsistPreconditionError(
            f"Missing {path.name} in {path.parent}. "
            f"Please run `mvconsist {subcommand}` first."
        )
    return path


def save_png(image: torch.Tensor, path: Union[str, pathlib.Path]) -> None:
    """Write a ``(3, H, W)`` image with values in [0, 1] as 8-bit RGB PNG."""
    array = (
        (image.detach().clamp(0, 1) * 255.0)
        .round()
        .to(torch.uint8)
        .permute(1, 2, 0)
        .cpu()
        .numpy()
    )
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    Image.fromarray(array, mode="RGB").save(path)


def write_json_lines(records: Iterable[Dict], path: Union[str, pathlib.Path]) -> None:
    """Write one JSON object per line."""
    with open(path, "w") as output_file:
        for record in records:
            output_file.write(json.dumps(record, sort_keys=True) + "\n")
    logging.info(f"Wrote {path}.")


def read_json_lines(path: Union[str, pathlib.Path]):
    """Read a JSON-lines file written by :func:`write_json_lines`."""
    with open(path) as input_file:
        return [json.loads(line) for line in input_file if line.strip()]
