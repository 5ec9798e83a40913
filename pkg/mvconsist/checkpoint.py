# -*- coding: utf-8 -*-
#
# This file is part of MVConsist.
# Copyright (C) 2026 MVConsist contributors.
#
# MVConsist is free software; you can redistribute it and/or modify it
# under the terms of the MIT License; see LICENSE file for more details.

"""Flat binary parameter checkpoints.

Layout, all integers little-endian::

    magic          4 bytes   b"MVCK"
    version        uint16
    hash length    uint16, then the architecture hash in ASCII
    count          uint32
    count times:
        name length  uint16, then the parameter name in UTF-8
        ndim         uint8
        shape        ndim x uint32
        data         prod(shape) x float32
"""

import logging
import pathlib
from collections import OrderedDict
from typing import Dict, Tuple, Union

import numpy as np
import torch
from torch import nn

from mvconsist.config import CHECKPOINT_MAGIC, CHECKPOINT_VERSION
from mvconsist.errors import MVConsistCheckpointError


def _uint(value: int, dtype: str) -> bytes:
    return np.array(value, dtype=dtype).tobytes()


def encode_checkpoint(
    tensors: Dict[str, torch.Tensor], architecture_hash: str
) -> bytes:
    """Serialize named tensors to the checkpoint layout."""
    encoded_hash = architecture_hash.encode("ascii")
    chunks = [
        CHECKPOINT_MAGIC,
        _uint(CHECKPOINT_VERSION, "<u2"),
        _uint(len(encoded_hash), "<u2"),
        encoded_hash,
        _uint(len(tensors), "<u4"),
    ]
    for name, tensor in tensors.items():
        encoded_name = name.encode("utf-8")
        array = tensor.detach().cpu().numpy().astype("<f4")
        chunks += [
            _uint(len(encoded_name), "<u2"),
            encoded_name,
            _uint(array.ndim, "<u1"),
            np.array(array.shape, dtype="<u4").tobytes(),
            array.tobytes(),
        ]
    return b"".join(chunks)


class _Reader:
    """Cursor over checkpoint bytes."""

    def __init__(self, data: bytes):
        self.data = data
        self.offset = 0

    def take(self, size: int) -> bytes:
        if self.offset + size > len(self.data):
            raise MVConsistCheckpointError("Checkpoint is truncated.")
        chunk = self.data[self.offset : self.offset + size]
        self.offset += size
        return chunk

    def array(self, dtype: str, count: int) -> np.ndarray:
        size = np.dtype(dtype).itemsize * count
        return np.frombuffer(self.take(size), dtype=dtype, count=count)

    def uint(self, dtype: str) -> int:
        return int(self.array(dtype, 1)[0])


def decode_checkpoint(data: bytes) -> Tuple[str, "OrderedDict[str, torch.Tensor]"]:
    """Parse checkpoint bytes into the architecture hash and named tensors.

    :raises MVConsistCheckpointError: On a wrong magic, version or truncation.
    """
    reader = _Reader(data)
    if reader.take(len(CHECKPOINT_MAGIC)) != CHECKPOINT_MAGIC:
        raise MVConsistCheckpointError("Not a parameter checkpoint (bad magic).")
    version = reader.uint("<u2")
    if version != CHECKPOINT_VERSION:
        raise MVConsistCheckpointError(
            f"Unsupported checkpoint version {version}, "
            f"expected {CHECKPOINT_VERSION}."
        )
    architecture_hash = reader.take(reader.uint("<u2")).decode("ascii")
    tensors = OrderedDict()
    for _ in range(reader.uint("<u4")):
        name = reader.take(reader.uint("<u2")).decode("utf-8")
        shape = tuple(int(dim) for dim in reader.array("<u4", reader.uint("<u1")))
        values = reader.array("<f4", int(np.prod(shape, dtype=np.int64)))
        tensors[name] = torch.from_numpy(values.astype(np.float32).reshape(shape))
    if reader.offset != len(data):
        raise MVConsistCheckpointError("Checkpoint has trailing bytes.")
    return architecture_hash, tensors


def save_checkpoint(
    model: nn.Module, architecture_hash: str, path: Union[str, pathlib.Path]
) -> None:
    """Write every parameter of ``model``."""
    with open(path, "wb") as checkpoint_file:
        checkpoint_file.write(encode_checkpoint(model.state_dict(), architecture_hash))
    logging.info(f"Wrote checkpoint {path}.")


def load_checkpoint(
    model: nn.Module, architecture_hash: str, path: Union[str, pathlib.Path]
) -> nn.Module:
    """Load parameters into ``model`` after checking the architecture hash.

    :raises MVConsistCheckpointError: If the checkpoint was written for
        another architecture or does not cover the model's parameters.
    """
    with open(path, "rb") as checkpoint_file:
        stored_hash, tensors = decode_checkpoint(checkpoint_file.read())
    if stored_hash != architecture_hash:
        raise MVConsistCheckpointError(
            f"Checkpoint {path} was written for architecture {stored_hash[:16]}, "
            f"not {architecture_hash[:16]}."
        )
    try:
        model.load_state_dict(tensors)
    except RuntimeError as error:
        raise MVConsistCheckpointError(f"Checkpoint {path} does not fit: {error}")
    return model
