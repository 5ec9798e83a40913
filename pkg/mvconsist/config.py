# -*- coding: utf-8 -*-
#
# This file is part of MVConsist.
# Copyright (C) 2026 MVConsist contributors.
#
# MVConsist is free software; you can redistribute it and/or modify it
# under the terms of the MIT License; see LICENSE file for more details.

"""MVConsist configuration."""

import logging
import os

MVCONSIST_LOG_LEVEL = logging.getLevelName(
    os.getenv("MVCONSIST_LOG_LEVEL", "INFO").upper()
)
"""Log level used by the command line tool."""

MVCONSIST_LOG_FORMAT = os.getenv(
    "MVCONSIST_LOG_FORMAT",
    "%(asctime)s | %(name)s | %(threadName)s | %(levelname)s | %(message)s",
)
"""Log format used by the command line tool."""

MVCONSIST_OUTPUT_DIR = os.getenv("MVCONSIST_OUTPUT_DIR", "runs/default")
"""Default run directory when neither the config nor ``--out`` gives one."""

MVCONSIST_PROGRESS_BAR = os.getenv("MVCONSIST_PROGRESS_BAR", "auto")
"""Progress bars: ``auto`` (only on terminals), ``always`` or ``never``."""

MVCONSIST_LOG_EVERY = int(os.getenv("MVCONSIST_LOG_EVERY", 50))
"""Number of training steps between two progress log records."""

# Diffusion
# =========
DEFAULT_TIMESTEPS = 100
"""Number of diffusion steps ``T``."""

DEFAULT_BETA_START = 1e-4
"""First value of the linear variance schedule."""

DEFAULT_BETA_END = 0.02
"""Last value of the linear variance schedule."""

# Views
# =====
DEFAULT_N_VIEWS = 8
"""Views per panorama ring, i.e. 45 degrees between neighbouring views."""

DEFAULT_FOV_DEG = 90.0
"""Horizontal field of view of every view."""

# Noise initialization
# ====================
NOISE_MODES = ["independent", "shared", "mixed", "coordinate", "low_freq_coordinate"]
"""Supported noise initialization modes.
- ``independent``: per-view Gaussian noise only;
- ``shared``: one draw shared by all views blended with per-view noise;
- ``mixed``: shared and per-view noise weighted by ``alpha_mix``;
- ``coordinate``: transformed pixel coordinates (or depth) blended with shared noise;
- ``low_freq_coordinate``: low band of the coordinates plus high band of per-view noise.
"""

COORDINATE_SOURCES = ["coordinates", "depth"]
"""Where the low-frequency field ``c`` of coordinate noise comes from."""

DEFAULT_NOISE_WEIGHT = 0.5
"""Blend weight ``w`` between coordinate field and shared noise."""

DEFAULT_ALPHA_MIX = 1.0
"""Weight ``alpha`` of the mixed noise baseline."""

DEFAULT_STOP_FREQ = 0.25
"""Normalized stop frequency of constant-radius filters."""

# Fourier-based attention
# =======================
FILTER_KINDS = ["binary_hpf", "gaussian_hpf", "binary_lpf", "gaussian_lpf", "none"]
"""Spectral masks applied to coordinate-noise features."""

FILTER_DIRECTIONS = ["r_t", "one_minus_r_t", "constant"]
"""How the mask radius follows the time step."""

DENOISER_LEVELS = ["0", "1", "mid"]
"""Resolution levels of the toy denoiser that can carry attention blocks."""

XA_LAYERS = ["mid"]
"""Levels carrying prompt cross-attention."""

DEFAULT_PE_BANDS = 4
"""Octaves of the displacement positional encoding."""

DEFAULT_XA_LAMBDA = 10.0
"""Weight of the cross-attention loss in the total loss."""

# Training
# ========
DEFAULT_LEARNING_RATE = 2e-4
"""Adam learning rate."""

DEFAULT_VIEWS_PER_SAMPLE = 4
"""Consecutive ring views per multi-view training sample."""

# Metrics
# =======
PSNR_CAP = float(os.getenv("MVCONSIST_PSNR_CAP", 100.0))
"""PSNR reported for identical images."""

CORRELATION_ALIGNMENTS = ["pixel", "correspondence"]
"""How two views are aligned before measuring their correlation."""

# Synthetic scenes
# ================
OBJECT_KINDS = ["lamp", "painting", "window"]
"""Primitive objects placed on the room wall."""

OBJECT_COLORS = ["red", "green", "blue", "yellow"]
"""Colours of the placed objects."""

PROMPT_VOCABULARY_SIZE = 1 + len(OBJECT_KINDS) * len(OBJECT_COLORS)
"""Prompt attribute ids; id ``0`` is the empty room token."""

PROMPT_TOKENS_PER_VIEW = 3
"""Prompt tokens per view, padded with the empty room token."""

# Checkpoints
# ===========
CHECKPOINT_MAGIC = b"MVCK"
"""Magic bytes opening every parameter checkpoint."""

CHECKPOINT_VERSION = 1
"""Version of the flat binary checkpoint format."""

# Ablations
# =========
COMPONENT_PRESETS = {
    "caa": {
        "fba": {"enabled": True, "non_overlap": False},
        "xa": {"lambda": 0.0},
        "noise": {"mode": "independent"},
    },
    "caa_shared": {
        "fba": {"enabled": True, "non_overlap": False},
        "xa": {"lambda": 0.0},
        "noise": {"mode": "shared"},
    },
    "caa_coordinate": {
        "fba": {"enabled": True, "non_overlap": False},
        "xa": {"lambda": 0.0},
        "noise": {"mode": "coordinate"},
    },
    "fba": {
        "fba": {"enabled": True, "non_overlap": True},
        "xa": {"lambda": 0.0},
        "noise": {"mode": "coordinate"},
    },
    "fba_xa": {
        "fba": {"enabled": True, "non_overlap": True},
        "xa": {"lambda": DEFAULT_XA_LAMBDA},
        "noise": {"mode": "coordinate"},
    },
}
"""Configuration overrides of the cumulative component ablation, in build-up order.
- ``caa``: correspondence-aware attention over overlapping pixels, independent noise;
- ``caa_shared`` / ``caa_coordinate``: the same blocks with shared or coordinate noise;
- ``fba``: attention also reaches filtered coordinate-noise features off the overlap;
- ``fba_xa``: adds the cross-attention preservation loss.
"""

FILTER_DIRECTION_SEPARATOR = ":"
"""Separates a filter kind from its direction in ``filter_kind`` grid values."""
