# -*- coding: utf-8 -*-
#
# This file is part of MVConsist.
# Copyright (C) 2026 MVConsist contributors.
#
# MVConsist is free software; you can redistribute it and/or modify it
# under the terms of the MIT License; see LICENSE file for more details.

"""MVConsist errors."""


class MVConsistError(Exception):
    """Base class for MVConsist errors."""

    exit_code = 1

    def __init__(self, message):
        """Initialize MVConsistError exception."""
        super().__init__(message)
        self.message = message


class MVConsistConfigError(MVConsistError):
    """Invalid experiment configuration or invalid arguments."""


class MVConsistShapeError(MVConsistError):
    """Tensor shapes or resolutions do not match."""


class MVConsistPreconditionError(MVConsistError):
    """A required artifact is missing or a quantity is undefined."""

    exit_code = 2


class MVConsistNumericalError(MVConsistError):
    """Training produced non-finite values."""

    exit_code = 3


class MVConsistCheckpointError(MVConsistPreconditionError):
    """Checkpoint file is unreadable or belongs to another architecture."""
