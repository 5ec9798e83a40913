# -*- coding: utf-8 -*-
#
# This file is part of MVConsist.
# Copyright (C) 2026 MVConsist contributors.
#
# MVConsist is free software; you can redistribute it and/or modify it
# under the terms of the MIT License; see LICENSE file for more details.

"""MVConsist."""

from __future__ import absolute_import, print_function

from .version import __version__

__all__ = ("__version__",)
