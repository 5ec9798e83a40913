# -*- coding: utf-8 -*-
#
# This file is part of MVConsist.
# Copyright (C) 2026 MVConsist contributors.
#
# MVConsist is free software; you can redistribute it and/or modify it
# under the terms of the MIT License; see LICENSE file for more details.

"""Version information for MVConsist.

This file is imported by ``mvconsist.__init__``
and parsed by ``setup.py``.
"""

from __future__ import absolute_import, print_function

__version__ = "0.1.0a1"
