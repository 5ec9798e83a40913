#!/usr/bin/env python3
# -*- coding: utf-8 -*-
#
# This file is part of MVConsist.
# Copyright (C) 2026 MVConsist contributors.
#
# MVConsist is free software; you can redistribute it and/or modify it
# under the terms of the MIT License; see LICENSE file for more details.

"""Sphinx configuration for MVConsist."""

from __future__ import print_function

import os

# -- General configuration ------------------------------------------------

# Do not warn on external images.
suppress_warnings = ["image.nonlocal_uri"]

extensions = [
    "sphinx.ext.autodoc",
    "sphinx.ext.coverage",
    "sphinx.ext.doctest",
    "sphinx.ext.intersphinx",
    "sphinx.ext.viewcode",
    "sphinx_click.ext",
]

# Add any paths that contain templates here, relative to this directory.
templates_path = ["_templates"]

source_suffix = ".rst"

# The master toctree document.
master_doc = "index"

# General information about the project.
project = "mvconsist"
copyright = "2026 MVConsist contributors"
author = "MVConsist contributors"

# Get the version string. Cannot be done with import!
g = {}
with open(os.path.join("..", "mvconsist", "version.py"), "rt") as fp:
    exec(fp.read(), g)
    version = g["__version__"]

# The full version, including alpha/beta/rc tags.
release = version

language = "en"

exclude_patterns = ["_build", "Thumbs.db", ".DS_Store"]

pygments_style = "sphinx"

todo_include_todos = False


# -- Options for HTML output ----------------------------------------------

html_theme = "alabaster"

html_theme_options = {
    "description": """<p>MVConsist generates multi-view consistent images
                      with a tiny latent diffusion model and measures how well
                      overlapping views agree.</p>""",
    "github_button": False,
    "show_powered_by": False,
    "nosidebar": True,
}

html_sidebars = {
    "**": [
        "about.html",
        "navigation.html",
        "relations.html",
        "searchbox.html",
    ]
}

htmlhelp_basename = "mvconsistdoc"


# -- Options for LaTeX output ---------------------------------------------

latex_documents = [
    (
        master_doc,
        "mvconsist.tex",
        "mvconsist Documentation",
        "MVConsist contributors",
        "manual",
    ),
]


# -- Options for manual page output ---------------------------------------

man_pages = [(master_doc, "mvconsist", "mvconsist Documentation", [author], 1)]
