# -*- coding: utf-8 -*-
#
# This file is part of MVConsist.
# Copyright (C) 2026 MVConsist contributors.
#
# MVConsist is free software; you can redistribute it and/or modify it
# under the terms of the MIT License; see LICENSE file for more details.

"""MVConsist."""

from __future__ import absolute_import, print_function

import os
import re

from setuptools import find_packages, setup

readme = open("README.rst").read()
history = open("CHANGES.rst").read()

tests_require = [
    "mock>=3.0.5",
    "pytest>=6.2",
    "pytest-cov>=2.12",
    "pydocstyle>=6.1",
    "black>=22.3",
    "flake8>=4.0",
]

extras_require = {
    "debug": [
        "ipdb",
    ],
    "docs": [
        "Sphinx>=1.5.1",
        "sphinx-rtd-theme>=0.1.9",
        "sphinx-click>=1.0.4",
    ],
    "tests": tests_require,
}

extras_require["all"] = []
for key, reqs in extras_require.items():
    if ":" == key[0]:
        continue
    extras_require["all"].extend(reqs)

setup_requires = [
    "pytest-runner>=2.7",
]

install_requires = [
    "click>=8.0,<9.0",
    "marshmallow>=3.13,<4.0",
    "numpy>=1.21",
    "Pillow>=9.0",
    "PyYAML>=5.4",
    "tablib>=0.12.1",
    "torch>=1.12",
    "tqdm>=4.62",
]

packages = find_packages(exclude=["tests", "tests.*"])


# Get the version string. Cannot be done with import!
with open(os.path.join("mvconsist", "version.py"), "rt") as f:
    version = re.search(r'__version__\s*=\s*"(?P<version>.*)"\n', f.read()).group(
        "version"
    )

setup(
    name="mvconsist",
    version=version,
    description=__doc__,
    long_description=readme + "\n\n" + history,
    author="MVConsist contributors",
    packages=packages,
    zip_safe=False,
    entry_points={
        "console_scripts": [
            "mvconsist = mvconsist.cli:main",
        ],
    },
    include_package_data=True,
    extras_require=extras_require,
    install_requires=install_requires,
    setup_requires=setup_requires,
    tests_require=tests_require,
    python_requires=">=3.8",
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Environment :: Console",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.8",
        "Programming Language :: Python :: Implementation :: CPython",
        "Programming Language :: Python",
        "Topic :: Scientific/Engineering :: Artificial Intelligence",
        "Topic :: Scientific/Engineering :: Image Processing",
    ],
)
