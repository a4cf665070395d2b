#!/usr/bin/env python3
# -*- coding: utf-8 -*-
# mckgpy documentation build configuration file.

import os
import sys

script_path = os.path.dirname(os.path.realpath(__file__))

# autodoc imports the package from the repository checkout
sys.path.insert(0, os.path.abspath(os.path.join(script_path, '..', '..')))

import mckgpy

# -- General configuration ------------------------------------------------

# mathjax renders the :math: roles in the geometry docstrings
extensions = ['sphinx.ext.autodoc', 'sphinx.ext.mathjax']

source_suffix = '.rst'

master_doc = 'index'

project = 'mckgpy'
copyright = '2024, mckgpy developers'
author = 'mckgpy developers'

version = mckgpy.__version__
release = mckgpy.__version__

exclude_patterns = []

pygments_style = 'sphinx'

autodoc_member_order = 'bysource'

# -- Options for HTML output ----------------------------------------------

html_theme = 'sphinx_rtd_theme'

htmlhelp_basename = 'mckgpydoc'

# -- Options for manual page output ---------------------------------------

man_pages = [
    (master_doc, 'mckgpy', 'mckgpy Documentation', [author], 1)
]
