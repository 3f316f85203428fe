#!/usr/bin/env python3
# -*- coding: utf-8 -*-
#
# unigap documentation build configuration file.
#
# This file is execfile()d with the current directory set to its
# containing dir.

import sys
import os

# make the package importable for autodoc without installing it
sys.path.insert(0, os.path.abspath('..'))

# -- General configuration ------------------------------------------------

extensions = [
    'sphinx.ext.autodoc',
    'sphinx.ext.viewcode',
]

templates_path = ['_templates']
source_suffix = '.rst'
master_doc = 'index'

project = 'unigap'
copyright = '2026, unigap developers'

# The short X.Y version and the full version.
version = '0.1'
release = '0.1.0'

exclude_patterns = ['_build']
pygments_style = 'sphinx'

# Pillow is optional; autodoc should not fail without it
autodoc_mock_imports = ['PIL']

# -- Options for HTML output ----------------------------------------------

html_theme = 'default'
html_static_path = ['_static']
htmlhelp_basename = 'unigapdoc'

# -- Options for LaTeX output ---------------------------------------------

latex_elements = {
}

latex_documents = [
  ('index', 'unigap.tex', 'unigap Documentation',
   'unigap developers', 'manual'),
]

# -- Options for manual page output ---------------------------------------

man_pages = [
    ('index', 'unigap', 'unigap Documentation',
     ['unigap developers'], 1)
]
