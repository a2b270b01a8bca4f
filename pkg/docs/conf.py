# Sphinx configuration for the thermaltap docs

import os
import sys

sys.path.insert(0, os.path.abspath('..'))

project = 'thermaltap'
copyright = '2026, thermaltap developers'
author = 'thermaltap developers'

extensions = [
    'sphinx_rtd_theme',
    'sphinx.ext.autosummary',
    'sphinx.ext.autodoc',
    'sphinx.ext.napoleon',
    'sphinx_autodoc_typehints',
]

autosummary_generate = True
autodoc_default_options = {'exclude-members': '__init__'}
napoleon_google_docstring = False

exclude_patterns = ['_build']
html_theme = 'sphinx_rtd_theme'
