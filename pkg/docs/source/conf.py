# Sphinx configuration for the convexfm documentation.

project = 'convexfm'
copyright = '2026, convexfm developers'
author = 'convexfm developers'
release = '0.1.0a1'

extensions = ['sphinx.ext.autodoc']

templates_path = ['_templates']
exclude_patterns = []

html_theme = 'alabaster'
html_static_path = ['_static']
