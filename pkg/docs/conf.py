# Sphinx configuration for the vnhodge documentation.
# https://www.sphinx-doc.org/en/master/usage/configuration.html

import os
import sys

sys.path.insert(0, os.path.abspath(".."))  # isort:skip

import vnhodge  # noqa: E402

project = "vnhodge"
copyright = "2026, vnhodge developers"
author = "vnhodge developers"
version = vnhodge.__version__
release = version

extensions = [
    "sphinx.ext.autodoc",
    "sphinx.ext.autosummary",
    "sphinx.ext.napoleon",
    "sphinx.ext.viewcode",
    "sphinx.ext.mathjax",
    "sphinx_design",
    "myst_parser",
]

autosummary_generate = True
napoleon_numpy_docstring = True
napoleon_google_docstring = False
myst_enable_extensions = ["deflist", "colon_fence"]

templates_path = ["_templates"]
exclude_patterns = ["_build", "build", "Thumbs.db", ".DS_Store"]

html_theme = "pydata_sphinx_theme"
html_theme_options = {
    "show_toc_level": 1,
    "show_nav_level": 2,
    "navbar_align": "left",
    "use_edit_page_button": False,
    "pygments_light_style": "tango",
    "pygments_dark_style": "one-dark",
}
