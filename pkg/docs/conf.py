#!/usr/bin/env python
# mypy: ignore-errors
# meanfield_psro documentation build configuration file
#
import os
import sys

sys.path.insert(0, os.path.abspath(".."))

from meanfield_psro import __version__  # noqa: E402

# -- General configuration ---------------------------------------------

extensions = [
    "sphinx.ext.autodoc",
    "sphinx.ext.napoleon",
    "sphinx.ext.mathjax",
    "sphinx_click",
]

templates_path = ["_templates"]
source_suffix = ".rst"
master_doc = "index"

project = "meanfield_psro"
copyright = "2024, meanfield_psro developers"
author = "meanfield_psro developers"

# The short X.Y version.
version = ".".join(__version__.split(".")[:2])
# The full version, including alpha/beta/rc tags.
release = __version__

language = "en"
exclude_patterns = ["_build", "Thumbs.db", ".DS_Store"]
pygments_style = "sphinx"
todo_include_todos = False

autodoc_typehints = "description"
autodoc_member_order = "bysource"


# -- Options for HTML output -------------------------------------------

html_theme = "sphinx_rtd_theme"
html_static_path = []
htmlhelp_basename = "meanfield_psrodoc"


# -- Options for manual page output ------------------------------------

man_pages = [
    (
        master_doc,
        "meanfield_psro",
        "meanfield_psro Documentation",
        [author],
        1,
    )
]
