# -*- coding: utf-8 -*-
#
# casasid documentation build configuration file.
#
# This file is execfile()d with the current directory set to its
# containing dir.

import os
import runpy
import sys
from glob import glob
from unittest import mock

sys.path.insert(0, os.path.abspath('../'))

# -- General configuration ------------------------------------------------

extensions = [
    'sphinx.ext.autodoc',
    'sphinx.ext.autosummary',
    'sphinx.ext.intersphinx',
    'sphinx.ext.viewcode',
    'numpydoc',
]

autosummary_generate = glob('*.rst')

templates_path = ['_templates']
source_suffix = '.rst'
master_doc = 'index'

project = u'casasid'
copyright = u'2026, casasid developers'

# Mock the dependencies
MOCK_MODULES = ['librosa',
                'librosa.util',
                'jsonpickle',
                'soundfile',
                'joblib',
                'numpy',
                'numpy.random',
                'pandas',
                'scipy',
                'scipy.fft',
                'scipy.ndimage',
                'scipy.signal',
                'scipy.special',
                'scipy.stats',
                'sklearn',
                'sklearn.cluster',
                'sklearn.metrics']

sys.modules.update((mod_name, mock.Mock()) for mod_name in MOCK_MODULES)

# The short X.Y version and the full version
_version = runpy.run_path('../casasid/version.py')
version = _version['short_version']
release = _version['version']

exclude_patterns = ['_build']
pygments_style = 'sphinx'

intersphinx_mapping = {
    'python': ('https://docs.python.org/3', None),
    'numpy': ('https://numpy.org/doc/stable/', None),
    'librosa': ('https://librosa.org/doc/latest/', None),
}

# -- Options for HTML output ----------------------------------------------

html_theme = 'default'
htmlhelp_basename = 'casasiddoc'

# -- Options for LaTeX output ---------------------------------------------

latex_documents = [
  ('index', 'casasid.tex', u'casasid Documentation',
   u'casasid developers', 'manual'),
]

# -- Options for manual page output ---------------------------------------

man_pages = [
    ('index', 'casasid', u'casasid Documentation',
     [u'casasid developers'], 1)
]
