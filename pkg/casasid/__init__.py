#!/usr/bin/env python
# -*- encoding: utf-8 -*-
"""Speaker identification under interference: CASA segregation, MFCC
features and a GMM -> CNN cascade"""

from . import base
from . import mixing
from .base import *
from .core import *
from .exceptions import *
from .dsp import *
from .casa import *
from .mfcc import *
from .gmm import *
from .cnn import *
from .cascade import *
from .evaluation import *
from .mixing import *

from .version import version as __version__
