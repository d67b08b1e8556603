#!/usr/bin/env python
# -*- encoding: utf-8 -*-
"""Interference mixing and synthetic speakers"""

from .background import *
from .colorednoise import *
from .synth import *
