#!/usr/bin/env python
# -*- encoding: utf-8 -*-
"""Exception classes for casasid

Parameter and data errors derive from `ValueError`, file errors from
`IOError`, so callers may catch either the specific class or the builtin.
"""

__all__ = [
    "CasaSidError",
    "ParamError",
    "ConfigError",
    "DataError",
    "EmptyFeatureError",
    "InputTooShortError",
    "EmptyError",
    "DegenerateError",
    "DegenerateSignalError",
    "ShapeError",
    "LabelError",
    "SchemaError",
    "FormatError",
    "UnsupportedError",
    "IoError",
    "DivergenceError",
    "CorruptModelError",
    "VersionError",
]


class CasaSidError(Exception):
    """The root casasid exception class"""


class ParamError(CasaSidError, ValueError):
    """A parameter or precondition was violated"""


class ConfigError(ParamError):
    """An invalid configuration (document, framing, flags)"""


class DataError(ParamError):
    """Not enough (or unusable) data to carry out an operation"""


class EmptyFeatureError(DataError):
    """A clip is too short to produce a single feature frame"""


class InputTooShortError(EmptyFeatureError):
    """A query clip is too short for identification"""


class EmptyError(DataError):
    """An empty collection where at least one item is required"""


class DegenerateError(DataError):
    """A statistic is undefined for the given input"""


class DegenerateSignalError(DataError):
    """A signal with zero energy where energy is required"""


class ShapeError(ParamError):
    """Array shapes or dimensions do not agree"""


class LabelError(ParamError, KeyError):
    """A label or class index is not known"""

    def __str__(self):
        # KeyError quotes its argument; keep the plain message
        return ValueError.__str__(self)


class SchemaError(ParamError):
    """A manifest record does not match the expected schema"""


class FormatError(CasaSidError, IOError):
    """Malformed audio file"""


class UnsupportedError(FormatError):
    """Audio encoding that is not 16-bit PCM"""


class IoError(CasaSidError, IOError):
    """A path could not be read or written"""


class DivergenceError(CasaSidError, ArithmeticError):
    """Training produced a non-finite loss"""


class CorruptModelError(CasaSidError, IOError):
    """A model bundle is incomplete or fails its hash check"""


class VersionError(CasaSidError):
    """A model bundle was written by an incompatible version"""
