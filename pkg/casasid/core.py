#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""Core audio functionality: clips, WAV I/O, resampling and manifests"""

import json
import logging
import os
from fractions import Fraction

import numpy as np
import scipy.signal
import soundfile as psf

from .exceptions import (
    FormatError,
    IoError,
    ParamError,
    SchemaError,
    UnsupportedError,
)

__all__ = [
    "AudioClip",
    "ManifestEntry",
    "read_wav",
    "write_wav",
    "resample",
    "load_manifest",
    "write_manifest",
    "EMOTIONS",
    "SPLITS",
]

logger = logging.getLogger(__name__)

#: Talking conditions known to the toolkit
EMOTIONS = (
    "neutral",
    "angry",
    "happy",
    "sad",
    "fear",
    "disgust",
    "loud",
    "soft",
    "slow",
    "fast",
    "lombard",
)

SPLITS = ("train", "test")

_MANIFEST_KEYS = ("path", "speaker_id", "emotion", "split")


class AudioClip(object):
    """A mono audio signal with its sampling rate.

    The sample buffer is read-only; transformations return new clips.

    Parameters
    ----------
    samples : array-like, shape=(n,)
        Real amplitudes, nominally in ``[-1, 1]``

    sample_rate : int > 0
        Sampling rate in Hz

    meta : dict, optional
        Free-form metadata (mixing gains, transformation history, ...)

    Raises
    ------
    ParamError
        If the clip is empty, contains non-finite values, or the rate
        is not positive.
    """

    __slots__ = ("_samples", "_sample_rate", "_meta")

    def __init__(self, samples, sample_rate, meta=None):
        y = np.array(samples, dtype=np.float64)
        if y.ndim != 1:
            raise ParamError("AudioClip samples must be one-dimensional")
        if y.size == 0:
            raise ParamError("AudioClip must be non-empty")
        if not np.all(np.isfinite(y)):
            raise ParamError("AudioClip samples must be finite")
        if int(sample_rate) != sample_rate or sample_rate <= 0:
            raise ParamError(
                "sample_rate must be a positive integer, not {}".format(sample_rate)
            )
        y.setflags(write=False)
        self._samples = y
        self._sample_rate = int(sample_rate)
        self._meta = dict(meta or {})

    @property
    def samples(self):
        return self._samples

    @property
    def sample_rate(self):
        return self._sample_rate

    @property
    def meta(self):
        return dict(self._meta)

    @property
    def duration(self):
        """Duration in seconds"""
        return len(self._samples) / float(self._sample_rate)

    def rms(self):
        """Root-mean-square amplitude"""
        return float(np.sqrt(np.mean(self._samples ** 2)))

    def with_samples(self, samples, **meta):
        """A new clip at the same rate, keeping (and updating) metadata"""
        m = self.meta
        m.update(meta)
        return AudioClip(samples, self._sample_rate, meta=m)

    def with_meta(self, **meta):
        """A new clip with the same samples and updated metadata"""
        return self.with_samples(self._samples, **meta)

    def __len__(self):
        return len(self._samples)

    def __eq__(self, other):
        if not isinstance(other, AudioClip):
            return NotImplemented
        return self._sample_rate == other._sample_rate and np.array_equal(
            self._samples, other._samples
        )

    __hash__ = None

    def __repr__(self):
        return "AudioClip(n_samples={}, sample_rate={})".format(
            len(self._samples), self._sample_rate
        )


class ManifestEntry(object):
    """One labelled utterance of a dataset

    Attributes
    ----------
    path : str
        Path to a WAV file
    speaker_id : str
    emotion : str
        Talking condition label
    split : str
        One of ``train`` or ``test``
    """

    __slots__ = ("path", "speaker_id", "emotion", "split")

    def __init__(self, path, speaker_id, emotion, split):
        if not isinstance(path, str) or not path:
            raise SchemaError("path must be a non-empty string")
        if not isinstance(speaker_id, str) or not speaker_id:
            raise SchemaError("speaker_id must be a non-empty string")
        if not isinstance(emotion, str) or not emotion:
            raise SchemaError("emotion must be a non-empty string")
        if split not in SPLITS:
            raise SchemaError(
                "split must be one of {}, not {!r}".format(SPLITS, split)
            )
        self.path = path
        self.speaker_id = speaker_id
        self.emotion = emotion
        self.split = split

    def to_dict(self):
        return {k: getattr(self, k) for k in _MANIFEST_KEYS}

    def __eq__(self, other):
        if not isinstance(other, ManifestEntry):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    __hash__ = None

    def __repr__(self):
        return "ManifestEntry({})".format(
            ", ".join("{}={!r}".format(k, getattr(self, k)) for k in _MANIFEST_KEYS)
        )


def read_wav(path):
    """Load a 16-bit PCM WAV file.

    Multi-channel files are averaged to mono.

    Parameters
    ----------
    path : str or path-like
        Path to the input file

    Returns
    -------
    clip : AudioClip
        Samples scaled to ``[-1, 1]`` by dividing by 32768

    Raises
    ------
    IoError
        If the file does not exist or cannot be read
    FormatError
        If the header is malformed or the data chunk is empty
    UnsupportedError
        If the file is not 16-bit PCM WAV
    """

    path = str(path)
    if not os.path.isfile(path):
        raise IoError("file not found: {}".format(path))

    try:
        info = psf.info(path)
    except RuntimeError as exc:
        raise FormatError("malformed audio file {}: {}".format(path, exc))

    if info.format != "WAV" or info.subtype != "PCM_16":
        raise UnsupportedError(
            "{}: unsupported encoding {}/{} (need WAV/PCM_16)".format(
                path, info.format, info.subtype
            )
        )

    try:
        data, sr = psf.read(path, dtype="int16", always_2d=True)
    except RuntimeError as exc:
        raise FormatError("malformed audio file {}: {}".format(path, exc))

    if data.shape[0] == 0:
        raise FormatError("{}: empty data chunk".format(path))

    y = data.astype(np.float64).mean(axis=1) / 32768.0

    return AudioClip(y, sr, meta=dict(path=path))


def write_wav(clip, path):
    """Store a clip as a 16-bit PCM mono WAV file.

    Samples are clamped to ``[-1, 1]`` and quantized by rounding.

    Parameters
    ----------
    clip : AudioClip
    path : str or path-like

    Raises
    ------
    IoError
        If the path cannot be written
    """

    y = np.clip(clip.samples, -1.0, 1.0)
    pcm = np.clip(np.round(y * 32768.0), -32768, 32767).astype(np.int16)

    try:
        psf.write(str(path), pcm, clip.sample_rate, subtype="PCM_16", format="WAV")
    except (RuntimeError, OSError) as exc:
        raise IoError("cannot write {}: {}".format(path, exc))


def resample(clip, target_rate):
    """Change the sampling rate of a clip.

    Band-limited polyphase (Kaiser-windowed sinc) interpolation with the
    anti-aliasing cutoff at half the lower of the two rates.

    Parameters
    ----------
    clip : AudioClip
    target_rate : int > 0

    Returns
    -------
    clip_out : AudioClip
        The resampled clip; identical to `clip` when the rates agree
    """

    if int(target_rate) != target_rate or target_rate <= 0:
        raise ParamError("target_rate must be a positive integer")
    target_rate = int(target_rate)

    if target_rate == clip.sample_rate:
        return clip

    ratio = Fraction(target_rate, clip.sample_rate)
    y = scipy.signal.resample_poly(
        clip.samples, ratio.numerator, ratio.denominator, padtype="line"
    )

    return AudioClip(y, target_rate, meta=clip.meta)


def load_manifest(path, emotions=None):
    """Load a JSON-lines dataset manifest.

    Each non-blank line is an object with exactly the keys ``path``,
    ``speaker_id``, ``emotion`` and ``split``.  Relative audio paths are
    resolved against the manifest's directory.

    Parameters
    ----------
    path : str
        Manifest file

    emotions : iterable of str or None
        If given, the closed set of admissible emotion labels

    Returns
    -------
    entries : list of ManifestEntry

    Raises
    ------
    SchemaError
        On a missing key, an invalid value, or a duplicated path.  The
        message names the offending line number.
    IoError
        If the manifest cannot be read
    """

    path = str(path)
    root = os.path.dirname(os.path.abspath(path))
    allowed = set(emotions) if emotions is not None else None

    try:
        with open(path, "r", encoding="utf-8") as fdesc:
            lines = fdesc.readlines()
    except OSError as exc:
        raise IoError("cannot read manifest {}: {}".format(path, exc))

    entries = []
    seen = set()
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except ValueError as exc:
            raise SchemaError("line {}: invalid JSON ({})".format(lineno, exc))

        if not isinstance(record, dict):
            raise SchemaError("line {}: expected a JSON object".format(lineno))

        for key in _MANIFEST_KEYS:
            if key not in record:
                raise SchemaError("line {}: missing key {!r}".format(lineno, key))

        try:
            entry = ManifestEntry(**{k: record[k] for k in _MANIFEST_KEYS})
        except SchemaError as exc:
            raise SchemaError("line {}: {}".format(lineno, exc))

        if allowed is not None and entry.emotion not in allowed:
            raise SchemaError(
                "line {}: unknown emotion {!r}".format(lineno, entry.emotion)
            )

        if not os.path.isabs(entry.path):
            entry.path = os.path.normpath(os.path.join(root, entry.path))

        if entry.path in seen:
            raise SchemaError(
                "line {}: duplicate path {!r}".format(lineno, record["path"])
            )
        seen.add(entry.path)
        entries.append(entry)

    logger.debug("Loaded %d manifest entries from %s", len(entries), path)
    return entries


def write_manifest(entries, path, relative_to=None):
    """Write manifest entries as JSON-lines.

    Parameters
    ----------
    entries : iterable of ManifestEntry
    path : str
    relative_to : str or None
        If given, audio paths are written relative to this directory
    """

    with open(str(path), "w", encoding="utf-8") as fdesc:
        for entry in entries:
            record = entry.to_dict()
            if relative_to is not None:
                record["path"] = os.path.relpath(record["path"], relative_to)
            fdesc.write(json.dumps(record, sort_keys=True) + "\n")
