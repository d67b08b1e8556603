#!/usr/bin/env python
# -*- encoding: utf-8 -*-
"""Target/interference mixing at fixed energy ratios"""

import logging
import os

import numpy as np

from ..base import BaseTransformer, BaseConfig, _get_rng
from ..core import read_wav, resample
from ..exceptions import DegenerateSignalError, IoError, ParamError

__all__ = ["MixSpec", "mix_noise", "fit_length", "InterferenceMix"]

logger = logging.getLogger(__name__)


class MixSpec(BaseConfig):
    """Mixing parameters

    Attributes
    ----------
    ratio : float > 0
        Target-to-interference energy (mean-square) ratio; 2.0 means "2:1",
        i.e. about +3 dB SNR.

    seed : int
        Seed for the circular offset at which the interference is aligned
        with the target.
    """

    def __init__(self, ratio=2.0, seed=0):
        if not ratio > 0:
            raise ParamError("ratio must be strictly positive")
        self.ratio = float(ratio)
        self.seed = int(seed)


def fit_length(y, n_samples, offset=0):
    """Tile or truncate a signal to exactly `n_samples`, starting at `offset`.

    Parameters
    ----------
    y : np.ndarray
        Source signal (non-empty)

    n_samples : int > 0
        Output length

    offset : int >= 0
        Circular starting index into `y`

    Returns
    -------
    y_out : np.ndarray [shape=(n_samples,)]
    """

    idx = (int(offset) + np.arange(n_samples)) % len(y)
    return np.asarray(y)[idx]


def mix_noise(target, interference, spec):
    """Add interference to a target clip at a fixed energy ratio.

    The interference is tiled or truncated to the target length from a
    seeded circular offset, then scaled by a gain `g` so that
    ``mean(target**2) / mean((g * interference)**2) == spec.ratio``.

    If the mixture peak exceeds 1, the whole mixture is rescaled uniformly;
    the unrescaled stems are kept in the output metadata so the component
    ratio can always be measured.

    Parameters
    ----------
    target : AudioClip
    interference : AudioClip
        Must share the target's sampling rate

    spec : MixSpec

    Returns
    -------
    mixture : AudioClip
        With metadata ``mix_ratio``, ``mix_gain``, ``mix_offset``,
        ``mix_rescale``, ``target_stem`` and ``interference_stem``.

    Raises
    ------
    ParamError
        If the sampling rates differ
    DegenerateSignalError
        If either signal has zero energy
    """

    if target.sample_rate != interference.sample_rate:
        raise ParamError(
            "sample rates differ: {} != {}".format(
                target.sample_rate, interference.sample_rate
            )
        )

    offset = _get_rng(spec.seed).randint(0, len(interference))
    noise = fit_length(interference.samples, len(target), offset)

    e_target = np.mean(target.samples ** 2)
    e_noise = np.mean(noise ** 2)

    if e_target <= 0:
        raise DegenerateSignalError("target signal is silent")
    if e_noise <= 0:
        raise DegenerateSignalError("interference signal is silent")

    gain = np.sqrt(e_target / (spec.ratio * e_noise))
    noise_stem = gain * noise

    y = target.samples + noise_stem

    rescale = 1.0
    peak = np.max(np.abs(y))
    if peak > 1.0:
        rescale = 1.0 / peak
        y = y * rescale
        logger.info("Mixture peak %.3f > 1, rescaled by %.4f", peak, rescale)

    return target.with_samples(
        y,
        mix_ratio=spec.ratio,
        mix_gain=float(gain),
        mix_offset=int(offset),
        mix_rescale=float(rescale),
        target_stem=np.array(target.samples),
        interference_stem=noise_stem,
    )


def load_interference(filename, sample_rate):
    """Load an interference file at a given sampling rate.

    Parameters
    ----------
    filename : str
        Path to a 16-bit PCM WAV file

    sample_rate : int > 0
        The target sampling rate

    Returns
    -------
    clip : AudioClip
    """

    return resample(read_wav(filename), sample_rate)


class InterferenceMix(BaseTransformer):
    """Co-channel interference mixing.

    For each interference file, `n_samples` alignments are drawn at random
    and mixed with the input at every requested ratio.

    Attributes
    ----------
    files : str or list of str
        Path to audio file(s) on disk containing interference signals

    ratios : float or list of float > 0
        Target-to-interference energy ratios, e.g. ``[2.0, 3.0]``

    n_samples : int > 0
        The number of alignments to draw per file

    rng : None, int, or np.random.RandomState
        The random number generator object or seed.

    Examples
    --------
    >>> mixer = InterferenceMix(files=['other_talker.wav'], ratios=[2, 3], rng=0)
    >>> noisy = list(mixer.transform(clip))
    """

    def __init__(self, files=None, ratios=(2.0, 3.0), n_samples=1, rng=None):
        if n_samples <= 0:
            raise ParamError("n_samples must be strictly positive")

        if isinstance(files, str):
            files = [files]

        if not files:
            raise ParamError("at least one interference file is required")

        for fname in files:
            if not os.path.exists(fname):
                raise IoError("file not found: {}".format(fname))

        ratios = np.atleast_1d(ratios).astype(float).flatten()
        if np.any(ratios <= 0):
            raise ParamError("ratios must be strictly positive")

        BaseTransformer.__init__(self)

        self.files = list(files)
        self.ratios = ratios.tolist()
        self.n_samples = n_samples
        self.rng = rng
        self._rng = _get_rng(rng)

    def states(self, clip):
        for fname in self.files:
            for _ in range(self.n_samples):
                seed = int(self._rng.randint(0, 2 ** 31 - 1))
                for ratio in self.ratios:
                    yield dict(filename=fname, ratio=ratio, seed=seed)

    def audio(self, clip, state):
        noise = load_interference(state["filename"], clip.sample_rate)
        return mix_noise(clip, noise, MixSpec(ratio=state["ratio"], seed=state["seed"]))
