#!/usr/bin/env python
# -*- encoding: utf-8 -*-
"""Additive colored noise interference"""

import numpy as np

from ..base import BaseTransformer, _get_rng
from ..core import AudioClip
from ..exceptions import ParamError
from .background import MixSpec, mix_noise

__all__ = ["NOISE_TYPES", "noise_generator", "ColoredNoiseMix"]

NOISE_TYPES = ["white", "pink", "brownian"]


def noise_generator(n_samples, color, rng):
    """Generate noise of a given color.

    Parameters
    ----------
    n_samples : int > 0
        Length of the noise fragment to be generated

    color : str
        One of `NOISE_TYPES`

    rng : None, int or np.random.RandomState
        The random state object (or seed)

    Returns
    -------
    y : np.ndarray [shape=(n_samples,)]
        A fragment of noise with a power spectrum falling as
        ``f**0`` (white), ``f**-1`` (pink) or ``f**-2`` (brownian)
    """

    if color not in NOISE_TYPES:
        raise ParamError(
            "Incorrect color type {!r}; must be one of {}".format(color, NOISE_TYPES)
        )

    rng = _get_rng(rng)
    noise_white = rng.randn(n_samples)

    if color == "white":
        return noise_white

    noise_fft = np.fft.rfft(noise_white)

    values = np.linspace(1, n_samples * 0.5 + 1, n_samples // 2 + 1)

    if color == "pink":
        colored_filter = values ** (-0.5)
    else:
        colored_filter = values ** (-1)

    return np.fft.irfft(noise_fft * colored_filter, n=n_samples)


class ColoredNoiseMix(BaseTransformer):
    """Additive colored noise at fixed target-to-noise energy ratios

    Attributes
    ----------
    n_samples : int > 0
        Number of noise draws per color

    color : str or list of str
        Noise colors, from `NOISE_TYPES`

    ratios : float or list of float > 0
        Target-to-noise energy ratios

    rng : None, int, or np.random.RandomState
        The random number generator state.

    Examples
    --------
    >>> mixer = ColoredNoiseMix(color='white', ratios=[2, 3], rng=0)
    >>> noisy_2to1, noisy_3to1 = mixer.transform(clip)
    """

    def __init__(self, n_samples=1, color="white", ratios=(2.0,), rng=None):

        if n_samples <= 0:
            raise ParamError("n_samples must be strictly positive")

        if isinstance(color, str):
            color = [color]

        for name in color:
            if name not in NOISE_TYPES:
                raise ParamError(
                    "Incorrect color type {!r}; must be one of {}".format(
                        name, NOISE_TYPES
                    )
                )

        ratios = np.atleast_1d(ratios).astype(float).flatten()
        if np.any(ratios <= 0):
            raise ParamError("ratios must be strictly positive")

        BaseTransformer.__init__(self)

        self.n_samples = n_samples
        self.color = list(color)
        self.ratios = ratios.tolist()
        self.rng = rng
        self._rng = _get_rng(rng)

    def states(self, clip):
        for _ in range(self.n_samples):
            for name in self.color:
                seed = int(self._rng.randint(0, 2 ** 31 - 1))
                for ratio in self.ratios:
                    yield dict(color=name, ratio=ratio, seed=seed)

    def audio(self, clip, state):
        noise = noise_generator(len(clip), state["color"], state["seed"])
        return mix_noise(
            clip,
            AudioClip(noise, clip.sample_rate),
            MixSpec(ratio=state["ratio"], seed=state["seed"]),
        )
