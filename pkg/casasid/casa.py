#!/usr/bin/env python
# -*- encoding: utf-8 -*-
"""Modulation-domain CASA front end

The chain runs::

    stft -> envelope_detect -> modulation_transform -> detect_onsets_offsets
         -> estimate_pitch -> build_ideal_binary_mask -> apply_binary_mask
         -> estimate_band_energies -> build_frequency_mask -> istft_overlap_add

`segregate` runs all of it and returns the intermediate products in a
`CasaDiagnostics` object.
"""

import logging

import numpy as np
import scipy.ndimage

from .base import BaseConfig
from .dsp import (
    WINDOWS,
    FrameParams,
    estimate_pitch,
    istft_overlap_add,
    next_pow2,
    stft,
)
from .exceptions import ConfigError, ParamError, ShapeError

__all__ = [
    "CasaConfig",
    "EnvelopeMatrix",
    "ModulationSpectrum",
    "OnsetOffsetMap",
    "BinaryMask",
    "BandEnergies",
    "FrequencyMask",
    "CasaDiagnostics",
    "envelope_detect",
    "modulation_transform",
    "detect_onsets_offsets",
    "build_ideal_binary_mask",
    "apply_binary_mask",
    "estimate_band_energies",
    "build_frequency_mask",
    "apply_frequency_mask",
    "segregate",
]

logger = logging.getLogger(__name__)


class CasaConfig(BaseConfig):
    """Parameters of the segregation chain

    Attributes
    ----------
    frame_ms, hop_ms : float > 0
        Analysis frame and hop durations

    window : str
        ``hamming`` or ``rectangular``

    fft_size : int or None
        DFT length `N`; next power of two above the frame length if None

    n_mod : int or None
        Modulation DFT length `I`; next power of two above the frame count
        if None

    rho_min, rho_max : int
        Bin offsets around each pitch harmonic kept by the binary mask

    smoothing_radius : int >= 0
        Moving-average radius over modulation bins

    threshold_k : float
        Onset/offset threshold, in standard deviations of the derivative

    pitch_band : (float, float)
        Pitch search range in Hz

    voicing_threshold : float
        Minimum normalized autocorrelation for a voiced frame

    n_segments : int > 0 or None
        Number of highest-energy segments averaged per channel; None keeps
        every detected segment

    harmonics : bool
        Extend the binary mask to every pitch harmonic below Nyquist
    """

    def __init__(
        self,
        frame_ms=30.0,
        hop_ms=5.0,
        window="hamming",
        fft_size=None,
        n_mod=None,
        rho_min=-10,
        rho_max=10,
        smoothing_radius=2,
        threshold_k=1.0,
        pitch_band=(50.0, 400.0),
        voicing_threshold=0.45,
        n_segments=2,
        harmonics=True,
    ):
        if window not in WINDOWS:
            raise ParamError("window must be one of {}".format(sorted(WINDOWS)))
        if frame_ms <= 0 or hop_ms <= 0:
            raise ParamError("frame_ms and hop_ms must be strictly positive")
        if int(rho_min) > int(rho_max):
            raise ParamError("rho_min must not exceed rho_max")
        if smoothing_radius < 0:
            raise ParamError("smoothing_radius must be non-negative")
        if n_mod is not None and n_mod < 1:
            raise ParamError("n_mod must be positive")
        if n_segments is not None and n_segments < 1:
            raise ParamError("n_segments must be positive or None")
        if len(pitch_band) != 2 or not 0 < pitch_band[0] < pitch_band[1]:
            raise ParamError("pitch_band must be an increasing pair of frequencies")

        self.frame_ms = float(frame_ms)
        self.hop_ms = float(hop_ms)
        self.window = window
        self.fft_size = fft_size
        self.n_mod = n_mod
        self.rho_min = int(rho_min)
        self.rho_max = int(rho_max)
        self.smoothing_radius = int(smoothing_radius)
        self.threshold_k = float(threshold_k)
        self.pitch_band = tuple(float(f) for f in pitch_band)
        self.voicing_threshold = float(voicing_threshold)
        self.n_segments = n_segments
        self.harmonics = bool(harmonics)

    def frame_params(self, sample_rate):
        """Framing at a given sampling rate"""
        return FrameParams.from_ms(
            sample_rate,
            self.frame_ms,
            self.hop_ms,
            window=self.window,
            fft_size=self.fft_size,
        )

    @property
    def rho_range(self):
        return (self.rho_min, self.rho_max)


class EnvelopeMatrix(object):
    """Sub-band magnitudes ``M[m, k]``"""

    __slots__ = ("values", "params")

    def __init__(self, values, params):
        values = np.asarray(values, dtype=np.float64)
        if values.ndim != 2:
            raise ShapeError("envelope must be a matrix")
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise ParamError("envelope entries must be finite and non-negative")
        self.values = values
        self.params = params

    @property
    def n_frames(self):
        return self.values.shape[0]


class ModulationSpectrum(object):
    """Per-channel DFT of the envelope over frames, ``X[k, i]``"""

    __slots__ = ("values", "n_mod")

    def __init__(self, values):
        self.values = np.asarray(values, dtype=np.complex128)
        self.n_mod = self.values.shape[1]

    @property
    def n_channels(self):
        return self.values.shape[0]

    def power(self):
        return np.abs(self.values) ** 2


class OnsetOffsetMap(object):
    """Per channel, the sorted list of ``(onset, offset)`` modulation-bin pairs"""

    __slots__ = ("pairs", "n_mod")

    def __init__(self, pairs, n_mod):
        self.pairs = [list(p) for p in pairs]
        self.n_mod = int(n_mod)

    @property
    def n_channels(self):
        return len(self.pairs)

    def is_empty(self):
        return not any(self.pairs)

    def to_dict(self):
        return dict(n_mod=self.n_mod, pairs=[[list(p) for p in ch] for ch in self.pairs])


class BinaryMask(object):
    """Boolean time-frequency mask ``[m, k]``"""

    __slots__ = ("bits",)

    def __init__(self, bits):
        self.bits = np.asarray(bits, dtype=bool)
        if self.bits.ndim != 2:
            raise ShapeError("mask must be a matrix")

    @property
    def shape(self):
        return self.bits.shape

    def complement(self):
        return BinaryMask(~self.bits)


class BandEnergies(object):
    """Per-channel target and interference modulation energies"""

    __slots__ = ("target", "interference")

    def __init__(self, target, interference):
        target = np.asarray(target, dtype=np.float64)
        interference = np.asarray(interference, dtype=np.float64)
        if target.shape != interference.shape or target.ndim != 1:
            raise ShapeError("target and interference energies must be 1-d, equal length")
        for values in (target, interference):
            if np.any(values < 0) or not np.all(np.isfinite(values)):
                raise ParamError("band energies must be finite and non-negative")
        self.target = target
        self.interference = interference

    def to_dict(self):
        return dict(target=self.target.tolist(), interference=self.interference.tolist())


class FrequencyMask(object):
    """Per-channel real gains in ``[0, 1]``, broadcast over frames"""

    __slots__ = ("gains",)

    def __init__(self, gains):
        gains = np.asarray(gains, dtype=np.float64)
        if gains.ndim != 1:
            raise ShapeError("frequency mask must be a vector")
        if np.any(gains < 0) or np.any(gains > 1) or not np.all(np.isfinite(gains)):
            raise ParamError("frequency mask gains must lie in [0, 1]")
        self.gains = gains

    def to_dict(self):
        return dict(gains=self.gains.tolist())


class CasaDiagnostics(object):
    """Intermediate products of `segregate`

    Attributes
    ----------
    spectrogram : Spectrogram
        STFT of the (end-padded) mixture
    envelope : EnvelopeMatrix
    modulation : ModulationSpectrum
    onsets : OnsetOffsetMap
        Segments of the mixture; not used by the mask
    pitch : PitchTrack
    ibm : BinaryMask
    energies : BandEnergies
    fmask : FrequencyMask
    passthrough : bool
        True if no frame was voiced and the mask fell back to all-ones
    """

    def __init__(
        self,
        spectrogram,
        envelope,
        modulation,
        onsets,
        pitch,
        ibm,
        energies,
        fmask,
        passthrough,
    ):
        self.spectrogram = spectrogram
        self.envelope = envelope
        self.modulation = modulation
        self.onsets = onsets
        self.pitch = pitch
        self.ibm = ibm
        self.energies = energies
        self.fmask = fmask
        self.passthrough = bool(passthrough)


def envelope_detect(spec):
    """Envelope (incoherent) detection: ``M[m, k] = |X[m, k]|``

    Parameters
    ----------
    spec : Spectrogram

    Returns
    -------
    env : EnvelopeMatrix
    """
    return EnvelopeMatrix(np.abs(spec.bins), spec.params)


def modulation_transform(env, n_mod):
    """Discrete short-time modulation transform.

    For each channel `k`, the `n_mod`-point DFT of ``M[., k]`` over the
    frame index (zero-padded).

    Parameters
    ----------
    env : EnvelopeMatrix
    n_mod : int >= env.n_frames

    Returns
    -------
    mod : ModulationSpectrum
        ``values.shape == (n_channels, n_mod)``
    """

    if n_mod < 1:
        raise ParamError("modulation DFT length must be positive, not {}".format(n_mod))
    if n_mod < env.n_frames:
        raise ParamError(
            "modulation DFT length {} shorter than {} frames".format(n_mod, env.n_frames)
        )

    return ModulationSpectrum(np.fft.fft(env.values, n=int(n_mod), axis=0).T)


def _crossings(deriv, theta):
    """Onset and offset indices of one channel's derivative"""

    above = deriv > theta
    below = deriv < -theta

    onsets = np.flatnonzero(above & ~np.concatenate([[False], above[:-1]]))
    offsets = np.flatnonzero(below & ~np.concatenate([below[1:], [False]]))
    return onsets, offsets


def _pair(onsets, offsets, last):
    pairs = []
    j = 0
    i = 0
    while i < len(onsets):
        on = onsets[i]
        while j < len(offsets) and offsets[j] <= on:
            j += 1
        if j == len(offsets):
            if on < last:
                pairs.append((int(on), int(last)))
            break
        off = offsets[j]
        pairs.append((int(on), int(off)))
        # onsets inside this segment are absorbed
        while i < len(onsets) and onsets[i] <= off:
            i += 1
    return pairs


def detect_onsets_offsets(mod, smoothing_radius=2, threshold_k=1.0):
    """Find rises and falls of the smoothed modulation magnitude.

    Per channel, ``|X[k, .]|`` is smoothed by a moving average of width
    ``2 * smoothing_radius + 1`` and differentiated along the modulation
    axis.  With ``theta = mean + threshold_k * std`` of the derivative,
    onsets are upward crossings of ``theta`` and offsets are the ends of
    the regions where the derivative is below ``-theta``.

    Parameters
    ----------
    mod : ModulationSpectrum
    smoothing_radius : int >= 0
    threshold_k : float

    Returns
    -------
    onsets : OnsetOffsetMap
    """

    if smoothing_radius < 0:
        raise ParamError("smoothing_radius must be non-negative")

    mag = np.abs(mod.values)
    n_channels, n_mod = mag.shape

    if n_mod < 2:
        return OnsetOffsetMap([[] for _ in range(n_channels)], n_mod)

    if smoothing_radius > 0:
        mag = scipy.ndimage.uniform_filter1d(
            mag, size=2 * smoothing_radius + 1, axis=1, mode="nearest"
        )

    deriv = np.gradient(mag, axis=1)

    pairs = []
    for k in range(n_channels):
        d = deriv[k]
        theta = np.mean(d) + threshold_k * np.std(d)
        if not theta > 1e-12 * max(np.max(mag[k]), 1e-300):
            pairs.append([])
            continue
        onsets, offsets = _crossings(d, theta)
        pairs.append(_pair(onsets, offsets, n_mod - 1))

    return OnsetOffsetMap(pairs, n_mod)


def build_ideal_binary_mask(spec, pitch, rho_range=(-10, 10), harmonics=True):
    """Pitch-based ideal binary mask.

    For every voiced frame with pitch ``f_d``, the bins nearest to
    ``h * f_d / delta - rho`` are set, for each harmonic ``h * f_d`` below
    Nyquist and each integer ``rho`` in `rho_range`
    (``delta = sample_rate / fft_size``).  Unvoiced frames are all zero.

    Parameters
    ----------
    spec : Spectrogram
    pitch : PitchTrack
        Must have one entry per spectrogram frame
    rho_range : (int, int)
        Inclusive range of bin offsets
    harmonics : bool
        If False, only the fundamental's neighborhood is kept

    Returns
    -------
    mask : BinaryMask
    """

    if pitch.n_frames != spec.n_frames:
        raise ShapeError(
            "pitch track has {} frames, spectrogram has {}".format(
                pitch.n_frames, spec.n_frames
            )
        )

    n_bins = spec.shape[1]
    delta = spec.sample_rate / float(spec.params.fft_size)
    nyquist = spec.sample_rate / 2.0
    rhos = np.arange(int(rho_range[0]), int(rho_range[1]) + 1)

    bits = np.zeros(spec.shape, dtype=bool)
    for t in np.flatnonzero(pitch.voiced):
        f_d = pitch.f0[t]
        if harmonics:
            n_harm = max(1, int(np.ceil(nyquist / f_d)) - 1)
            freqs = f_d * np.arange(1, n_harm + 1)
            freqs = freqs[freqs < nyquist]
        else:
            freqs = np.array([f_d])

        idx = np.rint(freqs[:, np.newaxis] / delta - rhos[np.newaxis, :]).astype(int)
        idx = idx[(idx >= 0) & (idx < n_bins)]
        bits[t, idx] = True

    return BinaryMask(bits)


def apply_binary_mask(spec, mask):
    """Keep the bins where the mask is set, zero the rest.

    Parameters
    ----------
    spec : Spectrogram
    mask : BinaryMask

    Returns
    -------
    masked : Spectrogram
    """

    if mask.shape != spec.shape:
        raise ShapeError(
            "mask shape {} does not match spectrogram {}".format(mask.shape, spec.shape)
        )
    return spec.with_bins(np.where(mask.bits, spec.bins, 0))


def _segment_energy(mod, onsets, n_segments):
    """Mean modulation power per channel over the selected segments."""

    power = mod.power()
    out = np.empty(power.shape[0])
    for k, segments in enumerate(onsets.pairs):
        if not segments:
            out[k] = np.mean(power[k])
            continue

        seg_energy = [np.sum(power[k, on : off + 1]) for on, off in segments]
        order = np.argsort(seg_energy, kind="stable")[::-1]
        if n_segments is not None:
            order = order[:n_segments]

        support = np.zeros(power.shape[1], dtype=bool)
        for s in order:
            on, off = segments[s]
            support[on : off + 1] = True
        out[k] = np.mean(power[k, support])
    return out


def estimate_band_energies(
    spec, mask, n_mod=None, smoothing_radius=2, threshold_k=1.0, n_segments=2
):
    """Target and interference modulation energies per channel.

    The target part is the mask-selected spectrogram, the interference part
    its complement.  For each part, the envelopes are transformed to the
    modulation domain, segments are detected, and the mean modulation power
    over that part's selected segments (or over all bins when there are
    none) is reported per channel.

    Parameters
    ----------
    spec : Spectrogram
    mask : BinaryMask
    n_mod : int or None
        Modulation DFT length; next power of two above the frame count
        if None
    smoothing_radius : int >= 0
    threshold_k : float
    n_segments : int > 0 or None
        Keep only this many highest-energy segments per channel

    Returns
    -------
    energies : BandEnergies
    """

    if mask.shape != spec.shape:
        raise ShapeError(
            "mask shape {} does not match spectrogram {}".format(mask.shape, spec.shape)
        )

    n_bins = spec.shape[1]
    if spec.n_frames == 0:
        return BandEnergies(np.zeros(n_bins), np.zeros(n_bins))

    if n_mod is None:
        n_mod = next_pow2(spec.n_frames)

    parts = []
    for part_mask in (mask, mask.complement()):
        env = envelope_detect(apply_binary_mask(spec, part_mask))
        mod = modulation_transform(env, n_mod)
        onsets = detect_onsets_offsets(mod, smoothing_radius, threshold_k)
        parts.append(_segment_energy(mod, onsets, n_segments))

    return BandEnergies(parts[0], parts[1])


def build_frequency_mask(energies):
    """Ratio mask ``gain = X_T / (X_T + X_I)``, 0 where both vanish.

    Parameters
    ----------
    energies : BandEnergies

    Returns
    -------
    fmask : FrequencyMask
    """

    total = energies.target + energies.interference
    gains = np.zeros_like(total)
    nz = total > 0
    gains[nz] = energies.target[nz] / total[nz]
    return FrequencyMask(np.clip(gains, 0.0, 1.0))


def _pad_to_frames(clip, params):
    """Zero-pad the end of a clip so that frames cover every sample."""

    n = len(clip)
    if n <= params.frame_len:
        target = params.frame_len
    else:
        n_hops = int(np.ceil((n - params.frame_len) / float(params.hop)))
        target = params.frame_len + n_hops * params.hop

    if target == n:
        return clip
    return clip.with_samples(np.concatenate([clip.samples, np.zeros(target - n)]))


def _check_framing(params):
    if not params.is_cola():
        raise ConfigError(
            "frames of {} samples with hop {} do not overlap-add to a constant".format(
                params.frame_len, params.hop
            )
        )


def _resynthesize(spec, gains, clip):
    out = spec.with_bins(spec.bins * gains[np.newaxis, :])
    y = istft_overlap_add(out).samples[: len(clip)]
    return y


def apply_frequency_mask(clip, fmask, config=None):
    """Filter a clip by per-channel gains in the STFT domain.

    This applies the same linear processing as `segregate` does, so it can
    be run on the separate stems of a mixture to measure what segregation
    did to each.

    Parameters
    ----------
    clip : AudioClip
    fmask : FrequencyMask or np.ndarray
    config : CasaConfig or None

    Returns
    -------
    clip_out : AudioClip
        Same length as `clip`
    """

    config = config or CasaConfig()
    gains = fmask.gains if isinstance(fmask, FrequencyMask) else np.asarray(fmask)

    params = config.frame_params(clip.sample_rate)
    _check_framing(params)

    if len(gains) != params.fft_size // 2 + 1:
        raise ShapeError(
            "{} gains for {} frequency bins".format(len(gains), params.fft_size // 2 + 1)
        )

    spec = stft(_pad_to_frames(clip, params), params)
    return clip.with_samples(_resynthesize(spec, gains, clip))


def segregate(clip, config=None):
    """Suppress interference in a clip.

    The onset and offset map of the mixture is reported in the diagnostics
    only.  The segments that the band energies average over are detected
    separately on the mask-selected part and on its complement.

    Parameters
    ----------
    clip : AudioClip
    config : CasaConfig or None

    Returns
    -------
    clip_out : AudioClip
        Same length as `clip`, with ``casa=True`` in its metadata

    diagnostics : CasaDiagnostics

    Raises
    ------
    ConfigError
        If the framing does not satisfy the constant overlap-add constraint

    Examples
    --------
    >>> clean, diag = casasid.segregate(noisy, casasid.CasaConfig(rho_min=-2, rho_max=2))
    >>> diag.fmask.gains.shape
    (129,)
    """

    config = config or CasaConfig()
    params = config.frame_params(clip.sample_rate)
    _check_framing(params)

    padded = _pad_to_frames(clip, params)
    spec = stft(padded, params)

    n_mod = config.n_mod if config.n_mod is not None else next_pow2(spec.n_frames)

    envelope = envelope_detect(spec)
    modulation = modulation_transform(envelope, n_mod)
    onsets = detect_onsets_offsets(
        modulation, config.smoothing_radius, config.threshold_k
    )

    pitch = estimate_pitch(
        padded, params, band=config.pitch_band, voicing_threshold=config.voicing_threshold
    )
    ibm = build_ideal_binary_mask(
        spec, pitch, rho_range=config.rho_range, harmonics=config.harmonics
    )
    energies = estimate_band_energies(
        spec,
        ibm,
        n_mod=n_mod,
        smoothing_radius=config.smoothing_radius,
        threshold_k=config.threshold_k,
        n_segments=config.n_segments,
    )

    passthrough = not np.any(pitch.voiced)
    if passthrough:
        logger.debug("No voiced frames; frequency mask falls back to pass-through")
        fmask = FrequencyMask(np.ones(spec.shape[1]))
    else:
        fmask = build_frequency_mask(energies)

    y = _resynthesize(spec, fmask.gains, clip)

    diagnostics = CasaDiagnostics(
        spec, envelope, modulation, onsets, pitch, ibm, energies, fmask, passthrough
    )
    return clip.with_samples(y, casa=True), diagnostics
