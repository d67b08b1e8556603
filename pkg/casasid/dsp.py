#!/usr/bin/env python
# -*- encoding: utf-8 -*-
"""Time-frequency primitives: framing, STFT/ISTFT and pitch tracking"""

import logging

import librosa
import numpy as np
import scipy.signal

from .base import BaseConfig
from .core import AudioClip
from .exceptions import ConfigError, ParamError, ShapeError

__all__ = [
    "WINDOWS",
    "FrameParams",
    "Spectrogram",
    "PitchTrack",
    "pre_emphasize",
    "frame_signal",
    "stft",
    "istft_overlap_add",
    "estimate_pitch",
    "next_pow2",
]

logger = logging.getLogger(__name__)

WINDOWS = {"hamming": "hamming", "rectangular": "boxcar"}
PITCH_NORMS = ("r0", "nccf")


def next_pow2(n):
    """Smallest power of two >= n"""
    return 1 << max(0, int(n) - 1).bit_length()


class FrameParams(BaseConfig):
    """Framing parameters

    Attributes
    ----------
    frame_len : int > 0
        Frame length in samples

    hop : int in (0, frame_len]
        Frame advance in samples

    window : str
        ``hamming`` (periodic) or ``rectangular``

    fft_size : int or None
        DFT length, a power of two ``>= frame_len``.
        If None, the next power of two is used.
    """

    def __init__(self, frame_len=240, hop=40, window="hamming", fft_size=None):

        if window not in WINDOWS:
            raise ParamError(
                "window must be one of {}, not {!r}".format(sorted(WINDOWS), window)
            )

        frame_len = int(frame_len)
        hop = int(hop)
        if fft_size is None:
            fft_size = next_pow2(frame_len)
        fft_size = int(fft_size)

        if not 0 < hop <= frame_len <= fft_size:
            raise ParamError(
                "need 0 < hop <= frame_len <= fft_size, got {}, {}, {}".format(
                    hop, frame_len, fft_size
                )
            )
        if fft_size & (fft_size - 1):
            raise ParamError("fft_size={} is not a power of two".format(fft_size))

        self.frame_len = frame_len
        self.hop = hop
        self.window = window
        self.fft_size = fft_size

    @classmethod
    def from_ms(cls, sample_rate, frame_ms, hop_ms, window="hamming", fft_size=None):
        """Framing from a frame duration and a hop, both in milliseconds

        >>> FrameParams.from_ms(8000, 30, 5)
        FrameParams(fft_size=256, frame_len=240, hop=40, window='hamming')
        """
        frame_len = int(round(sample_rate * frame_ms / 1000.0))
        hop = int(round(sample_rate * hop_ms / 1000.0))
        return cls(frame_len=frame_len, hop=hop, window=window, fft_size=fft_size)

    @classmethod
    def from_overlap(
        cls, sample_rate, frame_ms, overlap, window="hamming", fft_size=None
    ):
        """Framing from a frame duration (ms) and a fractional overlap

        >>> FrameParams.from_overlap(8000, 20, 0.3125).hop
        110
        """
        if not 0 <= overlap < 1:
            raise ParamError("overlap must lie in [0, 1)")
        frame_len = int(round(sample_rate * frame_ms / 1000.0))
        hop = int(round(frame_len * (1.0 - overlap)))
        return cls(frame_len=frame_len, hop=hop, window=window, fft_size=fft_size)

    def get_window(self):
        """The analysis window, of length `frame_len`"""
        return scipy.signal.get_window(WINDOWS[self.window], self.frame_len, fftbins=True)

    def n_frames(self, n_samples):
        """Number of full frames in a signal of `n_samples` samples"""
        if n_samples < self.frame_len:
            return 0
        return 1 + (n_samples - self.frame_len) // self.hop

    def is_cola(self):
        """Does the window overlap-add to a constant at this hop?"""
        return bool(
            scipy.signal.check_COLA(
                self.get_window(), self.frame_len, self.frame_len - self.hop
            )
        )


class Spectrogram(object):
    """Short-time Fourier transform of a clip.

    Attributes
    ----------
    bins : np.ndarray [shape=(n_frames, fft_size // 2 + 1), dtype=complex]
        ``bins[m, k]`` is frame `m`, frequency bin `k`

    params : FrameParams

    sample_rate : int

    length : int
        Number of samples of the analyzed signal
    """

    __slots__ = ("bins", "params", "sample_rate", "length")

    def __init__(self, bins, params, sample_rate, length):
        bins = np.asarray(bins, dtype=np.complex128)
        n_bins = params.fft_size // 2 + 1
        if bins.ndim != 2 or bins.shape[1] != n_bins:
            raise ShapeError(
                "spectrogram must have {} columns, got shape {}".format(
                    n_bins, bins.shape
                )
            )
        if not np.all(np.isfinite(bins)):
            raise ParamError("spectrogram entries must be finite")
        self.bins = bins
        self.params = params
        self.sample_rate = int(sample_rate)
        self.length = int(length)

    @property
    def shape(self):
        return self.bins.shape

    @property
    def n_frames(self):
        return self.bins.shape[0]

    def frequencies(self):
        """Center frequency (Hz) of each bin"""
        return np.arange(self.bins.shape[1]) * self.sample_rate / float(
            self.params.fft_size
        )

    def with_bins(self, bins):
        """A spectrogram with the same framing and new bins"""
        bins = np.asarray(bins)
        if bins.shape != self.bins.shape:
            raise ShapeError(
                "shape mismatch: {} != {}".format(bins.shape, self.bins.shape)
            )
        return Spectrogram(bins, self.params, self.sample_rate, self.length)

    def energy(self):
        return float(np.sum(np.abs(self.bins) ** 2))


class PitchTrack(object):
    """Frame-wise fundamental frequency estimates.

    Attributes
    ----------
    f0 : np.ndarray [shape=(n_frames,)]
        Pitch in Hz; ``nan`` marks unvoiced frames

    strength : np.ndarray [shape=(n_frames,)]
        Peak normalized autocorrelation per frame

    params : FrameParams

    sample_rate : int

    band : tuple of float
        The pitch search band, in Hz
    """

    __slots__ = ("f0", "strength", "params", "sample_rate", "band")

    def __init__(self, f0, strength, params, sample_rate, band=(50.0, 400.0)):
        self.f0 = np.asarray(f0, dtype=np.float64)
        self.strength = np.asarray(strength, dtype=np.float64)
        if self.f0.shape != self.strength.shape or self.f0.ndim != 1:
            raise ShapeError("f0 and strength must be 1-d of equal length")
        self.params = params
        self.sample_rate = int(sample_rate)
        self.band = tuple(float(b) for b in band)

    @property
    def n_frames(self):
        return len(self.f0)

    @property
    def voiced(self):
        return np.isfinite(self.f0)

    def times(self):
        """Frame start times in seconds"""
        return np.arange(len(self.f0)) * self.params.hop / float(self.sample_rate)

    def to_dict(self):
        return dict(
            sample_rate=self.sample_rate,
            hop=self.params.hop,
            frame_len=self.params.frame_len,
            band=list(self.band),
            f0=[None if not np.isfinite(f) else float(f) for f in self.f0],
            strength=self.strength.tolist(),
        )


def pre_emphasize(clip, coeff=0.97):
    """First-order pre-emphasis filter.

    ``y[n] = x[n] - coeff * x[n-1]``, with ``y[0] = x[0]``.

    Parameters
    ----------
    clip : AudioClip
    coeff : float in [0, 1)

    Returns
    -------
    clip_out : AudioClip
    """
    if not 0 <= coeff < 1:
        raise ParamError("pre-emphasis coefficient must lie in [0, 1)")

    if coeff == 0:
        return clip

    y = scipy.signal.lfilter([1.0, -coeff], [1.0], clip.samples)
    return clip.with_samples(y)


def frame_signal(clip, params):
    """Slice a clip into windowed frames.

    Tail samples that do not fill a frame are dropped.

    Parameters
    ----------
    clip : AudioClip
    params : FrameParams

    Returns
    -------
    frames : np.ndarray [shape=(n_frames, frame_len)]
        ``n_frames = 1 + (len(clip) - frame_len) // hop``, or 0 if the clip
        is shorter than one frame
    """

    y = np.ascontiguousarray(clip.samples)
    if len(y) < params.frame_len:
        return np.zeros((0, params.frame_len))

    frames = librosa.util.frame(y, frame_length=params.frame_len, hop_length=params.hop)
    return frames.T * params.get_window()


def stft(clip, params):
    """Short-time Fourier transform.

    Each windowed frame is zero-padded to `params.fft_size` and only the
    non-negative frequency bins are kept.

    Parameters
    ----------
    clip : AudioClip
    params : FrameParams

    Returns
    -------
    spec : Spectrogram
    """

    frames = frame_signal(clip, params)
    bins = np.fft.rfft(frames, n=params.fft_size, axis=1)
    return Spectrogram(bins, params, clip.sample_rate, len(clip))


def istft_overlap_add(spec):
    """Inverse STFT by weighted overlap-add.

    Frames are inverted, overlap-added and divided by the sum of the
    shifted analysis windows, so that ``istft_overlap_add(stft(x))``
    reproduces `x` wherever frames cover it.

    Parameters
    ----------
    spec : Spectrogram

    Returns
    -------
    clip : AudioClip
        Of length `spec.length`; samples past the last full frame are 0

    Raises
    ------
    ConfigError
        If the window does not satisfy the constant overlap-add constraint
        at the given hop
    """

    params = spec.params
    if not params.is_cola():
        raise ConfigError(
            "{} window of {} samples is not COLA at hop {}".format(
                params.window, params.frame_len, params.hop
            )
        )

    n_frames = spec.n_frames
    y = np.zeros(spec.length)
    if n_frames == 0:
        return AudioClip(y, spec.sample_rate)

    frames = np.fft.irfft(spec.bins, n=params.fft_size, axis=1)[:, : params.frame_len]
    window = params.get_window()

    norm = np.zeros(spec.length)
    for m in range(n_frames):
        start = m * params.hop
        y[start : start + params.frame_len] += frames[m]
        norm[start : start + params.frame_len] += window

    covered = norm > 0
    y[covered] /= norm[covered]

    return AudioClip(y, spec.sample_rate)


def _autocorrelation(frames, max_lag, normalize="r0"):
    """Normalized autocorrelation of each frame, lags ``0 .. max_lag``.

    ``r0``:   ``r[t, tau] = R(tau) / R(0)`` with
    ``R(tau) = sum x[n] x[n + tau]`` over ``n < L - tau``.

    ``nccf``: ``R(tau) / sqrt(sum x[n]^2 * sum x[n + tau]^2)``, the energies
    taken over the overlapping parts only.
    """

    n_frames, frame_len = frames.shape
    n_fft = next_pow2(2 * frame_len)

    spec = np.fft.rfft(frames, n=n_fft, axis=1)
    acf = np.fft.irfft(np.abs(spec) ** 2, n=n_fft, axis=1)[:, : max_lag + 1]

    out = np.zeros_like(acf)
    if normalize == "r0":
        denom = np.broadcast_to(acf[:, :1], acf.shape)
        ok = denom > 1e-300
        out[ok] = acf[ok] / denom[ok]
        return out

    csum = np.concatenate(
        [np.zeros((n_frames, 1)), np.cumsum(frames ** 2, axis=1)], axis=1
    )
    lags = np.arange(max_lag + 1)
    e_head = csum[:, frame_len - lags]
    e_tail = csum[:, frame_len : frame_len + 1] - csum[:, lags]

    denom = np.sqrt(np.maximum(e_head * e_tail, 0))
    ok = denom > 1e-12 * np.maximum(csum[:, -1:], 1e-300)
    out[ok] = acf[ok] / denom[ok]
    return out


def estimate_pitch(clip, params, band=(50.0, 400.0), voicing_threshold=0.45, normalize="r0"):
    """Autocorrelation pitch tracker.

    Each (unwindowed, mean-removed) frame is correlated with lagged copies
    of itself and the correlation is divided by its zero-lag value.  The
    frame is voiced if the strongest local maximum in the lag band reaches
    `voicing_threshold`; the pitch is then taken from the *smallest* lag
    whose peak is within 90% of the strongest one, refined by parabolic
    interpolation.

    Parameters
    ----------
    clip : AudioClip
    params : FrameParams
        Framing; the pitch track has one entry per frame of `stft(clip, params)`
    band : (float, float)
        Pitch search range in Hz, within ``(0, sample_rate / 2)``
    voicing_threshold : float
        Minimum normalized autocorrelation peak for a voiced frame
    normalize : str
        ``r0`` divides by the zero-lag autocorrelation; ``nccf`` divides by
        the energies of the overlapping parts

    Returns
    -------
    pitch : PitchTrack
    """

    if normalize not in PITCH_NORMS:
        raise ParamError("normalize must be one of {}".format(PITCH_NORMS))
    f_lo, f_hi = float(band[0]), float(band[1])
    sr = clip.sample_rate
    if not 0 < f_lo < f_hi < sr / 2.0:
        raise ParamError(
            "pitch band {} must lie within (0, {})".format(band, sr / 2.0)
        )

    frames = frame_signal(clip, params.replace(window="rectangular"))
    n_frames, frame_len = frames.shape

    f0 = np.full(n_frames, np.nan)
    strength = np.zeros(n_frames)
    if n_frames == 0:
        return PitchTrack(f0, strength, params, sr, band=(f_lo, f_hi))

    lag_lo = max(2, int(np.floor(sr / f_hi)))
    lag_hi = min(int(np.ceil(sr / f_lo)), int(0.75 * frame_len))
    if lag_hi <= lag_lo:
        raise ParamError(
            "frame of {} samples too short for pitch band {}".format(frame_len, band)
        )

    frames = frames - frames.mean(axis=1, keepdims=True)
    r = _autocorrelation(frames, lag_hi + 1, normalize)

    for t in range(n_frames):
        rt = r[t]
        lags = np.arange(lag_lo, lag_hi + 1)
        centre = rt[lags]
        is_peak = (centre > rt[lags - 1]) & (centre >= rt[lags + 1])
        if not np.any(is_peak):
            continue

        peak_lags = lags[is_peak]
        peak_vals = rt[peak_lags]
        best = np.max(peak_vals)
        strength[t] = best
        if best < voicing_threshold:
            continue

        lag = peak_lags[np.argmax(peak_vals >= 0.9 * best)]

        a, b, c = rt[lag - 1], rt[lag], rt[lag + 1]
        curvature = a - 2 * b + c
        delta = 0.5 * (a - c) / curvature if curvature < 0 else 0.0
        delta = float(np.clip(delta, -0.5, 0.5))

        f0[t] = np.clip(sr / (lag + delta), f_lo, f_hi)

    logger.debug(
        "Pitch track: %d/%d voiced frames", int(np.sum(np.isfinite(f0))), n_frames
    )
    return PitchTrack(f0, strength, params, sr, band=(f_lo, f_hi))
