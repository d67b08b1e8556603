#!/usr/bin/env python
# -*- encoding: utf-8 -*-
"""MFCC feature extraction

Pre-emphasis, framing, periodogram, triangular mel filterbank, log, DCT
and regression deltas, giving one 32-dimensional vector per frame
(16 static coefficients followed by their 16 deltas) by default.
"""

import functools
import json
import logging
import os

import librosa
import numpy as np
import scipy.fft

from .base import BaseConfig
from .dsp import WINDOWS, FrameParams, frame_signal, pre_emphasize
from .exceptions import EmptyFeatureError, FormatError, IoError, ParamError, ShapeError

__all__ = [
    "MfccConfig",
    "MelFilterbank",
    "FeatureMatrix",
    "periodogram",
    "mel_filterbank",
    "log_mel_energies",
    "dct_cepstra",
    "delta",
    "mfcc_features",
    "write_features",
    "read_features",
]

logger = logging.getLogger(__name__)


class MfccConfig(BaseConfig):
    """Feature extraction parameters

    Attributes
    ----------
    frame_ms : float > 0
        Frame duration
    overlap : float in [0, 1)
        Fractional frame overlap; 0.3125 gives a 110-sample hop for
        160-sample frames
    window : str
    fft_size : int or None
    n_filters : int > 0
        Number of triangular mel filters
    n_ceps : int in [1, n_filters]
        Static coefficients kept after the DCT (c0 included)
    fmin, fmax : float or None
        Filterbank band edges in Hz; `fmax=None` means Nyquist
    pre_emphasis : float in [0, 1)
    floor : float > 0
        Energy floor before the logarithm
    delta_width : int > 0
        Half-width `W` of the regression window
    normalize_area : bool
        Scale each triangle to unit sum instead of unit peak
    """

    def __init__(
        self,
        frame_ms=20.0,
        overlap=0.3125,
        window="hamming",
        fft_size=None,
        n_filters=26,
        n_ceps=16,
        fmin=0.0,
        fmax=None,
        pre_emphasis=0.97,
        floor=1e-12,
        delta_width=2,
        normalize_area=False,
    ):
        if window not in WINDOWS:
            raise ParamError("window must be one of {}".format(sorted(WINDOWS)))
        if frame_ms <= 0:
            raise ParamError("frame_ms must be strictly positive")
        if not 0 <= overlap < 1:
            raise ParamError("overlap must lie in [0, 1)")
        if n_filters < 1:
            raise ParamError("n_filters must be positive")
        if not 1 <= n_ceps <= n_filters:
            raise ParamError("n_ceps must lie in [1, n_filters]")
        if not 0 <= pre_emphasis < 1:
            raise ParamError("pre_emphasis must lie in [0, 1)")
        if floor <= 0:
            raise ParamError("floor must be strictly positive")
        if delta_width < 1:
            raise ParamError("delta_width must be positive")

        self.frame_ms = float(frame_ms)
        self.overlap = float(overlap)
        self.window = window
        self.fft_size = fft_size
        self.n_filters = int(n_filters)
        self.n_ceps = int(n_ceps)
        self.fmin = float(fmin)
        self.fmax = fmax
        self.pre_emphasis = float(pre_emphasis)
        self.floor = float(floor)
        self.delta_width = int(delta_width)
        self.normalize_area = bool(normalize_area)

    def frame_params(self, sample_rate):
        return FrameParams.from_overlap(
            sample_rate,
            self.frame_ms,
            self.overlap,
            window=self.window,
            fft_size=self.fft_size,
        )

    @property
    def n_features(self):
        return 2 * self.n_ceps


class MelFilterbank(object):
    """Triangular filters on the mel scale

    Attributes
    ----------
    weights : np.ndarray [shape=(n_filters, fft_size // 2 + 1)]
    center_bins : np.ndarray [shape=(n_filters,)]
    band : (float, float)
    sample_rate : int
    fft_size : int
    """

    __slots__ = ("weights", "center_bins", "band", "sample_rate", "fft_size")

    def __init__(self, weights, center_bins, band, sample_rate, fft_size):
        self.weights = weights
        self.center_bins = center_bins
        self.band = band
        self.sample_rate = sample_rate
        self.fft_size = fft_size

    @property
    def n_filters(self):
        return self.weights.shape[0]

    def center_frequencies(self):
        return self.center_bins * self.sample_rate / float(self.fft_size)


class FeatureMatrix(object):
    """Per-frame observation vectors

    Attributes
    ----------
    values : np.ndarray [shape=(n_frames, n_features)]
    sample_rate : int
    hop : int
        Frame advance in samples
    frame_len : int
    """

    __slots__ = ("values", "sample_rate", "hop", "frame_len")

    def __init__(self, values, sample_rate, hop, frame_len):
        values = np.asarray(values, dtype=np.float64)
        if values.ndim != 2:
            raise ShapeError("features must be a matrix, got shape {}".format(values.shape))
        if not np.all(np.isfinite(values)):
            raise ParamError("features must be finite")
        self.values = values
        self.sample_rate = int(sample_rate)
        self.hop = int(hop)
        self.frame_len = int(frame_len)

    @property
    def n_frames(self):
        return self.values.shape[0]

    @property
    def n_features(self):
        return self.values.shape[1]

    def __len__(self):
        return self.values.shape[0]

    def header(self):
        return dict(
            rows=self.n_frames,
            cols=self.n_features,
            sample_rate=self.sample_rate,
            hop=self.hop,
            frame_len=self.frame_len,
        )


def periodogram(frame, n_fft):
    """Periodogram power estimate ``P[k] = |DFT_N(frame)[k]|**2 / N``

    Parameters
    ----------
    frame : np.ndarray [shape=(..., frame_len)]
        Windowed frame(s), ``frame_len <= n_fft``
    n_fft : int

    Returns
    -------
    power : np.ndarray [shape=(..., n_fft // 2 + 1)]
    """

    frame = np.asarray(frame, dtype=np.float64)
    if frame.shape[-1] > n_fft:
        raise ShapeError(
            "frame of {} samples exceeds fft size {}".format(frame.shape[-1], n_fft)
        )
    return np.abs(np.fft.rfft(frame, n=n_fft, axis=-1)) ** 2 / float(n_fft)


def mel_filterbank(n_filters=26, fft_size=256, sample_rate=8000, band=None, normalize=False):
    """Construct a triangular mel filterbank.

    ``n_filters + 2`` points are spaced evenly on the mel scale
    ``2595 * log10(1 + f / 700)`` between the band edges and snapped to the
    nearest FFT bin.  Filter `i` rises from point `i` to a peak of 1 at
    point `i + 1` and falls to zero at point `i + 2`.

    Parameters
    ----------
    n_filters : int > 0
    fft_size : int
    sample_rate : int
    band : (float, float) or None
        ``(low, high)`` in Hz; defaults to ``(0, sample_rate / 2)``
    normalize : bool
        Scale each row to unit sum

    Returns
    -------
    bank : MelFilterbank
    """

    if n_filters < 1:
        raise ParamError("n_filters must be positive")

    nyquist = sample_rate / 2.0
    lo, hi = (0.0, nyquist) if band is None else (float(band[0]), float(band[1]))
    if not 0 <= lo < hi <= nyquist:
        raise ParamError("filterbank band {} must lie within [0, {}]".format((lo, hi), nyquist))

    mels = np.linspace(
        librosa.hz_to_mel(lo, htk=True), librosa.hz_to_mel(hi, htk=True), n_filters + 2
    )
    hz = librosa.mel_to_hz(mels, htk=True)
    points = np.rint(hz * fft_size / float(sample_rate)).astype(int)

    n_bins = fft_size // 2 + 1
    weights = np.zeros((n_filters, n_bins))
    k = np.arange(n_bins)
    for i in range(n_filters):
        left, centre, right = points[i : i + 3]
        if centre > left:
            rise = (k >= left) & (k <= centre)
            weights[i, rise] = (k[rise] - left) / float(centre - left)
        if right > centre:
            fall = (k >= centre) & (k <= right)
            weights[i, fall] = (right - k[fall]) / float(right - centre)
        weights[i, centre] = 1.0

    if normalize:
        weights /= weights.sum(axis=1, keepdims=True)

    return MelFilterbank(weights, points[1:-1], (lo, hi), sample_rate, fft_size)


@functools.lru_cache(maxsize=16)
def _cached_filterbank(n_filters, fft_size, sample_rate, lo, hi, normalize):
    bank = mel_filterbank(n_filters, fft_size, sample_rate, (lo, hi), normalize)
    bank.weights.setflags(write=False)
    return bank


def log_mel_energies(power, bank, floor=1e-12):
    """Floored log filterbank energies ``ln(max(W @ P, floor))``

    Parameters
    ----------
    power : np.ndarray [shape=(..., n_bins)]
    bank : MelFilterbank
    floor : float > 0

    Returns
    -------
    log_energies : np.ndarray [shape=(..., n_filters)]
    """

    power = np.asarray(power, dtype=np.float64)
    if power.shape[-1] != bank.weights.shape[1]:
        raise ShapeError(
            "power spectrum has {} bins, filterbank expects {}".format(
                power.shape[-1], bank.weights.shape[1]
            )
        )
    return np.log(np.maximum(power @ bank.weights.T, floor))


def dct_cepstra(log_energies, n_keep=16):
    """Leading coefficients of the orthonormal DCT-II

    Parameters
    ----------
    log_energies : np.ndarray [shape=(..., n_filters)]
    n_keep : int <= n_filters

    Returns
    -------
    cepstra : np.ndarray [shape=(..., n_keep)]
    """

    log_energies = np.asarray(log_energies, dtype=np.float64)
    if not 1 <= n_keep <= log_energies.shape[-1]:
        raise ParamError(
            "n_keep must lie in [1, {}]".format(log_energies.shape[-1])
        )
    return scipy.fft.dct(log_energies, type=2, norm="ortho", axis=-1)[..., :n_keep]


def delta(coeffs, width=2):
    """Regression deltas with edge replication

    ``d[t] = sum_{w=1}^{W} w * (c[t+w] - c[t-w]) / (2 * sum_{w=1}^{W} w**2)``

    Parameters
    ----------
    coeffs : np.ndarray [shape=(n_frames, n_coeffs)]
    width : int > 0

    Returns
    -------
    deltas : np.ndarray, same shape as `coeffs`
    """

    if width < 1:
        raise ParamError("delta width must be positive")

    coeffs = np.asarray(coeffs, dtype=np.float64)
    n_frames = coeffs.shape[0]
    if n_frames == 0:
        return np.zeros_like(coeffs)

    padded = np.pad(coeffs, [(width, width), (0, 0)], mode="edge")
    out = np.zeros_like(coeffs)
    for w in range(1, width + 1):
        out += w * (
            padded[width + w : width + w + n_frames]
            - padded[width - w : width - w + n_frames]
        )
    return out / (2.0 * sum(w * w for w in range(1, width + 1)))


def mfcc_features(clip, config=None):
    """Compute the MFCC + delta feature matrix of a clip.

    Parameters
    ----------
    clip : AudioClip
    config : MfccConfig or None

    Returns
    -------
    features : FeatureMatrix
        ``2 * config.n_ceps`` columns, one row per frame

    Raises
    ------
    EmptyFeatureError
        If the clip is shorter than one frame
    """

    config = config or MfccConfig()
    sr = clip.sample_rate
    params = config.frame_params(sr)

    if len(clip) < params.frame_len:
        raise EmptyFeatureError(
            "clip of {} samples is shorter than one {}-sample frame".format(
                len(clip), params.frame_len
            )
        )

    fmax = sr / 2.0 if config.fmax is None else float(config.fmax)
    bank = _cached_filterbank(
        config.n_filters, params.fft_size, sr, config.fmin, fmax, config.normalize_area
    )

    frames = frame_signal(pre_emphasize(clip, config.pre_emphasis), params)
    power = periodogram(frames, params.fft_size)
    ceps = dct_cepstra(log_mel_energies(power, bank, config.floor), config.n_ceps)

    values = np.hstack([ceps, delta(ceps, config.delta_width)])
    return FeatureMatrix(values, sr, params.hop, params.frame_len)


def write_features(features, path, fmt="jsonl"):
    """Store a feature matrix.

    Parameters
    ----------
    features : FeatureMatrix
    path : str
    fmt : str
        ``jsonl``: a JSON header line followed by one line of
        comma-separated decimals per frame.
        ``bin``: raw little-endian float64 rows at `path` with a JSON
        sidecar at ``path + '.json'``.
    """

    path = str(path)
    header = features.header()
    try:
        if fmt == "jsonl":
            with open(path, "w", encoding="utf-8") as fdesc:
                fdesc.write(json.dumps(header, sort_keys=True) + "\n")
                for row in features.values:
                    fdesc.write(",".join(repr(float(v)) for v in row) + "\n")
        elif fmt == "bin":
            with open(path, "wb") as fdesc:
                fdesc.write(features.values.astype("<f8").tobytes())
            header["dtype"] = "<f8"
            with open(path + ".json", "w", encoding="utf-8") as fdesc:
                json.dump(header, fdesc, sort_keys=True)
        else:
            raise ParamError("unknown feature format {!r}".format(fmt))
    except OSError as exc:
        raise IoError("cannot write {}: {}".format(path, exc))


def read_features(path):
    """Load a feature matrix written by `write_features`.

    A sidecar ``path + '.json'`` selects the binary format.
    """

    path = str(path)
    sidecar = path + ".json"
    try:
        if os.path.exists(sidecar):
            with open(sidecar, "r", encoding="utf-8") as fdesc:
                header = json.load(fdesc)
            values = np.fromfile(path, dtype="<f8")
        else:
            with open(path, "r", encoding="utf-8") as fdesc:
                header = json.loads(fdesc.readline())
                rows = [
                    [float(v) for v in line.split(",")]
                    for line in fdesc
                    if line.strip()
                ]
            values = np.asarray(rows, dtype=np.float64)
    except OSError as exc:
        raise IoError("cannot read {}: {}".format(path, exc))
    except (ValueError, KeyError) as exc:
        raise FormatError("malformed feature file {}: {}".format(path, exc))

    expected = (header["rows"], header["cols"])
    if values.size != expected[0] * expected[1]:
        raise FormatError(
            "{}: {} values, header announces {}x{}".format(path, values.size, *expected)
        )
    values = values.reshape(expected)

    return FeatureMatrix(values, header["sample_rate"], header["hop"], header["frame_len"])
