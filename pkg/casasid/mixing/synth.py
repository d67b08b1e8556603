#!/usr/bin/env python
# -*- encoding: utf-8 -*-
"""Synthetic speakers and talking conditions for desk-scale experiments"""

import logging
import os

import numpy as np
import scipy.signal

from ..base import BaseConfig, _get_rng
from ..core import EMOTIONS, AudioClip, ManifestEntry, write_manifest, write_wav
from ..exceptions import ParamError

__all__ = [
    "VOWELS",
    "SpeakerProfile",
    "TalkingStyle",
    "EMOTION_STYLES",
    "synth_speaker",
    "synth_utterance",
    "make_speaker_profiles",
    "make_synthetic_corpus",
]

logger = logging.getLogger(__name__)

# (frequency, bandwidth) in Hz of the first three formants
VOWELS = {
    "a": ((730.0, 90.0), (1090.0, 110.0), (2440.0, 160.0)),
    "e": ((530.0, 70.0), (1840.0, 110.0), (2480.0, 160.0)),
    "i": ((270.0, 60.0), (2290.0, 120.0), (3010.0, 180.0)),
    "o": ((570.0, 80.0), (840.0, 90.0), (2410.0, 160.0)),
    "u": ((300.0, 60.0), (870.0, 90.0), (2240.0, 150.0)),
}


class SpeakerProfile(BaseConfig):
    """Voice of a synthetic speaker

    Attributes
    ----------
    speaker_id : str
    pitch_hz : float
        Neutral fundamental frequency
    tract_scale : float > 0
        Multiplier applied to every formant frequency (vocal tract length)
    """

    def __init__(self, speaker_id="spk00", pitch_hz=120.0, tract_scale=1.0):
        if not 50 <= pitch_hz <= 400:
            raise ParamError("pitch_hz must lie in [50, 400]")
        if tract_scale <= 0:
            raise ParamError("tract_scale must be strictly positive")
        self.speaker_id = str(speaker_id)
        self.pitch_hz = float(pitch_hz)
        self.tract_scale = float(tract_scale)


class TalkingStyle(BaseConfig):
    """An emotional or stressful talking condition

    Attributes
    ----------
    name : str
    pitch_factor : float > 0
        Multiplier on the speaker's pitch
    tilt : float >= 0
        Source spectral tilt exponent: harmonic `h` has amplitude ``h**-tilt``
    tempo : float > 0
        Multiplier on segment durations (> 1 is slower)
    gain : float in (0, 1]
        Peak amplitude of the utterance
    """

    def __init__(self, name="neutral", pitch_factor=1.0, tilt=1.0, tempo=1.0, gain=0.5):
        if pitch_factor <= 0 or tempo <= 0:
            raise ParamError("pitch_factor and tempo must be strictly positive")
        if tilt < 0:
            raise ParamError("tilt must be non-negative")
        if not 0 < gain <= 1:
            raise ParamError("gain must lie in (0, 1]")
        self.name = str(name)
        self.pitch_factor = float(pitch_factor)
        self.tilt = float(tilt)
        self.tempo = float(tempo)
        self.gain = float(gain)


EMOTION_STYLES = {
    "neutral": TalkingStyle("neutral", 1.00, 1.0, 1.00, 0.50),
    "angry": TalkingStyle("angry", 1.30, 0.6, 0.90, 0.80),
    "happy": TalkingStyle("happy", 1.20, 0.8, 0.95, 0.60),
    "sad": TalkingStyle("sad", 0.85, 1.5, 1.20, 0.35),
    "fear": TalkingStyle("fear", 1.35, 1.1, 0.85, 0.45),
    "disgust": TalkingStyle("disgust", 0.90, 1.2, 1.10, 0.50),
    "loud": TalkingStyle("loud", 1.15, 0.5, 1.00, 0.90),
    "soft": TalkingStyle("soft", 0.95, 1.6, 1.00, 0.25),
    "slow": TalkingStyle("slow", 1.00, 1.0, 1.50, 0.50),
    "fast": TalkingStyle("fast", 1.05, 1.0, 0.70, 0.50),
    "lombard": TalkingStyle("lombard", 1.25, 0.55, 1.05, 0.85),
}


def synth_speaker(
    pitch_hz, formants, duration_s, sample_rate, seed, tilt=1.0, jitter=0.005
):
    """Synthesize a sustained voiced sound.

    A band-limited glottal impulse train at `pitch_hz` (with a slowly
    varying, seeded pitch jitter) is passed through a cascade of
    second-order resonators, one per formant.

    Parameters
    ----------
    pitch_hz : float in [50, 400]
        Fundamental frequency

    formants : list of (float, float)
        ``(frequency, bandwidth)`` pairs in Hz, frequencies below Nyquist

    duration_s : float > 0
        Duration in seconds

    sample_rate : int > 0

    seed : int
        Seed for the jitter and the initial glottal phase

    tilt : float >= 0
        Harmonic amplitude roll-off exponent

    jitter : float >= 0
        Relative standard deviation of the pitch perturbation

    Returns
    -------
    clip : AudioClip
        Peak-normalized to 0.5; deterministic for fixed arguments

    Raises
    ------
    ParamError
        If the pitch is outside [50, 400] Hz, a formant is at or above
        Nyquist, or the duration is shorter than one sample
    """

    if not 50 <= pitch_hz <= 400:
        raise ParamError("pitch_hz={} outside [50, 400]".format(pitch_hz))

    nyquist = sample_rate / 2.0
    for freq, bandwidth in formants:
        if not 0 < freq < nyquist:
            raise ParamError("formant {} Hz not below Nyquist".format(freq))
        if bandwidth <= 0:
            raise ParamError("formant bandwidth must be strictly positive")

    n_samples = int(round(duration_s * sample_rate))
    if n_samples < 1:
        raise ParamError("duration_s too short")

    rng = _get_rng(seed)

    # Slow pitch perturbation, one knot every 50ms
    knot_step = max(1, int(0.05 * sample_rate))
    n_knots = n_samples // knot_step + 2
    knots = 1.0 + jitter * rng.randn(n_knots)
    contour = np.interp(
        np.arange(n_samples), np.arange(n_knots) * knot_step, knots
    )
    f0 = pitch_hz * contour

    phase = rng.uniform(0, 2 * np.pi) + 2 * np.pi * np.cumsum(f0) / sample_rate

    n_harmonics = max(1, int(np.floor(0.98 * nyquist / np.max(f0))))
    source = np.zeros(n_samples)
    for h in range(1, n_harmonics + 1):
        source += h ** (-tilt) * np.cos(h * phase)

    y = source
    for freq, bandwidth in formants:
        r = np.exp(-np.pi * bandwidth / sample_rate)
        theta = 2 * np.pi * freq / sample_rate
        y = scipy.signal.lfilter([1.0 - r], [1.0, -2 * r * np.cos(theta), r * r], y)

    peak = np.max(np.abs(y))
    if peak > 0:
        y = 0.5 * y / peak

    return AudioClip(y, sample_rate)


def _fade(y, n_fade):
    n_fade = min(n_fade, len(y) // 2)
    if n_fade > 0:
        ramp = 0.5 - 0.5 * np.cos(np.pi * np.arange(n_fade) / n_fade)
        y = y.copy()
        y[:n_fade] *= ramp
        y[-n_fade:] *= ramp[::-1]
    return y


def synth_utterance(profile, style, sample_rate=8000, seed=0, n_segments=None):
    """Synthesize an utterance as a sequence of vowel segments.

    Parameters
    ----------
    profile : SpeakerProfile
    style : TalkingStyle
    sample_rate : int > 0
    seed : int
    n_segments : int > 0 or None
        Number of vowel segments; drawn from [3, 5] if None

    Returns
    -------
    clip : AudioClip
        With ``speaker_id``, ``emotion`` and ``seed`` metadata
    """

    rng = _get_rng(seed)
    if n_segments is None:
        n_segments = rng.randint(3, 6)

    names = sorted(VOWELS)
    pieces = []
    for _ in range(n_segments):
        vowel = names[rng.randint(len(names))]
        duration = style.tempo * rng.uniform(0.18, 0.30)
        pitch = profile.pitch_hz * style.pitch_factor * (1.0 + 0.03 * rng.randn())
        pitch = float(np.clip(pitch, 50.0, 400.0))
        formants = [
            (freq * profile.tract_scale, bw)
            for freq, bw in VOWELS[vowel]
            if freq * profile.tract_scale < 0.45 * sample_rate
        ]
        seg = synth_speaker(
            pitch,
            formants,
            duration,
            sample_rate,
            int(rng.randint(0, 2 ** 31 - 1)),
            tilt=style.tilt,
        )
        pieces.append(_fade(seg.samples, int(0.01 * sample_rate)))

    y = np.concatenate(pieces)
    y = style.gain * y / np.max(np.abs(y))

    return AudioClip(
        y,
        sample_rate,
        meta=dict(speaker_id=profile.speaker_id, emotion=style.name, seed=int(seed)),
    )


def make_speaker_profiles(n_speakers, rng=None):
    """Draw well-separated synthetic speaker profiles.

    Pitches and vocal-tract scales are laid on evenly spaced grids and
    paired by independent random permutations.

    Parameters
    ----------
    n_speakers : int > 0
    rng : None, int or np.random.RandomState

    Returns
    -------
    profiles : list of SpeakerProfile
    """

    if n_speakers < 1:
        raise ParamError("n_speakers must be strictly positive")

    rng = _get_rng(rng)
    pitches = np.linspace(95.0, 210.0, n_speakers)[rng.permutation(n_speakers)]
    scales = np.linspace(0.85, 1.18, n_speakers)[rng.permutation(n_speakers)]

    return [
        SpeakerProfile("spk{:02d}".format(i), float(pitches[i]), float(scales[i]))
        for i in range(n_speakers)
    ]


def make_synthetic_corpus(
    out_dir,
    n_speakers=4,
    n_emotions=2,
    n_utterances=6,
    sample_rate=8000,
    seed=0,
    n_train=None,
    emotions=None,
):
    """Write a synthetic corpus of WAV files and a manifest.

    For every speaker and talking condition, the first `n_train`
    utterances are assigned to the train split and the rest to test.

    Parameters
    ----------
    out_dir : str
        Output directory (created if needed)

    n_speakers, n_emotions, n_utterances : int > 0

    sample_rate : int > 0

    seed : int

    n_train : int or None
        Training utterances per (speaker, emotion); default half of
        `n_utterances` (at least one)

    emotions : list of str or None
        Talking conditions; default the first `n_emotions` of `EMOTIONS`

    Returns
    -------
    entries : list of ManifestEntry
        The manifest is written to ``out_dir/manifest.jsonl``
    """

    if emotions is None:
        if not 1 <= n_emotions <= len(EMOTIONS):
            raise ParamError("n_emotions must lie in [1, {}]".format(len(EMOTIONS)))
        emotions = list(EMOTIONS[:n_emotions])
    for name in emotions:
        if name not in EMOTION_STYLES:
            raise ParamError("no talking style for emotion {!r}".format(name))

    if n_utterances < 1:
        raise ParamError("n_utterances must be strictly positive")
    if n_train is None:
        n_train = max(1, n_utterances // 2)

    rng = _get_rng(seed)
    profiles = make_speaker_profiles(n_speakers, rng)

    os.makedirs(out_dir, exist_ok=True)
    entries = []
    for profile in profiles:
        spk_dir = os.path.join(out_dir, profile.speaker_id)
        os.makedirs(spk_dir, exist_ok=True)
        for emotion in emotions:
            for k in range(n_utterances):
                utt_seed = int(rng.randint(0, 2 ** 31 - 1))
                clip = synth_utterance(
                    profile, EMOTION_STYLES[emotion], sample_rate, utt_seed
                )
                path = os.path.join(spk_dir, "{}_{:02d}.wav".format(emotion, k))
                write_wav(clip, path)
                entries.append(
                    ManifestEntry(
                        path,
                        profile.speaker_id,
                        emotion,
                        "train" if k < n_train else "test",
                    )
                )

    write_manifest(entries, os.path.join(out_dir, "manifest.jsonl"), relative_to=out_dir)
    logger.info(
        "Wrote %d synthetic utterances (%d speakers x %d emotions) to %s",
        len(entries),
        n_speakers,
        len(emotions),
        out_dir,
    )
    return entries
