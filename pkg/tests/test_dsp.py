#!/usr/bin/env python
# -*- encoding: utf-8 -*-
'''Framing, STFT and pitch tracking tests'''

import numpy as np

import casasid

import pytest


def ap_(a, b, msg=None, rtol=1e-5, atol=1e-5):
    """Shorthand for 'assert np.allclose(a, b, rtol, atol), "%r != %r" % (a, b)
    """
    if not np.allclose(a, b, rtol=rtol, atol=atol):
        raise AssertionError(msg or "{} != {}".format(a, b))


@pytest.fixture(scope='module')
def noise():
    rng = np.random.RandomState(20)
    return casasid.AudioClip(0.25 * rng.randn(8000), 8000)


@pytest.mark.parametrize('kwargs', [dict(frame_len=240, hop=0),
                                    dict(frame_len=240, hop=250),
                                    dict(frame_len=240, hop=40, fft_size=128),
                                    dict(frame_len=240, hop=40, fft_size=300),
                                    dict(frame_len=240, hop=40, window='hann')])
@pytest.mark.xfail(raises=casasid.ParamError)
def test_frameparams_invalid(kwargs):
    casasid.FrameParams(**kwargs)


def test_frameparams_defaults():
    params = casasid.FrameParams.from_ms(8000, 30, 5)
    assert (params.frame_len, params.hop, params.fft_size) == (240, 40, 256)
    assert params.is_cola()

    mfcc = casasid.FrameParams.from_overlap(8000, 20, 0.3125)
    assert (mfcc.frame_len, mfcc.hop, mfcc.fft_size) == (160, 110, 256)


def test_pre_emphasize():
    impulse = casasid.AudioClip([1.0, 0.0, 0.0], 8000)
    ap_(casasid.pre_emphasize(impulse, 0.97).samples, [1.0, -0.97, 0.0], atol=1e-12)

    ones = casasid.AudioClip([1.0, 1.0, 1.0], 8000)
    ap_(casasid.pre_emphasize(ones, 0.97).samples, [1.0, 0.03, 0.03], atol=1e-12)

    assert casasid.pre_emphasize(ones, 0.0) is ones


@pytest.mark.parametrize('coeff', [-0.1, 1.0])
@pytest.mark.xfail(raises=casasid.ParamError)
def test_pre_emphasize_bad(coeff):
    casasid.pre_emphasize(casasid.AudioClip([1.0, 0.0], 8000), coeff)


def test_frame_signal_count():
    params = casasid.FrameParams.from_overlap(8000, 20, 0.3125, window='rectangular')
    y = np.arange(480, dtype=float)
    frames = casasid.frame_signal(casasid.AudioClip(y, 8000), params)

    assert frames.shape == (3, 160)
    assert frames[:, 0].tolist() == [0.0, 110.0, 220.0]


@pytest.mark.parametrize('n', [240, 241, 279, 280, 1000, 1023])
@pytest.mark.parametrize('hop', [1, 40, 110, 240])
def test_frame_count_formula(n, hop):
    params = casasid.FrameParams(240, hop)
    frames = casasid.frame_signal(casasid.AudioClip(np.ones(n), 8000), params)
    assert len(frames) == (n - 240) // hop + 1 == params.n_frames(n)


def test_frame_signal_short():
    params = casasid.FrameParams(240, 40)
    frames = casasid.frame_signal(casasid.AudioClip(np.ones(100), 8000), params)
    assert frames.shape == (0, 240)


def test_frame_signal_window():
    params = casasid.FrameParams(160, 80, window='rectangular')
    frames = casasid.frame_signal(casasid.AudioClip(np.ones(320), 8000), params)
    assert np.array_equal(frames, np.ones((3, 160)))

    hamming = casasid.frame_signal(casasid.AudioClip(np.ones(320), 8000),
                                   params.replace(window='hamming'))
    ap_(hamming[0], params.replace(window='hamming').get_window())


def test_stft_zero():
    spec = casasid.stft(casasid.AudioClip(np.zeros(800), 8000), casasid.FrameParams())
    assert spec.shape == (15, 129)
    assert not np.any(spec.bins)


def test_stft_cosine_bin():
    n_fft, k0 = 256, 19
    params = casasid.FrameParams(n_fft, n_fft, window='rectangular')
    y = np.cos(2 * np.pi * k0 * np.arange(n_fft) / n_fft)
    spec = casasid.stft(casasid.AudioClip(y, 8000), params)

    mag = np.abs(spec.bins[0])
    assert np.argmax(mag) == k0
    others = np.delete(mag, k0)
    assert np.max(others) < 1e-9 * mag[k0]
    ap_(spec.frequencies()[k0], k0 * 8000.0 / n_fft)


def test_stft_parseval(noise):
    params = casasid.FrameParams()
    frames = casasid.frame_signal(noise, params)
    spec = casasid.stft(noise, params)

    weight = np.full(spec.shape[1], 2.0)
    weight[0] = weight[-1] = 1.0
    lhs = np.sum(frames ** 2, axis=1)
    rhs = np.sum(weight * np.abs(spec.bins) ** 2, axis=1) / params.fft_size
    ap_(lhs, rhs, rtol=1e-9, atol=0)


def test_stft_linearity(noise):
    rng = np.random.RandomState(3)
    other = casasid.AudioClip(rng.randn(len(noise)), 8000)
    params = casasid.FrameParams()

    combined = casasid.AudioClip(2.0 * noise.samples - 0.5 * other.samples, 8000)
    lhs = casasid.stft(combined, params).bins
    rhs = 2.0 * casasid.stft(noise, params).bins - 0.5 * casasid.stft(other, params).bins
    assert np.max(np.abs(lhs - rhs)) < 1e-9


@pytest.mark.parametrize('frame_len,hop', [(240, 40), (240, 120), (512, 64), (160, 80)])
def test_istft_roundtrip(noise, frame_len, hop):
    params = casasid.FrameParams(frame_len, hop)
    spec = casasid.stft(noise, params)
    out = casasid.istft_overlap_add(spec)

    assert len(out) == len(noise)
    last = (spec.n_frames - 1) * hop + frame_len
    interior = slice(frame_len, last - frame_len)
    err = np.max(np.abs(out.samples[interior] - noise.samples[interior]))
    assert err < 1e-6 * np.max(np.abs(noise.samples[interior]))


def test_istft_identity_mask(noise):
    spec = casasid.stft(noise, casasid.FrameParams())
    plain = casasid.istft_overlap_add(spec)
    masked = casasid.istft_overlap_add(spec.with_bins(spec.bins * np.ones(spec.shape)))
    assert np.array_equal(plain.samples, masked.samples)


def test_istft_zero():
    spec = casasid.stft(casasid.AudioClip(np.zeros(800), 8000), casasid.FrameParams())
    assert not np.any(casasid.istft_overlap_add(spec).samples)


@pytest.mark.xfail(raises=casasid.ConfigError)
def test_istft_not_cola(noise):
    params = casasid.FrameParams(240, 70)
    casasid.istft_overlap_add(casasid.stft(noise, params))


@pytest.mark.xfail(raises=casasid.ShapeError)
def test_spectrogram_shape():
    casasid.Spectrogram(np.zeros((3, 100), dtype=complex), casasid.FrameParams(), 8000, 400)


def _band_limited_train(f0, duration=1.0, sr=8000):
    # every harmonic of f0 below Nyquist, no jitter
    return casasid.synth_speaker(f0, [], duration, sr, seed=0, jitter=0.0)


@pytest.mark.parametrize('f0, frame_len', [(60.0, 480), (100.0, 240), (150.0, 240),
                                           (220.0, 240), (350.0, 240)])
def test_pitch_pulse_train(f0, frame_len):
    track = casasid.estimate_pitch(_band_limited_train(f0), casasid.FrameParams(frame_len, 40))

    interior = track.f0[1:-1]
    assert np.all(np.isfinite(interior))
    assert np.max(np.abs(interior - f0)) <= max(2.0, 0.02 * f0)


def test_pitch_low_nccf():
    # one 60 Hz period is most of a 240-sample frame
    track = casasid.estimate_pitch(_band_limited_train(60.0), casasid.FrameParams(240, 40),
                                   normalize='nccf')
    ap_(track.f0[1:-1], 60.0, atol=2.0)


def _single_frame_train():
    y = np.zeros(240)
    y[::80] = 1.0
    return y - y.mean()


def test_pitch_zero_lag_normalization():
    x = _single_frame_train()
    acf = np.correlate(x, x, mode='full')[len(x) - 1:]

    track = casasid.estimate_pitch(casasid.AudioClip(x, 8000), casasid.FrameParams(240, 40))
    assert track.n_frames == 1
    ap_(track.strength[0], acf[80] / acf[0])
    ap_(track.f0[0], 100.0, atol=1.0)


def test_pitch_nccf_normalization():
    x = _single_frame_train()
    acf = np.correlate(x, x, mode='full')[len(x) - 1:]
    nccf = acf[80] / np.sqrt(np.sum(x[:160] ** 2) * np.sum(x[80:] ** 2))

    track = casasid.estimate_pitch(casasid.AudioClip(x, 8000), casasid.FrameParams(240, 40),
                                   normalize='nccf')
    ap_(track.strength[0], nccf)
    assert track.strength[0] > acf[80] / acf[0]


@pytest.mark.xfail(raises=casasid.ParamError)
def test_pitch_bad_normalization(noise):
    casasid.estimate_pitch(noise, casasid.FrameParams(), normalize='amdf')


def test_pitch_impulse_train():
    y = np.zeros(8000)
    y[::80] = 1.0
    track = casasid.estimate_pitch(casasid.AudioClip(y, 8000), casasid.FrameParams(240, 40))
    ap_(track.f0[1:-1], 100.0, atol=2.0)


def test_pitch_sine():
    t = np.arange(8000) / 8000.0
    clip = casasid.AudioClip(0.5 * np.sin(2 * np.pi * 200 * t), 8000)
    track = casasid.estimate_pitch(clip, casasid.FrameParams(240, 40))
    ap_(track.f0[1:-1], 200.0, atol=2.0)


def test_pitch_noise_unvoiced(noise):
    track = casasid.estimate_pitch(noise, casasid.FrameParams(240, 40), voicing_threshold=0.5)
    assert np.mean(~track.voiced) >= 0.9
    assert len(track.times()) == track.n_frames


def test_pitch_track_frames_match_stft(noise):
    params = casasid.FrameParams(240, 40)
    track = casasid.estimate_pitch(noise, params)
    assert track.n_frames == casasid.stft(noise, params).n_frames

    doc = track.to_dict()
    assert len(doc['f0']) == track.n_frames
    assert all(f is None or 50 <= f <= 400 for f in doc['f0'])


@pytest.mark.parametrize('band', [(0.0, 400.0), (400.0, 100.0), (50.0, 4000.0)])
@pytest.mark.xfail(raises=casasid.ParamError)
def test_pitch_bad_band(noise, band):
    casasid.estimate_pitch(noise, casasid.FrameParams(), band=band)
