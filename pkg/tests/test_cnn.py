#!/usr/bin/env python
# -*- encoding: utf-8 -*-
'''Convolutional network and gating tests'''

import json
import logging
import os

import numpy as np

import casasid

import pytest


def ap_(a, b, msg=None, rtol=1e-5, atol=1e-5):
    """Shorthand for 'assert np.allclose(a, b, rtol, atol), "%r != %r" % (a, b)
    """
    if not np.allclose(a, b, rtol=rtol, atol=atol):
        raise AssertionError(msg or "{} != {}".format(a, b))


TINY = dict(input_shape=(6, 6), blocks=((3, 3, 2, 1, 2),), fc=(6,), n_classes=3)


def _toy_data(n_per_class=20, seed=0):
    """Class c lights up rows 2c and 2c+1 of a noisy 6x6 patch"""
    rng = np.random.RandomState(seed)
    patches, labels = [], []
    for c in range(3):
        for _ in range(n_per_class):
            x = 0.3 * rng.randn(6, 6)
            x[2 * c: 2 * c + 2] += 1.0
            patches.append(x)
            labels.append(c)
    return np.array(patches), np.array(labels)


@pytest.fixture(scope='module')
def toy():
    return _toy_data()


@pytest.fixture(scope='module')
def trained(toy):
    patches, labels = toy
    spec = casasid.CnnSpec(**TINY)
    hyper = casasid.TrainHyper(lr=0.02, epochs=40, batch_size=8, seed=1)
    return casasid.train_cnn(patches, labels, spec, hyper, classes=['a', 'b', 'c'])


def _numeric_check(model, patches, labels, tags=None, h=1e-5):
    _, grads = casasid.cnn_loss_and_gradients(patches, labels, model, tags)
    worst = 0.0
    for p, g in zip(model.params, grads):
        assert g.shape == p.shape
        for idx in np.ndindex(*p.shape):
            orig = p[idx]
            p[idx] = orig + h
            up, _ = casasid.cnn_loss_and_gradients(patches, labels, model, tags)
            p[idx] = orig - h
            down, _ = casasid.cnn_loss_and_gradients(patches, labels, model, tags)
            p[idx] = orig
            num = (up - down) / (2 * h)
            err = abs(num - g[idx]) / max(abs(num) + abs(g[idx]), 1e-4)
            worst = max(worst, err)
    return worst


def test_spec_default_shapes():
    spec = casasid.CnnSpec()
    assert spec.layer_shapes() == [(8, 15, 15), (16, 6, 6), (32, 2, 2), (32, 1, 1)]
    assert spec.flat_size() == 32
    assert spec.n_params() == 9186


def test_spec_with_tags():
    spec = casasid.CnnSpec(n_classes=5, use_tags=True)
    shapes = spec.param_shapes()
    assert shapes[8] == (32 + 5, 64)
    assert shapes[-2] == (64, 5)


@pytest.mark.parametrize('kwargs', [dict(input_shape=(4, 4)), dict(n_classes=1),
                                    dict(blocks=((3, 3, 8, 1),)), dict(fc=(0,)),
                                    dict(input_shape=(0, 32))])
@pytest.mark.xfail(raises=casasid.ParamError)
def test_spec_invalid(kwargs):
    casasid.CnnSpec(**kwargs)


@pytest.mark.parametrize('kwargs', [dict(lr=0), dict(epochs=-1), dict(batch_size=0),
                                    dict(momentum=1.0)])
@pytest.mark.xfail(raises=casasid.ParamError)
def test_hyper_invalid(kwargs):
    casasid.TrainHyper(**kwargs)


@pytest.mark.parametrize('n,k', [(1, 2), (4, 2), (8, 2), (9, 3), (20, 5)])
def test_gating_default_k(n, k):
    assert casasid.GatingConfig().top_k(n) == k


@pytest.mark.parametrize('kwargs', [dict(mode='soft'), dict(k=0), dict(theta=-1.0)])
@pytest.mark.xfail(raises=casasid.ParamError)
def test_gating_invalid(kwargs):
    casasid.GatingConfig(**kwargs)


def test_init_cnn_deterministic():
    spec = casasid.CnnSpec(**TINY)
    a = casasid.init_cnn(spec, 3)
    b = casasid.init_cnn(spec, 3)
    assert a == b
    assert a.classes == ['0', '1', '2']
    assert not np.any(a.params[1])
    assert 'CnnModel(n_params=' in repr(a)


@pytest.mark.xfail(raises=casasid.ShapeError)
def test_model_bad_params():
    spec = casasid.CnnSpec(**TINY)
    casasid.CnnModel(spec, [np.zeros(3)])


def test_logits_by_hand():
    spec = casasid.CnnSpec(input_shape=(4, 4), blocks=((1, 1, 1, 1, 2),), fc=(), n_classes=2)
    params = [np.full((1, 1, 1, 1), 2.0), np.array([-1.0]),
              np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [-1.0, 2.0]]),
              np.array([0.5, -0.5])]
    model = casasid.CnnModel(spec, params)

    x = np.arange(16.0).reshape(4, 4) / 10.0
    # pooled relu(2x - 1) is [0, 0.4, 1.6, 2.0]
    ap_(casasid.cnn_logits(x, model), [0.1, 5.5], atol=1e-12)

    probs = casasid.cnn_forward(x, model)
    ap_(probs, np.exp([0.1, 5.5]) / np.sum(np.exp([0.1, 5.5])), atol=1e-12)

    batch = casasid.cnn_forward(np.stack([x, x]), model)
    assert batch.shape == (2, 2)
    ap_(batch[1], probs)


def test_forward_sums_to_one(toy):
    model = casasid.init_cnn(casasid.CnnSpec(**TINY), 0)
    probs = casasid.cnn_forward(toy[0], model)
    assert probs.shape == (60, 3)
    ap_(probs.sum(axis=1), 1.0)
    assert np.all(probs >= 0)


@pytest.mark.xfail(raises=casasid.ShapeError)
def test_forward_bad_patch():
    casasid.cnn_forward(np.zeros((5, 6)), casasid.init_cnn(casasid.CnnSpec(**TINY), 0))


@pytest.mark.parametrize('seed', range(20))
def test_gradients_numeric(seed):
    model = casasid.init_cnn(casasid.CnnSpec(**TINY), seed)
    model.params[1][:] = 0.1
    model.params[3][:] = 0.1
    patches, labels = _toy_data(n_per_class=2, seed=100 + seed)
    assert _numeric_check(model, patches, labels) < 1e-4


@pytest.mark.parametrize('seed', range(20))
def test_gradients_numeric_tags(seed):
    spec = casasid.CnnSpec(use_tags=True, **TINY)
    model = casasid.init_cnn(spec, seed)
    model.params[3][:] = 0.1
    patches, labels = _toy_data(n_per_class=2, seed=200 + seed)
    tags = np.random.RandomState(seed).randn(len(patches), 3)
    assert _numeric_check(model, patches, labels, tags) < 1e-4


def test_loss_uniform():
    spec = casasid.CnnSpec(**TINY)
    model = casasid.init_cnn(spec, 0)
    for p in model.params:
        p[...] = 0.0
    loss, _ = casasid.cnn_loss_and_gradients(np.zeros((2, 6, 6)), [0, 2], model)
    ap_(loss, np.log(3.0))


@pytest.mark.parametrize('labels', [[0, 3], [-1, 0], [0.5, 1]])
@pytest.mark.xfail(raises=casasid.LabelError)
def test_loss_bad_labels(toy, labels):
    model = casasid.init_cnn(casasid.CnnSpec(**TINY), 0)
    casasid.cnn_loss_and_gradients(toy[0][:2], labels, model)


@pytest.mark.xfail(raises=casasid.ParamError)
def test_loss_needs_tags(toy):
    model = casasid.init_cnn(casasid.CnnSpec(use_tags=True, **TINY), 0)
    casasid.cnn_loss_and_gradients(toy[0][:2], [0, 1], model)


def test_train_cnn(toy, trained):
    patches, labels = toy
    trace = trained.meta['loss_trace']

    assert len(trace) == 41
    assert trace[-1] < 0.5 * trace[0]
    assert trained.meta['final_loss'] == trace[-1]
    assert trained.classes == ['a', 'b', 'c']

    predicted = np.argmax(casasid.cnn_forward(patches, trained), axis=1)
    assert np.mean(predicted == labels) >= 0.9


def test_train_cnn_deterministic(toy, trained):
    patches, labels = toy
    hyper = casasid.TrainHyper(lr=0.02, epochs=40, batch_size=8, seed=1)
    again = casasid.train_cnn(patches, labels, casasid.CnnSpec(**TINY), hyper,
                              classes=['a', 'b', 'c'])
    assert again == trained


def test_train_cnn_normalizes(toy, trained):
    ap_(trained.input_mean, toy[0].mean(axis=(0, 2)))
    assert np.all(trained.input_std > 0)


def test_train_cnn_zero_epochs(toy):
    spec = casasid.CnnSpec(**TINY)
    model = casasid.train_cnn(toy[0], toy[1], spec, casasid.TrainHyper(epochs=0, seed=3),
                              classes=['a', 'b', 'c'])
    assert len(model.meta['loss_trace']) == 1
    assert model == casasid.init_cnn(spec, 3, classes=['a', 'b', 'c'])
    assert np.array_equal(model.input_mean, np.zeros(6))
    assert np.array_equal(model.input_std, np.ones(6))


@pytest.mark.xfail(raises=casasid.DataError)
def test_train_cnn_missing_class(toy):
    patches, labels = toy
    keep = labels < 2
    casasid.train_cnn(patches[keep], labels[keep], casasid.CnnSpec(**TINY))


def test_train_cnn_divergence(toy, monkeypatch):
    def nan_loss(patches, labels, model, tags=None):
        return float('nan'), [np.zeros_like(p) for p in model.params]

    monkeypatch.setattr(casasid.cnn, 'cnn_loss_and_gradients', nan_loss)
    with pytest.raises(casasid.DivergenceError, match='learning rate'):
        casasid.train_cnn(toy[0], toy[1], casasid.CnnSpec(**TINY), casasid.TrainHyper(epochs=1))


def test_gate_topk():
    probs = np.array([0.1, 0.2, 0.3, 0.4])
    scores = np.array([-1.0, -5.0, -2.0, -9.0])

    gated = casasid.gate_with_tags(probs, scores, casasid.GatingConfig('topk', k=2))
    ap_(gated, [0.25, 0.0, 0.75, 0.0])

    one = casasid.gate_with_tags(probs, scores, casasid.GatingConfig('topk', k=1))
    ap_(one, [1.0, 0.0, 0.0, 0.0])

    everything = casasid.gate_with_tags(probs, scores, casasid.GatingConfig('topk', k=10))
    ap_(everything, probs)


def test_gate_threshold():
    probs = np.array([0.1, 0.2, 0.3, 0.4])
    scores = np.array([-1.0, -5.0, -2.5, -9.0])
    gated = casasid.gate_with_tags(probs, scores, casasid.GatingConfig('threshold', theta=2.0))
    ap_(gated, [0.25, 0.0, 0.75, 0.0])


def test_gate_off():
    probs = np.array([0.7, 0.3])
    assert np.array_equal(casasid.gate_with_tags(probs, [0.0, -1.0],
                                                 casasid.GatingConfig('off')), probs)


def test_gate_fallback(caplog):
    with caplog.at_level(logging.WARNING, logger='casasid.cnn'):
        gated = casasid.gate_with_tags([0.0, 1.0], [0.0, -10.0], casasid.GatingConfig('topk', k=1))
    ap_(gated, [1.0, 0.0])
    assert 'Gating removed every speaker' in caplog.text


def test_gate_likelihood_vector():
    lv = casasid.LikelihoodVector([('a', 'angry'), ('a', 'neutral'), ('b', 'neutral'),
                                   ('c', 'neutral')], [-3.0, -1.0, -2.0, -8.0])
    gated = casasid.gate_with_tags([0.2, 0.3, 0.5], lv, casasid.GatingConfig('topk', k=2),
                                   speakers=['a', 'b', 'c'])
    ap_(gated, [0.4, 0.6, 0.0])

    with pytest.raises(casasid.ParamError):
        casasid.gate_with_tags([0.2, 0.3, 0.5], lv)


@pytest.mark.xfail(raises=casasid.ShapeError)
def test_gate_shape():
    casasid.gate_with_tags([0.5, 0.5], [0.0, 1.0, 2.0])


def test_extract_patches():
    values = np.arange(30.0).reshape(10, 3)
    patches, padded = casasid.extract_patches(values, 4, hop=2)

    assert not padded
    assert patches.shape == (4, 3, 4)
    assert np.array_equal(patches[1], values[2:6].T)

    default, _ = casasid.extract_patches(values, 4)
    assert len(default) == 4


def test_extract_patches_short():
    values = np.arange(6.0).reshape(2, 3)
    patches, padded = casasid.extract_patches(values, 4)

    assert padded
    assert patches.shape == (1, 3, 4)
    assert np.array_equal(patches[0][:, 3], values[1])


@pytest.mark.xfail(raises=casasid.DataError)
def test_extract_patches_empty():
    casasid.extract_patches(np.zeros((0, 3)), 4)


@pytest.mark.parametrize('c', [0, 1, 2])
def test_classify(trained, c):
    rng = np.random.RandomState(10 + c)
    features = 0.3 * rng.randn(20, 6)
    features[:, 2 * c: 2 * c + 2] += 1.0

    result = casasid.classify(features, trained, np.zeros(3), casasid.GatingConfig('off'))
    assert result.speaker == ['a', 'b', 'c'][c]
    assert result.n_windows == 5
    assert not result.padded
    ap_(result.probs.sum(), 1.0)
    assert result.confidence == result.probs.max()


def test_classify_gated_topk_one(trained):
    rng = np.random.RandomState(0)
    features = 0.3 * rng.randn(20, 6)
    features[:, 0:2] += 1.0

    # the GMM scores disagree with the network; top-1 gating follows them
    result = casasid.classify(features, trained, [-9.0, -1.0, -5.0],
                              casasid.GatingConfig('topk', k=1))
    assert result.speaker == 'b'
    ap_(result.confidence, 1.0)


def test_classify_short(trained, caplog):
    with caplog.at_level(logging.WARNING, logger='casasid.cnn'):
        result = casasid.classify(np.ones((3, 6)), trained, np.zeros(3))
    assert result.padded
    assert result.n_windows == 1
    assert 'padded' in caplog.text


@pytest.mark.xfail(raises=casasid.ShapeError)
def test_classify_bad_features(trained):
    casasid.classify(np.ones((20, 5)), trained, np.zeros(3))


def test_cnn_io(tmp_path, trained):
    json_path, bin_path = str(tmp_path / 'cnn.json'), str(tmp_path / 'cnn.bin')
    digest = casasid.save_cnn(trained, json_path, bin_path)

    assert len(digest) == 64
    assert os.path.getsize(bin_path) == 8 * (trained.spec.n_params() + 12)

    loaded = casasid.load_cnn(json_path, bin_path)
    assert loaded == trained
    assert loaded.meta['loss_trace'] == trained.meta['loss_trace']


def test_cnn_io_tampered(tmp_path, trained):
    json_path, bin_path = str(tmp_path / 'cnn.json'), str(tmp_path / 'cnn.bin')
    casasid.save_cnn(trained, json_path, bin_path)

    with open(bin_path, 'r+b') as fdesc:
        fdesc.seek(16)
        byte = fdesc.read(1)
        fdesc.seek(16)
        fdesc.write(bytes([byte[0] ^ 0xFF]))

    with pytest.raises(casasid.CorruptModelError):
        casasid.load_cnn(json_path, bin_path)


def test_cnn_io_missing(tmp_path, trained):
    json_path, bin_path = str(tmp_path / 'cnn.json'), str(tmp_path / 'cnn.bin')
    casasid.save_cnn(trained, json_path, bin_path)
    os.remove(bin_path)

    with pytest.raises(casasid.CorruptModelError):
        casasid.load_cnn(json_path, bin_path)


def test_cnn_io_version(tmp_path, trained):
    json_path, bin_path = str(tmp_path / 'cnn.json'), str(tmp_path / 'cnn.bin')
    casasid.save_cnn(trained, json_path, bin_path)

    with open(json_path) as fdesc:
        header = json.load(fdesc)
    header['format_version'] = 99
    with open(json_path, 'w') as fdesc:
        json.dump(header, fdesc)

    with pytest.raises(casasid.VersionError):
        casasid.load_cnn(json_path, bin_path)
