#!/usr/bin/env python
# -*- encoding: utf-8 -*-
'''Shared fixtures: a small synthetic corpus and a quickly trained system'''

import os

import casasid

import pytest


def small_config(**kwargs):
    params = dict(
        gmm=casasid.GmmConfig(n_components=2, max_iter=20, seed=0),
        cnn=casasid.CnnSpec(input_shape=(32, 16), blocks=((3, 3, 4, 1, 2), (3, 3, 8, 1, 2)),
                            fc=(16,)),
        train=casasid.TrainHyper(lr=0.01, epochs=4, batch_size=16, seed=0),
        casa_train=False,
        casa_test=False,
    )
    params.update(kwargs)
    return casasid.SystemConfig(**params)


@pytest.fixture(scope='session')
def corpus_dir(tmp_path_factory):
    out_dir = str(tmp_path_factory.mktemp('corpus'))
    casasid.make_synthetic_corpus(out_dir, n_speakers=3, n_emotions=2, n_utterances=4, seed=0)
    return out_dir


@pytest.fixture(scope='session')
def manifest_path(corpus_dir):
    return os.path.join(corpus_dir, 'manifest.jsonl')


@pytest.fixture(scope='session')
def config():
    return small_config()


@pytest.fixture(scope='session')
def model(manifest_path, config):
    return casasid.train_system(manifest_path, config)
