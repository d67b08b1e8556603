#!/usr/bin/env python
# -*- encoding: utf-8 -*-
'''Command-line interface tests'''

import json
import os

import numpy as np

import casasid
from casasid.cli import main

import pytest


@pytest.fixture(scope='module')
def config_path(tmp_path_factory, config):
    path = str(tmp_path_factory.mktemp('cli') / 'config.json')
    with open(path, 'w') as fdesc:
        json.dump(config.to_dict(), fdesc)
    return path


@pytest.fixture(scope='module')
def model_dir(tmp_path_factory, manifest_path, config_path):
    directory = str(tmp_path_factory.mktemp('cli') / 'model')
    assert main(['-q', 'train', manifest_path, directory, '--config', config_path]) == 0
    return directory


@pytest.fixture(scope='module')
def wav(manifest_path):
    entries = casasid.load_manifest(manifest_path)
    return [e for e in entries if e.split == 'test'][0]


def test_synth(tmp_path):
    out_dir = str(tmp_path / 'corpus')
    assert main(['-q', 'synth', out_dir, '--speakers', '4', '--emotions', '2',
                 '--utterances', '6']) == 0

    entries = casasid.load_manifest(os.path.join(out_dir, 'manifest.jsonl'))
    assert len(entries) == 48
    assert sum(e.split == 'train' for e in entries) == 24
    assert all(os.path.isfile(e.path) for e in entries)


def test_features(tmp_path, wav):
    output = str(tmp_path / 'features.bin')
    assert main(['-q', 'features', wav.path, output]) == 0

    with open(output + '.json') as fdesc:
        assert json.load(fdesc)['cols'] == 32
    features = casasid.read_features(output)
    assert np.array_equal(features.values,
                          casasid.mfcc_features(casasid.read_wav(wav.path)).values)


def test_features_jsonl(tmp_path, wav):
    output = str(tmp_path / 'features.jsonl')
    assert main(['-q', 'features', wav.path, output, '--format', 'jsonl']) == 0
    assert casasid.read_features(output).n_features == 32


def test_features_too_short(tmp_path):
    path = str(tmp_path / 'short.wav')
    casasid.write_wav(casasid.AudioClip(0.1 * np.ones(100), 8000), path)
    assert main(['-q', 'features', path, str(tmp_path / 'out.bin')]) == 4


def test_missing_input(tmp_path):
    assert main(['-q', 'features', str(tmp_path / 'nothing.wav'), str(tmp_path / 'x.bin')]) == 2


def test_usage_errors(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(['features', '--bogus'])
    assert exc.value.code == 3

    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 3


@pytest.mark.parametrize('argv', [['--help'], ['train', '--help'], ['--version']])
def test_help(argv, capsys):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == 0
    assert capsys.readouterr().out


def test_segregate(tmp_path, wav):
    output = str(tmp_path / 'clean.wav')
    diag_dir = str(tmp_path / 'diag')
    assert main(['-q', 'segregate', wav.path, output, '--dump-diagnostics', diag_dir]) == 0

    clip = casasid.read_wav(output)
    assert len(clip) == len(casasid.read_wav(wav.path))

    for name in ['ibm.bin', 'ibm.json', 'fmask.json', 'pitch.json', 'energies.json',
                 'onsets.json']:
        assert os.path.isfile(os.path.join(diag_dir, name))

    with open(os.path.join(diag_dir, 'ibm.json')) as fdesc:
        header = json.load(fdesc)
    assert os.path.getsize(os.path.join(diag_dir, 'ibm.bin')) == header['rows'] * header['cols']

    with open(os.path.join(diag_dir, 'fmask.json')) as fdesc:
        fmask = json.load(fdesc)
    assert len(fmask['gains']) == header['cols']
    assert fmask['passthrough'] in (True, False)


def test_train_identify(model_dir, wav, capsys):
    assert sorted(os.listdir(model_dir)) == ['cnn.bin', 'cnn.json', 'gmm_bank.json',
                                             'system.json']
    capsys.readouterr()

    assert main(['-q', 'identify', wav.path, model_dir]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert set(doc) == {'speaker', 'emotion', 'confidence'}
    assert doc['speaker'].startswith('spk')

    assert main(['-q', 'identify', wav.path, model_dir, '--mode', 'gmm_only',
                 '--diagnostics']) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc['mode'] == 'gmm_only'
    assert len(doc['likelihoods']['keys']) == 6


def test_identify_matches_library(model_dir, wav, capsys):
    capsys.readouterr()
    assert main(['-q', 'identify', wav.path, model_dir]) == 0
    doc = json.loads(capsys.readouterr().out)

    result = casasid.identify(casasid.read_wav(wav.path), casasid.load_system(model_dir))
    assert doc == json.loads(json.dumps(result.to_dict()))


def test_identify_corrupt_bundle(tmp_path, model, wav):
    directory = str(tmp_path / 'bundle')
    casasid.save_system(model, directory)
    with open(os.path.join(directory, 'cnn.bin'), 'ab') as fdesc:
        fdesc.write(b'\x00')
    assert main(['-q', 'identify', wav.path, directory]) == 2

    path = os.path.join(directory, 'system.json')
    with open(path) as fdesc:
        header = json.load(fdesc)
    header['format_version'] = 2
    with open(path, 'w') as fdesc:
        json.dump(header, fdesc)
    assert main(['-q', 'identify', wav.path, directory]) == 3


def test_evaluate(tmp_path, manifest_path, model_dir, config_path, capsys):
    output = str(tmp_path / 'report.json')
    trials = str(tmp_path / 'trials.jsonl')
    assert main(['-q', 'evaluate', manifest_path, model_dir, '--config', config_path,
                 '--modes', 'gmm_only,gmm_cnn', '--output', output, '--trials', trials]) == 0
    assert 'gmm_cnn' in capsys.readouterr().out

    with open(output) as fdesc:
        report = json.load(fdesc)
    assert set(report['table']) == {'gmm_only', 'gmm_cnn'}
    assert report['table']['gmm_only']['cost_ratio'] == 1.0
    assert report['comparison']['modes'] == ['gmm_only', 'gmm_cnn']

    for mode in ['gmm_only', 'gmm_cnn']:
        rescored = casasid.rescore(str(tmp_path / 'trials.{}.jsonl'.format(mode)))
        assert rescored.sid == report['table'][mode]['sid']


def test_evaluate_bad_mode(manifest_path, model_dir):
    assert main(['-q', 'evaluate', manifest_path, model_dir, '--modes', 'vote']) == 4


def test_config_defaults(capsys):
    assert main(['-q', 'config', '--print-defaults']) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc == json.loads(json.dumps(casasid.SystemConfig().to_dict()))


def test_config_file(config_path, config, capsys):
    assert main(['-q', 'config', '--config', config_path]) == 0
    assert casasid.SystemConfig.from_dict(json.loads(capsys.readouterr().out)) == config


def test_config_invalid(tmp_path):
    path = str(tmp_path / 'config.json')
    with open(path, 'w') as fdesc:
        json.dump(dict(learning_rate=0.1), fdesc)
    assert main(['-q', 'config', '--config', path]) == 3

    with open(path, 'w') as fdesc:
        json.dump(dict(mfcc=dict(n_ceps=8)), fdesc)
    assert main(['-q', 'config', '--config', path]) == 3
