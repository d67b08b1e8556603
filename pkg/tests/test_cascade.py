#!/usr/bin/env python
# -*- encoding: utf-8 -*-
'''Cascade training, identification and bundle tests'''

import json
import os

import numpy as np

import casasid

import pytest


@pytest.fixture(scope='module')
def entries(manifest_path):
    return casasid.load_manifest(manifest_path)


@pytest.fixture(scope='module')
def held_out(entries):
    return [(e, casasid.read_wav(e.path)) for e in entries if e.split == 'test']


@pytest.fixture(scope='module')
def bundle(tmp_path_factory, model):
    directory = str(tmp_path_factory.mktemp('bundle'))
    casasid.save_system(model, directory)
    return directory


def test_config_defaults():
    config = casasid.SystemConfig()
    assert config.cnn.input_shape[0] == config.mfcc.n_features
    assert config.sample_rate == 8000


def test_config_feature_mismatch():
    with pytest.raises(casasid.ConfigError, match='MFCC'):
        casasid.SystemConfig(cnn=casasid.CnnSpec(input_shape=(24, 32)))


@pytest.mark.parametrize('data', [dict(learning_rate=0.1), dict(gmm=dict(n_components=0)),
                                  dict(sample_rate=-1), dict(train_hop=0)])
@pytest.mark.xfail(raises=casasid.ConfigError)
def test_config_from_dict_invalid(data):
    casasid.SystemConfig.from_dict(data)


def test_config_dict_roundtrip(config):
    doc = json.loads(json.dumps(config.to_dict()))
    assert casasid.SystemConfig.from_dict(doc) == config


def test_config_load(tmp_path, config):
    path = str(tmp_path / 'config.json')
    with open(path, 'w') as fdesc:
        json.dump(config.to_dict(), fdesc)
    assert casasid.SystemConfig.load(path) == config

    with open(path, 'w') as fdesc:
        fdesc.write('[1, 2')
    with pytest.raises(casasid.ConfigError):
        casasid.SystemConfig.load(path)

    with pytest.raises(casasid.IoError):
        casasid.SystemConfig.load(str(tmp_path / 'nothing.json'))


def test_train_system(model, entries):
    speakers = sorted({e.speaker_id for e in entries})
    n_train = sum(e.split == 'train' for e in entries)

    assert model.speakers == speakers
    assert model.cnn.classes == speakers
    assert len(model.bank) == 6
    assert model.bank.dim == 32
    assert model.provenance['n_utterances'] == n_train
    assert model.provenance['n_patches'] > n_train
    assert len(model.provenance['manifest_sha256']) == 64
    assert np.all(model.feature_std > 0)
    assert 'SystemModel(speakers=' in repr(model)


def test_train_system_deterministic(model, entries, config):
    again = casasid.train_system(entries, config)
    assert again == model
    assert again.provenance == model.provenance


def test_train_system_seed(entries, config):
    model = casasid.train_system(entries, config, seed=5)
    assert model.provenance['gmm_seed'] == 5
    assert model.provenance['cnn_seed'] == 5


def test_train_system_one_speaker(entries, config):
    single = [e for e in entries if e.speaker_id == entries[0].speaker_id]
    with pytest.raises(casasid.DataError, match='two speakers'):
        casasid.train_system(single, config)


def test_identify(model, held_out):
    for entry, clip in held_out:
        result = casasid.identify(clip, model)

        assert result.speaker in model.speakers
        assert result.emotion in model.bank.emotions(result.speaker)
        assert 0.0 <= result.confidence <= 1.0
        assert result.mode == 'gmm_cnn'
        assert not result.casa
        assert abs(np.sum(result.probs) - 1.0) < 1e-6


def test_identify_diagnostics(model, held_out):
    result = casasid.identify(held_out[0][1], model)

    assert set(result.to_dict()) == {'speaker', 'emotion', 'confidence'}
    doc = result.to_dict(diagnostics=True)
    assert set(doc) == {'speaker', 'emotion', 'confidence', 'casa', 'mode', 'padded', 'probs',
                        'likelihoods'}
    assert len(doc['probs']) == len(model.speakers)
    json.dumps(doc)


def test_identify_gmm_only(model, held_out):
    for _, clip in held_out[:4]:
        result = casasid.identify(clip, model, mode='gmm_only')
        scores = result.speaker_scores()
        assert result.speaker == max(scores, key=scores.get)


def test_identify_top1_follows_gmm(model, held_out):
    config = model.config.replace(gating=casasid.GatingConfig(mode='topk', k=1))
    top1 = casasid.SystemModel(config, model.bank, model.cnn, model.feature_mean,
                               model.feature_std)

    for _, clip in held_out:
        gated = casasid.identify(clip, top1)
        assert gated.speaker == casasid.identify(clip, model, mode='gmm_only').speaker


def test_identify_training_clips(model, entries):
    train = [e for e in entries if e.split == 'train']
    hits = [casasid.identify(casasid.read_wav(e.path), model, mode='gmm_only').speaker
            == e.speaker_id for e in train]
    assert np.mean(hits) >= 2.0 / 3


def test_identify_resamples(model, held_out):
    entry, clip = held_out[0]
    result = casasid.identify(casasid.resample(clip, 16000), model)
    assert result.speaker in model.speakers


def test_identify_with_casa(model, held_out):
    result = casasid.identify(held_out[0][1], model, use_casa=True)
    assert result.casa
    assert result.speaker in model.speakers


def test_identify_short(model):
    with pytest.raises(casasid.InputTooShortError):
        casasid.identify(casasid.AudioClip(0.1 * np.ones(100), 8000), model)


@pytest.mark.xfail(raises=casasid.ParamError)
def test_identify_bad_mode(model, held_out):
    casasid.identify(held_out[0][1], model, mode='vote')


def test_bundle_roundtrip(model, bundle, held_out):
    assert sorted(os.listdir(bundle)) == ['cnn.bin', 'cnn.json', 'gmm_bank.json', 'system.json']

    loaded = casasid.load_system(bundle)
    assert loaded == model
    assert loaded.version == casasid.__version__

    clip = held_out[0][1]
    a, b = casasid.identify(clip, model), casasid.identify(clip, loaded)
    assert a.speaker == b.speaker and a.emotion == b.emotion
    assert np.array_equal(a.probs, b.probs)


def test_bundle_deterministic(model, bundle, tmp_path):
    other = str(tmp_path / 'again')
    casasid.save_system(model, other)
    for name in ['cnn.bin', 'cnn.json', 'gmm_bank.json', 'system.json']:
        with open(os.path.join(bundle, name), 'rb') as a, open(os.path.join(other, name), 'rb') as b:
            assert a.read() == b.read()


def test_bundle_tampered(model, tmp_path):
    directory = str(tmp_path / 'bundle')
    casasid.save_system(model, directory)
    with open(os.path.join(directory, 'cnn.bin'), 'r+b') as fdesc:
        fdesc.seek(16)
        fdesc.write(b'\x00\x01\x02\x03')

    with pytest.raises(casasid.CorruptModelError, match='cnn.bin'):
        casasid.load_system(directory)


def test_bundle_missing_file(model, tmp_path):
    directory = str(tmp_path / 'bundle')
    casasid.save_system(model, directory)
    os.remove(os.path.join(directory, 'gmm_bank.json'))

    with pytest.raises(casasid.CorruptModelError, match='missing'):
        casasid.load_system(directory)

    with pytest.raises(casasid.CorruptModelError):
        casasid.load_system(str(tmp_path))


def test_bundle_version(model, tmp_path):
    directory = str(tmp_path / 'bundle')
    casasid.save_system(model, directory)
    path = os.path.join(directory, 'system.json')
    with open(path) as fdesc:
        header = json.load(fdesc)
    header['format_version'] = 99
    with open(path, 'w') as fdesc:
        json.dump(header, fdesc)

    with pytest.raises(casasid.VersionError):
        casasid.load_system(directory)


def test_system_model_mismatch(model):
    with pytest.raises(casasid.ShapeError):
        casasid.SystemModel(model.config, model.bank, model.cnn, model.feature_mean[:4],
                            model.feature_std)
    with pytest.raises(casasid.ParamError):
        casasid.SystemModel(model.config, model.bank, model.cnn, model.feature_mean,
                            np.zeros_like(model.feature_std))


def test_ablate_decisions(manifest_path, model):
    report = casasid.ablate(manifest_path, modes=['gmm_only', 'gmm_cnn'], model=model)

    assert list(report.table.index) == ['gmm_only', 'gmm_cnn']
    assert report.reference == 'gmm_only'
    assert report.table.loc['gmm_only', 'cost_ratio'] == 1.0
    assert set(report.reports) == {'gmm_only', 'gmm_cnn'}
    assert report.settings['n_test'] == len(report.trials['gmm_cnn'])
    for mode, trials in report.trials.items():
        assert report.table.loc[mode, 'sid'] == casasid.sid_performance(trials)

    assert report.comparison['modes'] == ['gmm_only', 'gmm_cnn']
    json.dumps(report.to_dict())
    assert 'gmm_cnn' in report.to_text()


def test_ablate_casa(manifest_path, model):
    report = casasid.ablate(manifest_path, modes=['casa_on', 'casa_off'], noise='white',
                            ratio=2.0, model=model)

    assert list(report.table.index) == ['casa_on', 'casa_off']
    assert report.reports['casa_on'].config['casa'] is True
    assert report.reports['casa_off'].config['casa'] is False
    assert report.settings['noise'] == 'white'


def test_ablate_speech_interference(manifest_path, model):
    report = casasid.ablate(manifest_path, modes=['gmm_only'], noise='speech', model=model)
    assert report.comparison is None
    assert 0.0 <= report.table.loc['gmm_only', 'sid'] <= 100.0


@pytest.mark.parametrize('kwargs', [dict(modes=['vote']), dict(modes=[]), dict(noise='purple')])
@pytest.mark.xfail(raises=casasid.ParamError)
def test_ablate_invalid(manifest_path, model, kwargs):
    casasid.ablate(manifest_path, model=model, **kwargs)


def test_ablate_no_test_split(entries, model):
    train = [e for e in entries if e.split == 'train']
    with pytest.raises(casasid.DataError, match='test split'):
        casasid.ablate(train, model=model)


def test_ablate_trial_scores_follow_decision(manifest_path, model, held_out):
    report = casasid.ablate(manifest_path, modes=['gmm_only', 'cnn_only', 'gmm_cnn'],
                            model=model)

    clip = held_out[0][1]
    for mode in ['gmm_only', 'cnn_only', 'gmm_cnn']:
        result = casasid.identify(clip, model, mode=mode)
        assert report.trials[mode][0].scores == result.speaker_scores()

    gmm = report.trials['gmm_only'][0].scores
    assert gmm == casasid.identify(clip, model, mode='gmm_only').likelihoods.per_speaker()
    for mode in ['cnn_only', 'gmm_cnn']:
        scores = report.trials[mode][0].scores
        assert set(scores) == set(model.speakers)
        assert np.isclose(sum(scores.values()), 1.0)
        assert scores != gmm


def _auc_or_none(trials):
    try:
        return casasid.macro_roc_auc(trials, sorted({t.true_speaker for t in trials}))
    except casasid.DegenerateError:
        return None


def test_ablate_auc_per_mode(manifest_path, model):
    report = casasid.ablate(manifest_path, modes=['gmm_only', 'cnn_only', 'gmm_cnn'],
                            model=model)

    for mode, trials in report.trials.items():
        assert report.reports[mode].auc == _auc_or_none(trials)
        assert report.table.loc[mode, 'auc'] == report.reports[mode].auc or (
            report.reports[mode].auc is None)


def test_ablate_normality(manifest_path, model):
    report = casasid.ablate(manifest_path, modes=['gmm_only', 'cnn_only'], model=model)

    first, second = (report.trials[m] for m in ['gmm_only', 'cnn_only'])
    cells = sorted({(t.true_speaker, t.true_emotion) for t in first})

    def cell_sid(trials, cell):
        return casasid.sid_performance(
            [t for t in trials if (t.true_speaker, t.true_emotion) == cell])

    diff = [cell_sid(first, c) - cell_sid(second, c) for c in cells]
    try:
        expected = casasid.ks_normality(diff, alpha=0.10).to_dict()
    except (casasid.DataError, casasid.DegenerateError):
        expected = None

    assert report.comparison['normality'] == expected
    json.dumps(report.to_dict())


@pytest.fixture(scope='module')
def desk_manifest(tmp_path_factory):
    out_dir = str(tmp_path_factory.mktemp('desk'))
    casasid.make_synthetic_corpus(out_dir, n_speakers=8, n_emotions=2, n_utterances=10, seed=1)
    return os.path.join(out_dir, 'manifest.jsonl')


@pytest.fixture(scope='module')
def desk_reports(desk_manifest, config):
    config = config.replace(casa_train=True, casa_test=True,
                            train=casasid.TrainHyper(lr=0.01, epochs=8, batch_size=16, seed=0))
    return [casasid.ablate(desk_manifest, config=config,
                           modes=['casa_on', 'casa_off', 'gmm_only', 'gmm_cnn'],
                           noise='white', ratio=2.0, seed=seed)
            for seed in range(5)]


def _per_emotion_sid(trials):
    emotions = sorted({t.true_emotion for t in trials})
    return [casasid.sid_performance([t for t in trials if t.true_emotion == e])
            for e in emotions]


@pytest.mark.slow
def test_casa_helps_in_white_noise(desk_reports):
    on = np.mean([r.table.loc['casa_on', 'sid'] for r in desk_reports])
    off = np.mean([r.table.loc['casa_off', 'sid'] for r in desk_reports])
    assert on >= off

    paired_on = sum((_per_emotion_sid(r.trials['casa_on']) for r in desk_reports), [])
    paired_off = sum((_per_emotion_sid(r.trials['casa_off']) for r in desk_reports), [])
    assert len(paired_on) == 10
    try:
        res = casasid.wilcoxon_signed_rank(paired_on, paired_off)
    except casasid.DegenerateError:
        assert np.allclose(paired_on, paired_off)
    else:
        assert np.sign(res.mean_difference) == np.sign(np.mean(paired_on) - np.mean(paired_off))
        assert res.mean_difference >= 0


@pytest.mark.slow
def test_cascade_beats_gmm_alone(desk_reports):
    cascade = np.mean([r.table.loc['gmm_cnn', 'sid'] for r in desk_reports])
    gmm = np.mean([r.table.loc['gmm_only', 'sid'] for r in desk_reports])
    assert cascade >= gmm
    for report in desk_reports:
        assert report.reference == 'gmm_only'
        assert report.table.loc['gmm_only', 'cost_ratio'] == 1.0
