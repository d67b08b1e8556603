#!/usr/bin/env python
# -*- encoding: utf-8 -*-
"""The GMM -> CNN speaker identification cascade

Training builds one GMM tag per (speaker, talking condition) and a CNN over
speakers; identification scores a query against every tag, lets the CNN
decide among the speakers that survive GMM gating, and then reports the
talking condition of the decided speaker.
"""

import hashlib
import json
import logging
import os
import time

import numpy as np
import pandas as pd
import scipy.special
from joblib import Parallel, delayed

from .base import BaseConfig, _get_rng
from .casa import CasaConfig, segregate
from .cnn import (
    CnnSpec,
    GatingConfig,
    TrainHyper,
    classify,
    extract_patches,
    load_cnn,
    save_cnn,
    train_cnn,
)
from .core import AudioClip, load_manifest, read_wav, resample
from .evaluation import TrialRecord, evaluate, ks_normality, sid_performance, wilcoxon_signed_rank
from .exceptions import (
    ConfigError,
    CorruptModelError,
    DataError,
    DegenerateError,
    EmptyFeatureError,
    FormatError,
    InputTooShortError,
    IoError,
    ParamError,
    ShapeError,
    VersionError,
)
from .gmm import GmmConfig, TagBank, argmax_label, tag_likelihood_vector, train_tag_bank
from .mfcc import MfccConfig, mfcc_features
from .mixing import MixSpec, NOISE_TYPES, mix_noise, noise_generator
from .version import version as __version__

__all__ = [
    "SystemConfig",
    "SystemModel",
    "IdentificationResult",
    "AblationReport",
    "MODES",
    "train_system",
    "identify",
    "save_system",
    "load_system",
    "ablate",
]

logger = logging.getLogger(__name__)

BUNDLE_FORMAT_VERSION = 1

#: Decision modes of `identify`
DECISIONS = ("gmm_only", "cnn_only", "gmm_cnn")

#: Rows `ablate` can produce
MODES = DECISIONS + ("casa_on", "casa_off")

_BUNDLE_FILES = ("gmm_bank.json", "cnn.json", "cnn.bin")


class SystemConfig(BaseConfig):
    """Settings of every stage of the cascade

    Attributes
    ----------
    sample_rate : int
        Clips at other rates are resampled
    casa : CasaConfig
    mfcc : MfccConfig
    gmm : GmmConfig
    cnn : CnnSpec
        ``input_shape[0]`` must equal the MFCC feature dimension;
        ``n_classes`` is set from the training speakers
    train : TrainHyper
    gating : GatingConfig
    casa_train, casa_test : bool
        Segregate clips before feature extraction at training / test time
    train_hop : int > 0
        Frame advance between training patches
    n_jobs : int
        Parallel workers for featurization and tag training
    """

    _NESTED = dict(
        casa=CasaConfig,
        mfcc=MfccConfig,
        gmm=GmmConfig,
        cnn=CnnSpec,
        train=TrainHyper,
        gating=GatingConfig,
    )

    def __init__(
        self,
        sample_rate=8000,
        casa=None,
        mfcc=None,
        gmm=None,
        cnn=None,
        train=None,
        gating=None,
        casa_train=True,
        casa_test=True,
        train_hop=8,
        n_jobs=1,
    ):
        if int(sample_rate) != sample_rate or sample_rate <= 0:
            raise ConfigError("sample_rate must be a positive integer")
        if train_hop < 1:
            raise ConfigError("train_hop must be positive")

        self.sample_rate = int(sample_rate)
        self.casa = casa if casa is not None else CasaConfig()
        self.mfcc = mfcc if mfcc is not None else MfccConfig()
        self.gmm = gmm if gmm is not None else GmmConfig()
        self.cnn = cnn if cnn is not None else CnnSpec()
        self.train = train if train is not None else TrainHyper()
        self.gating = gating if gating is not None else GatingConfig()
        self.casa_train = bool(casa_train)
        self.casa_test = bool(casa_test)
        self.train_hop = int(train_hop)
        self.n_jobs = int(n_jobs)

        if self.cnn.input_shape[0] != self.mfcc.n_features:
            raise ConfigError(
                "CNN input has {} features but MFCC produces {}".format(
                    self.cnn.input_shape[0], self.mfcc.n_features
                )
            )

    @classmethod
    def from_dict(cls, data):
        """Build from a JSON document; unknown keys raise `ConfigError`"""

        data = dict(data or {})
        unknown = set(data) - set(cls._get_param_names())
        if unknown:
            raise ConfigError("unknown configuration key(s) {}".format(sorted(unknown)))

        try:
            for key, sub in cls._NESTED.items():
                if isinstance(data.get(key), dict):
                    data[key] = sub.from_dict(data[key])
            return cls(**data)
        except ConfigError:
            raise
        except (ParamError, TypeError) as exc:
            raise ConfigError(str(exc))

    @classmethod
    def load(cls, path):
        """Read a JSON configuration file"""
        try:
            with open(str(path), "r", encoding="utf-8") as fdesc:
                data = json.load(fdesc)
        except OSError as exc:
            raise IoError("cannot read {}: {}".format(path, exc))
        except ValueError as exc:
            raise ConfigError("malformed configuration {}: {}".format(path, exc))
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a JSON object")
        return cls.from_dict(data)


class SystemModel(object):
    """A trained cascade

    Attributes
    ----------
    config : SystemConfig
    bank : TagBank
    cnn : CnnModel
    feature_mean, feature_std : np.ndarray [shape=(n_features,)]
        Standardization of MFCC frames, estimated on the training set
    provenance : dict
        Manifest hash and seeds
    version : str
    """

    def __init__(self, config, bank, cnn, feature_mean, feature_std, provenance=None, version=None):
        n_features = config.mfcc.n_features
        if bank.dim != n_features:
            raise ShapeError(
                "tag bank dimension {} differs from the feature dimension {}".format(
                    bank.dim, n_features
                )
            )
        if cnn.classes != bank.speakers():
            raise ShapeError("CNN classes do not match the speakers of the tag bank")
        feature_mean = np.asarray(feature_mean, dtype=np.float64)
        feature_std = np.asarray(feature_std, dtype=np.float64)
        if feature_mean.shape != (n_features,) or feature_std.shape != (n_features,):
            raise ShapeError("feature normalization must have one entry per feature")
        if np.any(feature_std <= 0):
            raise ParamError("feature standard deviations must be positive")

        self.config = config
        self.bank = bank
        self.cnn = cnn
        self.feature_mean = feature_mean
        self.feature_std = feature_std
        self.provenance = dict(provenance or {})
        self.version = version or __version__

    @property
    def speakers(self):
        return self.bank.speakers()

    def normalize(self, features):
        """Standardize a feature matrix with the training statistics"""
        values = np.asarray(getattr(features, "values", features), dtype=np.float64)
        return (values - self.feature_mean) / self.feature_std

    def __eq__(self, other):
        if not isinstance(other, SystemModel):
            return NotImplemented
        return (
            self.config == other.config
            and self.bank == other.bank
            and self.cnn == other.cnn
            and np.array_equal(self.feature_mean, other.feature_mean)
            and np.array_equal(self.feature_std, other.feature_std)
        )

    __hash__ = None

    def __repr__(self):
        return "SystemModel(speakers={}, n_tags={}, version={!r})".format(
            self.speakers, len(self.bank), self.version
        )


class IdentificationResult(object):
    """Decision and diagnostics of `identify`

    Attributes
    ----------
    speaker : str
    emotion : str
    confidence : float in [0, 1]
    likelihoods : LikelihoodVector
        GMM scores of every tag
    probs : np.ndarray
        Gated, window-averaged CNN probabilities (GMM posteriors in
        ``gmm_only`` mode), in speaker order
    casa : bool
    mode : str
    padded : bool
        The utterance was shorter than one CNN context window
    classes : list of str or None
        Speaker order of `probs`
    """

    __slots__ = (
        "speaker",
        "emotion",
        "confidence",
        "likelihoods",
        "probs",
        "casa",
        "mode",
        "padded",
        "classes",
    )

    def __init__(self, speaker, emotion, confidence, likelihoods, probs, casa, mode, padded=False,
                 classes=None):
        confidence = float(confidence)
        if not 0 <= confidence <= 1 + 1e-12:
            raise ParamError("confidence must lie in [0, 1]")
        self.speaker = speaker
        self.emotion = emotion
        self.confidence = min(confidence, 1.0)
        self.likelihoods = likelihoods
        self.probs = probs
        self.casa = bool(casa)
        self.mode = mode
        self.padded = bool(padded)
        self.classes = list(classes) if classes is not None else None

    def speaker_scores(self):
        """Per-speaker scores behind the decision.

        GMM log-likelihoods in ``gmm_only`` mode, the gated CNN
        probabilities otherwise.
        """
        if self.mode == "gmm_only" or self.classes is None:
            return self.likelihoods.per_speaker()
        return dict(zip(self.classes, np.asarray(self.probs, dtype=np.float64).tolist()))

    def to_dict(self, diagnostics=False):
        out = dict(speaker=self.speaker, emotion=self.emotion, confidence=self.confidence)
        if diagnostics:
            out.update(
                casa=self.casa,
                mode=self.mode,
                padded=self.padded,
                probs=np.asarray(self.probs).tolist(),
                likelihoods=self.likelihoods.to_dict(),
            )
        return out


def _prepare(clip, sample_rate):
    if clip.sample_rate != sample_rate:
        clip = resample(clip, sample_rate)
    return clip


def _featurize(clip, config, use_casa):
    clip = _prepare(clip, config.sample_rate)
    if len(clip) < config.mfcc.frame_params(clip.sample_rate).frame_len:
        raise InputTooShortError(
            "clip of {} samples is too short for one feature frame".format(len(clip))
        )
    if use_casa:
        clip, _ = segregate(clip, config.casa)
    return mfcc_features(clip, config.mfcc)


def _featurize_entry(entry, config, use_casa):
    try:
        return _featurize(read_wav(entry.path), config, use_casa).values
    except EmptyFeatureError as exc:
        logger.warning("Skipping %s: %s", entry.path, exc)
        return None


def _manifest_digest(entries):
    records = sorted(json.dumps(e.to_dict(), sort_keys=True) for e in entries)
    return hashlib.sha256("\n".join(records).encode("utf-8")).hexdigest()


def _as_entries(manifest):
    if isinstance(manifest, (str, os.PathLike)):
        return load_manifest(manifest)
    return list(manifest)


def train_system(manifest, config=None, seed=None):
    """Train the tag bank and the CNN from the train split of a manifest.

    Parameters
    ----------
    manifest : str or list of ManifestEntry
    config : SystemConfig or None
    seed : int or None
        Overrides the GMM and CNN seeds

    Returns
    -------
    model : SystemModel

    Raises
    ------
    DataError
        With fewer than two speakers, or if a speaker has no usable frames
    """

    config = config or SystemConfig()
    if seed is not None:
        config = config.replace(
            gmm=config.gmm.replace(seed=int(seed)), train=config.train.replace(seed=int(seed))
        )

    entries = [e for e in _as_entries(manifest) if e.split == "train"]
    speakers = sorted({e.speaker_id for e in entries})
    if len(speakers) < 2:
        raise DataError(
            "training needs at least two speakers, found {}".format(len(speakers))
        )

    features = Parallel(n_jobs=config.n_jobs)(
        delayed(_featurize_entry)(e, config, config.casa_train) for e in entries
    )
    usable = [(e, f) for e, f in zip(entries, features) if f is not None]

    for speaker in speakers:
        if not any(e.speaker_id == speaker for e, _ in usable):
            raise DataError("speaker {!r} has no usable training frames".format(speaker))

    stacked = np.vstack([f for _, f in usable])
    feature_mean = stacked.mean(axis=0)
    std = stacked.std(axis=0)
    feature_std = np.where(std > 1e-8, std, 1.0)

    normalized = [(e, (f - feature_mean) / feature_std) for e, f in usable]

    frames = {}
    for entry, values in normalized:
        frames.setdefault((entry.speaker_id, entry.emotion), []).append(values)
    frames = {key: np.vstack(v) for key, v in frames.items()}

    bank = train_tag_bank(frames, config.gmm, n_jobs=config.n_jobs)

    context = config.cnn.input_shape[1]
    patches, labels, tags = [], [], []
    for entry, values in normalized:
        scores = tag_likelihood_vector(values, bank).speaker_scores(speakers)
        windows, _ = extract_patches(values, context, hop=config.train_hop)
        patches.append(windows)
        labels.extend([speakers.index(entry.speaker_id)] * len(windows))
        tags.extend([scores] * len(windows))

    spec = config.cnn.replace(n_classes=len(speakers))
    cnn = train_cnn(
        np.concatenate(patches),
        np.asarray(labels),
        spec,
        config.train,
        tags=np.asarray(tags) if spec.use_tags else None,
        classes=speakers,
    )

    provenance = dict(
        manifest_sha256=_manifest_digest(entries),
        n_utterances=len(usable),
        n_patches=len(labels),
        gmm_seed=config.gmm.seed,
        cnn_seed=config.train.seed,
    )
    logger.info(
        "Trained system: %d speakers, %d tags, %d utterances",
        len(speakers),
        len(bank),
        len(usable),
    )
    return SystemModel(config, bank, cnn, feature_mean, feature_std, provenance)


def identify(clip, model, use_casa=None, mode="gmm_cnn"):
    """Identify the speaker of a clip, then its talking condition.

    Parameters
    ----------
    clip : AudioClip
    model : SystemModel
    use_casa : bool or None
        Segregate before feature extraction; defaults to
        ``model.config.casa_test``
    mode : str
        ``gmm_cnn`` (CNN decision with GMM gating), ``cnn_only`` (no gating)
        or ``gmm_only`` (maximum-likelihood decision of the tag bank)

    Returns
    -------
    result : IdentificationResult

    Raises
    ------
    InputTooShortError
        If the clip is shorter than one feature frame
    """

    if mode not in DECISIONS:
        raise ParamError("mode must be one of {}".format(DECISIONS))
    config = model.config
    use_casa = config.casa_test if use_casa is None else bool(use_casa)

    try:
        features = _featurize(clip, config, use_casa)
    except EmptyFeatureError as exc:
        raise InputTooShortError(str(exc))

    values = model.normalize(features)
    lv = tag_likelihood_vector(values, model.bank)
    speakers = model.speakers
    scores = lv.speaker_scores(speakers)

    padded = False
    if mode == "gmm_only":
        speaker = argmax_label(dict(zip(speakers, scores)), "speakers")
        probs = scipy.special.softmax(scores)
        confidence = probs[speakers.index(speaker)]
    else:
        gating = GatingConfig(mode="off") if mode == "cnn_only" else config.gating
        result = classify(values, model.cnn, scores, gating)
        speaker, confidence, probs, padded = (
            result.speaker,
            result.confidence,
            result.probs,
            result.padded,
        )

    emotion = argmax_label(lv.per_emotion(speaker), "emotions")
    return IdentificationResult(
        speaker, emotion, confidence, lv, probs, use_casa, mode, padded, classes=model.cnn.classes
    )


def _sha256_file(path):
    digest = hashlib.sha256()
    with open(path, "rb") as fdesc:
        for block in iter(lambda: fdesc.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


def save_system(model, directory):
    """Write a model bundle.

    The directory receives ``system.json`` (configuration, version,
    normalization, file hashes), ``gmm_bank.json``, ``cnn.json`` and
    ``cnn.bin``.
    """

    directory = str(directory)
    try:
        os.makedirs(directory, exist_ok=True)
    except OSError as exc:
        raise IoError("cannot create {}: {}".format(directory, exc))

    model.bank.save(os.path.join(directory, "gmm_bank.json"))
    save_cnn(model.cnn, os.path.join(directory, "cnn.json"), os.path.join(directory, "cnn.bin"))

    header = dict(
        format_version=BUNDLE_FORMAT_VERSION,
        version=model.version,
        config=model.config.to_dict(),
        feature_mean=model.feature_mean.tolist(),
        feature_std=model.feature_std.tolist(),
        provenance=model.provenance,
        hashes={name: _sha256_file(os.path.join(directory, name)) for name in _BUNDLE_FILES},
    )
    try:
        with open(os.path.join(directory, "system.json"), "w", encoding="utf-8") as fdesc:
            json.dump(header, fdesc, sort_keys=True, indent=2)
    except OSError as exc:
        raise IoError("cannot write system.json: {}".format(exc))
    logger.info("Saved system bundle to %s", directory)


def load_system(directory):
    """Read and verify a model bundle written by `save_system`.

    Raises
    ------
    CorruptModelError
        If a file is missing or does not match its recorded hash
    VersionError
        If the bundle format is not supported
    """

    directory = str(directory)
    path = os.path.join(directory, "system.json")
    if not os.path.isfile(path):
        raise CorruptModelError("{} has no system.json".format(directory))
    try:
        with open(path, "r", encoding="utf-8") as fdesc:
            header = json.load(fdesc)
    except ValueError as exc:
        raise CorruptModelError("malformed system.json: {}".format(exc))
    except OSError as exc:
        raise IoError("cannot read {}: {}".format(path, exc))

    if header.get("format_version") != BUNDLE_FORMAT_VERSION:
        raise VersionError(
            "bundle format {} (written by casasid {}) is not supported".format(
                header.get("format_version"), header.get("version")
            )
        )

    hashes = header.get("hashes", {})
    for name in _BUNDLE_FILES:
        file_path = os.path.join(directory, name)
        if not os.path.isfile(file_path):
            raise CorruptModelError("bundle file {} is missing".format(name))
        if _sha256_file(file_path) != hashes.get(name):
            raise CorruptModelError("bundle file {} does not match its hash".format(name))

    try:
        bank = TagBank.load(os.path.join(directory, "gmm_bank.json"))
    except FormatError as exc:
        raise CorruptModelError(str(exc))
    cnn = load_cnn(os.path.join(directory, "cnn.json"), os.path.join(directory, "cnn.bin"))
    config = SystemConfig.from_dict(header["config"])

    return SystemModel(
        config,
        bank,
        cnn,
        header["feature_mean"],
        header["feature_std"],
        provenance=header.get("provenance"),
        version=header.get("version"),
    )


def _interference(entry, test_entries, n_samples, sample_rate, noise, rng):
    if noise == "speech":
        others = [e for e in test_entries if e.speaker_id != entry.speaker_id]
        if not others:
            raise DataError("speech interference needs a second test speaker")
        other = others[rng.randint(len(others))]
        return _prepare(read_wav(other.path), sample_rate)
    return AudioClip(noise_generator(n_samples, noise, rng), sample_rate)


def _test_clips(entries, config, noise, ratio, seed):
    rng = _get_rng(seed)
    clips = []
    for entry in entries:
        clip = _prepare(read_wav(entry.path), config.sample_rate)
        if noise is not None:
            mix_seed = int(rng.randint(0, 2 ** 31 - 1))
            interference = _interference(
                entry, entries, len(clip), config.sample_rate, noise, _get_rng(mix_seed)
            )
            clip = mix_noise(clip, interference, MixSpec(ratio=ratio, seed=mix_seed))
        clips.append(clip)
    return clips


def _cell_sid(trials):
    cells = {}
    for t in trials:
        cells.setdefault((t.true_speaker, t.true_emotion), []).append(t)
    return {key: sid_performance(v) for key, v in cells.items()}


def _cell_normality(differences, alpha):
    try:
        return ks_normality(differences, alpha=alpha).to_dict()
    except (DataError, DegenerateError) as exc:
        logger.info("KS normality of the per-cell differences skipped: %s", exc)
        return None


class AblationReport(object):
    """Per-mode comparison

    Attributes
    ----------
    table : pd.DataFrame
        One row per mode: SID, emotion rate, macro precision / recall /
        F1, AUC, wall-clock seconds and cost relative to the reference mode
    reports : dict
        ``{mode: EvalReport}``
    trials : dict
        ``{mode: list of TrialRecord}``
    comparison : dict or None
        Wilcoxon test of the first two modes over per-(speaker, emotion)
        identification rates.  Its ``normality`` entry holds the
        Kolmogorov-Smirnov test of the paired differences, or None when
        there are too few cells or they do not vary
    reference : str
        Mode the cost ratios are relative to
    """

    def __init__(self, table, reports, trials, comparison, reference, settings=None):
        self.table = table
        self.reports = reports
        self.trials = trials
        self.comparison = comparison
        self.reference = reference
        self.settings = dict(settings or {})

    def to_dict(self):
        return dict(
            table={
                mode: {k: (None if pd.isna(v) else v) for k, v in row.items()}
                for mode, row in self.table.to_dict(orient="index").items()
            },
            reports={mode: r.to_dict() for mode, r in self.reports.items()},
            comparison=self.comparison,
            reference=self.reference,
            settings=self.settings,
        )

    def to_text(self):
        text = self.table.to_string(float_format="{:.4f}".format)
        if self.comparison is not None and self.comparison["pvalue"] is not None:
            text += "\n\n{} vs {}: W={:.1f} p={:.4f} different={}".format(
                self.comparison["modes"][0],
                self.comparison["modes"][1],
                self.comparison["statistic"],
                self.comparison["pvalue"],
                self.comparison["different"],
            )
            normality = self.comparison.get("normality")
            if normality is not None:
                text += "\nKS normality of differences: D={:.4f} p={:.4f} reject={}".format(
                    normality["statistic"], normality["pvalue"], normality["reject"]
                )
        return text


def ablate(manifest, config=None, modes=("gmm_only", "gmm_cnn"), noise=None, ratio=2.0, seed=0, alpha=0.10, model=None):
    """Compare decision modes and CASA settings on the test split.

    Parameters
    ----------
    manifest : str or list of ManifestEntry
    config : SystemConfig or None
    modes : iterable of str
        Subset of `MODES`.  ``gmm_only``, ``cnn_only`` and ``gmm_cnn`` use
        `config` as given; ``casa_on`` / ``casa_off`` run the ``gmm_cnn``
        decision with CASA enabled / disabled at both training and test time.
    noise : str or None
        Interference mixed into every test clip: a noise color, ``speech``
        (another test speaker), or None for clean tests
    ratio : float
        Target-to-interference energy ratio
    seed : int
        Seeds training and test mixing
    alpha : float
        Significance level of the mode comparison
    model : SystemModel or None
        Pre-trained system used for the modes that share `config`'s CASA
        setting

    Returns
    -------
    report : AblationReport
    """

    config = config or (model.config if model is not None else SystemConfig())
    modes = list(dict.fromkeys(modes))
    if not modes:
        raise ParamError("no modes requested")
    for mode in modes:
        if mode not in MODES:
            raise ParamError("unknown mode {!r}; expected one of {}".format(mode, MODES))
    if noise is not None and noise not in NOISE_TYPES + ["speech"]:
        raise ParamError("unknown noise {!r}".format(noise))

    entries = _as_entries(manifest)
    test = [e for e in entries if e.split == "test"]
    if not test:
        raise DataError("manifest has no test split")

    clips = _test_clips(test, config, noise, ratio, seed)

    models = {}
    if model is not None:
        models[(model.config.casa_train, model.config.casa_test)] = model

    def system_for(casa_train, casa_test):
        key = (casa_train, casa_test)
        if key not in models:
            models[key] = train_system(
                entries, config.replace(casa_train=casa_train, casa_test=casa_test), seed
            )
        return models[key]

    reports, trials_by_mode, rows = {}, {}, {}
    for mode in modes:
        if mode in DECISIONS:
            system = system_for(config.casa_train, config.casa_test)
            decision, use_casa = mode, config.casa_test
        else:
            flag = mode == "casa_on"
            system = system_for(flag, flag)
            decision, use_casa = "gmm_cnn", flag

        start = time.perf_counter()
        trials = []
        for entry, clip in zip(test, clips):
            res = identify(clip, system, use_casa=use_casa, mode=decision)
            trials.append(
                TrialRecord(
                    entry.speaker_id,
                    res.speaker,
                    res.speaker_scores(),
                    entry.emotion,
                    res.emotion,
                    utterance=entry.path,
                )
            )
        elapsed = time.perf_counter() - start

        report = evaluate(trials, alpha, config=dict(mode=mode, noise=noise, ratio=ratio, casa=use_casa))
        reports[mode] = report
        trials_by_mode[mode] = trials
        rows[mode] = dict(
            sid=report.sid,
            emotion_rate=report.emotion_rate,
            precision=report.precision,
            recall=report.recall,
            f1=report.f1,
            auc=report.auc,
            seconds=elapsed,
        )
        logger.info("Mode %s: SID %.2f%% in %.2fs", mode, report.sid, elapsed)

    table = pd.DataFrame.from_dict(rows, orient="index")
    reference = "gmm_only" if "gmm_only" in rows else modes[0]
    table["cost_ratio"] = table["seconds"] / table.loc[reference, "seconds"]

    comparison = None
    if len(modes) >= 2:
        first, second = _cell_sid(trials_by_mode[modes[0]]), _cell_sid(trials_by_mode[modes[1]])
        cells = sorted(first)
        a, b = [first[c] for c in cells], [second[c] for c in cells]
        normality = _cell_normality(np.subtract(a, b), alpha)
        try:
            res = wilcoxon_signed_rank(a, b, alpha=alpha)
            comparison = dict(modes=modes[:2], **res.to_dict())
        except DegenerateError:
            # identical per-cell rates: no evidence of a difference
            comparison = dict(
                modes=modes[:2], statistic=0.0, pvalue=1.0, different=False, n=0,
                method="degenerate", alpha=alpha, mean_difference=0.0,
            )
        except DataError as exc:
            logger.warning("No Wilcoxon comparison of %s and %s: %s", modes[0], modes[1], exc)
            comparison = dict(modes=modes[:2], statistic=None, pvalue=None, different=None)
        comparison["normality"] = normality

    settings = dict(noise=noise, ratio=ratio, seed=seed, n_test=len(test))
    return AblationReport(table, reports, trials_by_mode, comparison, reference, settings)
