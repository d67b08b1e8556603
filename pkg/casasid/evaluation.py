#!/usr/bin/env python
# -*- encoding: utf-8 -*-
"""Scoring identification trials

Speaker identification rate, confusion-matrix metrics, rank-based AUC,
a Kolmogorov-Smirnov normality check and the Wilcoxon signed-rank test
for comparing two systems on paired results.
"""

import itertools
import json
import logging

import numpy as np
import pandas as pd
import scipy.stats
from sklearn.metrics import confusion_matrix

from .exceptions import (
    DataError,
    DegenerateError,
    EmptyError,
    FormatError,
    IoError,
    LabelError,
    ParamError,
    ShapeError,
)

__all__ = [
    "TrialRecord",
    "ConfusionMatrix",
    "EvalReport",
    "KsResult",
    "WilcoxonResult",
    "sid_performance",
    "emotion_rate",
    "precision_recall_f1",
    "roc_auc",
    "macro_roc_auc",
    "ks_normality",
    "wilcoxon_signed_rank",
    "evaluate",
    "segmental_snr",
    "write_trials",
    "read_trials",
    "rescore",
]

logger = logging.getLogger(__name__)

#: Enumerate all sign assignments up to this many differences
EXACT_WILCOXON_MAX_N = 12


class TrialRecord(object):
    """The outcome of one identification trial

    Attributes
    ----------
    true_speaker : str
    predicted_speaker : str
    scores : dict
        ``{speaker: score}``; the prediction must be among its keys
    true_emotion, predicted_emotion : str or None
    utterance : str or None
        Identifier of the test utterance
    """

    __slots__ = (
        "true_speaker",
        "predicted_speaker",
        "scores",
        "true_emotion",
        "predicted_emotion",
        "utterance",
    )

    def __init__(
        self,
        true_speaker,
        predicted_speaker,
        scores,
        true_emotion=None,
        predicted_emotion=None,
        utterance=None,
    ):
        scores = {str(k): float(v) for k, v in dict(scores).items()}
        if predicted_speaker not in scores:
            raise LabelError(
                "predicted speaker {!r} is not among the scored speakers".format(
                    predicted_speaker
                )
            )
        self.true_speaker = str(true_speaker)
        self.predicted_speaker = str(predicted_speaker)
        self.scores = scores
        self.true_emotion = true_emotion
        self.predicted_emotion = predicted_emotion
        self.utterance = utterance

    @property
    def correct(self):
        return self.true_speaker == self.predicted_speaker

    def to_dict(self):
        return {k: getattr(self, k) for k in self.__slots__}

    @classmethod
    def from_dict(cls, data):
        return cls(**data)

    def __eq__(self, other):
        if not isinstance(other, TrialRecord):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    __hash__ = None

    def __repr__(self):
        return "TrialRecord(true={!r}, predicted={!r})".format(
            self.true_speaker, self.predicted_speaker
        )


class ConfusionMatrix(object):
    """Counts of (true, predicted) label pairs

    Attributes
    ----------
    matrix : np.ndarray [shape=(n, n), dtype=int]
        Rows are true labels, columns predictions
    labels : list of str
    """

    def __init__(self, matrix, labels):
        matrix = np.asarray(matrix)
        labels = [str(l) for l in labels]
        if matrix.shape != (len(labels), len(labels)):
            raise ShapeError("confusion matrix must be square over its labels")
        if np.any(matrix < 0) or np.any(matrix != np.round(matrix)):
            raise ParamError("confusion counts must be non-negative integers")
        self.matrix = matrix.astype(int)
        self.labels = labels

    @classmethod
    def from_trials(cls, trials, labels=None):
        """Tabulate speaker decisions.

        Labels default to the sorted union of true, predicted and scored
        speakers.
        """
        trials = list(trials)
        if labels is None:
            found = set()
            for t in trials:
                found.update([t.true_speaker, t.predicted_speaker])
                found.update(t.scores)
            labels = sorted(found)
        y_true = [t.true_speaker for t in trials]
        y_pred = [t.predicted_speaker for t in trials]
        return cls(confusion_matrix(y_true, y_pred, labels=labels), labels)

    @property
    def total(self):
        return int(self.matrix.sum())

    @property
    def trace(self):
        return int(np.trace(self.matrix))

    def counts(self, label):
        """``(TP, FP, FN, TN)`` of one class against the rest"""

        try:
            i = self.labels.index(str(label))
        except ValueError:
            raise LabelError("unknown class {!r}".format(label))
        tp = int(self.matrix[i, i])
        fp = int(self.matrix[:, i].sum()) - tp
        fn = int(self.matrix[i, :].sum()) - tp
        tn = self.total - tp - fp - fn
        return tp, fp, fn, tn

    def to_frame(self):
        return pd.DataFrame(self.matrix, index=self.labels, columns=self.labels)

    def to_dict(self):
        return dict(labels=self.labels, matrix=self.matrix.tolist())


def sid_performance(trials):
    """Percentage of trials where the speaker was identified correctly.

    Parameters
    ----------
    trials : iterable of TrialRecord

    Returns
    -------
    sid : float in [0, 100]

    Raises
    ------
    EmptyError
        If there are no trials

    Examples
    --------
    >>> sid_performance(trials)  # 42 correct out of 50
    84.0
    """

    trials = list(trials)
    if not trials:
        raise EmptyError("no trials to score")
    correct = sum(t.correct for t in trials)
    return 100.0 * correct / len(trials)


def emotion_rate(trials):
    """Percentage of trials with the talking condition recognised, or None
    if no trial carries emotion labels"""

    labelled = [
        t for t in trials if t.true_emotion is not None and t.predicted_emotion is not None
    ]
    if not labelled:
        return None
    return 100.0 * sum(t.true_emotion == t.predicted_emotion for t in labelled) / len(labelled)


def precision_recall_f1(cm, label):
    """One-vs-rest precision, recall and F1 of a class.

    A zero denominator yields 0 and is logged.

    Parameters
    ----------
    cm : ConfusionMatrix
    label : str

    Returns
    -------
    precision, recall, f1 : float in [0, 1]
    """

    tp, fp, fn, _ = cm.counts(label)

    if tp + fp == 0:
        logger.warning("Class %r was never predicted; precision set to 0", label)
        precision = 0.0
    else:
        precision = tp / float(tp + fp)

    if tp + fn == 0:
        logger.warning("Class %r has no true trials; recall set to 0", label)
        recall = 0.0
    else:
        recall = tp / float(tp + fn)

    if precision + recall == 0:
        f1 = 0.0
    else:
        f1 = 2.0 * precision * recall / (precision + recall)
    return precision, recall, f1


def roc_auc(scores, labels):
    """Area under the ROC curve by the rank-sum statistic.

    Ties between a positive and a negative score count one half.

    Parameters
    ----------
    scores : array-like [shape=(n,)]
    labels : array-like [shape=(n,)] of bool

    Returns
    -------
    auc : float in [0, 1]

    Raises
    ------
    DegenerateError
        If only one label value is present
    """

    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=bool)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ShapeError("one label per score required")

    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DegenerateError("AUC needs both positive and negative trials")

    ranks = scipy.stats.rankdata(scores)
    u = ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def macro_roc_auc(trials, labels=None):
    """Mean one-vs-rest AUC over the speakers that have true trials.

    Each trial contributes its score for the class under test.
    """

    trials = list(trials)
    if labels is None:
        labels = sorted({t.true_speaker for t in trials})

    aucs = []
    for label in labels:
        rows = [t for t in trials if label in t.scores]
        truth = [t.true_speaker == label for t in rows]
        if not any(truth) or all(truth):
            logger.debug("Skipping AUC for %r: single-class trials", label)
            continue
        aucs.append(roc_auc([t.scores[label] for t in rows], truth))

    if not aucs:
        raise DegenerateError("no class has both positive and negative trials")
    return float(np.mean(aucs))


class KsResult(object):
    __slots__ = ("statistic", "pvalue", "reject", "alpha")

    def __init__(self, statistic, pvalue, reject, alpha):
        self.statistic = float(statistic)
        self.pvalue = float(pvalue)
        self.reject = bool(reject)
        self.alpha = float(alpha)

    def to_dict(self):
        return {k: getattr(self, k) for k in self.__slots__}


def ks_normality(samples, alpha=0.10):
    """One-sample Kolmogorov-Smirnov test against a fitted normal.

    The normal takes the sample mean and standard deviation; the p-value
    comes from the asymptotic Kolmogorov distribution.

    Parameters
    ----------
    samples : array-like, at least 5 values
    alpha : float in (0, 1)

    Returns
    -------
    result : KsResult
    """

    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size < 5:
        raise DataError("the KS test needs at least 5 samples, got {}".format(x.size))
    if not 0 < alpha < 1:
        raise ParamError("alpha must lie in (0, 1)")

    std = x.std(ddof=1)
    if not std > 0:
        raise DegenerateError("samples have zero variance")

    res = scipy.stats.kstest(x, "norm", args=(x.mean(), std), method="asymp")
    return KsResult(res.statistic, res.pvalue, res.pvalue < alpha, alpha)


class WilcoxonResult(object):
    __slots__ = ("statistic", "pvalue", "different", "n", "method", "alpha", "mean_difference")

    def __init__(self, statistic, pvalue, different, n, method, alpha, mean_difference):
        self.statistic = float(statistic)
        self.pvalue = float(pvalue)
        self.different = bool(different)
        self.n = int(n)
        self.method = method
        self.alpha = float(alpha)
        self.mean_difference = float(mean_difference)

    def to_dict(self):
        return {k: getattr(self, k) for k in self.__slots__}


def _exact_wilcoxon_p(ranks, w):
    total = ranks.sum()
    hits = 0
    count = 0
    for signs in itertools.product((0, 1), repeat=len(ranks)):
        s = np.dot(signs, ranks)
        count += 1
        if min(s, total - s) <= w + 1e-9:
            hits += 1
    return hits / float(count)


def _normal_wilcoxon_p(ranks, w):
    n = len(ranks)
    mean = n * (n + 1) / 4.0
    _, ties = np.unique(ranks, return_counts=True)
    var = n * (n + 1) * (2 * n + 1) / 24.0 - np.sum(ties ** 3 - ties) / 48.0
    if not var > 0:
        raise DegenerateError("signed-rank variance is zero")
    z = min(0.0, (w - mean + 0.5) / np.sqrt(var))
    return 2.0 * scipy.stats.norm.cdf(z)


def wilcoxon_signed_rank(a, b, alpha=0.10, method="auto"):
    """Two-sided Wilcoxon signed-rank test on paired samples.

    Zero differences are dropped and tied absolute differences get their
    mid-rank.  The statistic is the smaller of the positive and negative
    rank sums.

    Parameters
    ----------
    a, b : array-like [shape=(n,)]
    alpha : float in (0, 1)
    method : str
        ``exact`` enumerates every sign assignment, ``approx`` uses the
        tie-corrected normal approximation with continuity correction, and
        ``auto`` picks ``exact`` for at most 12 non-zero differences

    Returns
    -------
    result : WilcoxonResult

    Raises
    ------
    DegenerateError
        If every difference is zero
    DataError
        If fewer than 5 differences are non-zero
    """

    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ShapeError("paired samples must have the same length")
    if method not in ("auto", "exact", "approx"):
        raise ParamError("unknown method {!r}".format(method))

    d = a - b
    d = d[d != 0]
    n = d.size
    if n == 0:
        raise DegenerateError("all paired differences are zero")
    if n < 5:
        raise DataError("need at least 5 non-zero differences, got {}".format(n))

    ranks = scipy.stats.rankdata(np.abs(d))
    w_pos = ranks[d > 0].sum()
    w_neg = ranks[d < 0].sum()
    w = min(w_pos, w_neg)

    if method == "auto":
        method = "exact" if n <= EXACT_WILCOXON_MAX_N else "approx"

    if method == "exact":
        p = _exact_wilcoxon_p(ranks, w)
    else:
        p = _normal_wilcoxon_p(ranks, w)
    p = min(1.0, p)

    return WilcoxonResult(w, p, p < alpha, n, method, alpha, np.mean(a - b))


class EvalReport(object):
    """Summary metrics of a set of trials

    Attributes
    ----------
    sid : float
        Identification rate in percent
    per_class : pd.DataFrame
        Precision, recall and F1 per speaker
    precision, recall, f1 : float
        Macro averages
    auc : float or None
        Macro one-vs-rest AUC, None if undefined
    emotion_rate : float or None
    n_trials, n_correct : int
    confusion : ConfusionMatrix
    config : dict
        Echo of the settings that produced the trials
    """

    def __init__(
        self,
        sid,
        per_class,
        precision,
        recall,
        f1,
        auc,
        emotion_rate,
        n_trials,
        n_correct,
        confusion,
        config=None,
    ):
        self.sid = float(sid)
        self.per_class = per_class
        self.precision = float(precision)
        self.recall = float(recall)
        self.f1 = float(f1)
        self.auc = None if auc is None else float(auc)
        self.emotion_rate = None if emotion_rate is None else float(emotion_rate)
        self.n_trials = int(n_trials)
        self.n_correct = int(n_correct)
        self.confusion = confusion
        self.config = dict(config or {})

    def summary(self):
        return dict(
            sid=self.sid,
            precision=self.precision,
            recall=self.recall,
            f1=self.f1,
            auc=self.auc,
            emotion_rate=self.emotion_rate,
            n_trials=self.n_trials,
            n_correct=self.n_correct,
        )

    def to_dict(self):
        out = self.summary()
        out["per_class"] = {
            label: row.to_dict() for label, row in self.per_class.iterrows()
        }
        out["confusion"] = self.confusion.to_dict()
        out["config"] = self.config
        return out

    def to_json(self, **kwargs):
        kwargs.setdefault("sort_keys", True)
        return json.dumps(self.to_dict(), **kwargs)

    def to_text(self):
        """Aligned plain-text rendering"""
        summary = pd.Series(self.summary()).to_string()
        return "\n\n".join(
            [summary, self.per_class.to_string(float_format="{:.4f}".format)]
        )


def evaluate(trials, alpha=0.10, labels=None, config=None):
    """Score a list of trials.

    Parameters
    ----------
    trials : iterable of TrialRecord
    alpha : float
        Significance level echoed into the report
    labels : list of str or None
        Speaker set; inferred from the trials if None
    config : dict or None
        Settings echoed into the report

    Returns
    -------
    report : EvalReport
    """

    trials = list(trials)
    if not trials:
        raise EmptyError("no trials to evaluate")

    cm = ConfusionMatrix.from_trials(trials, labels)
    sid = sid_performance(trials)

    classes = sorted({t.true_speaker for t in trials})
    rows = {label: precision_recall_f1(cm, label) for label in classes}
    per_class = pd.DataFrame.from_dict(
        rows, orient="index", columns=["precision", "recall", "f1"]
    )

    try:
        auc = macro_roc_auc(trials, classes)
    except DegenerateError as exc:
        logger.warning("AUC undefined: %s", exc)
        auc = None

    echo = dict(config or {})
    echo.setdefault("alpha", alpha)

    return EvalReport(
        sid,
        per_class,
        per_class["precision"].mean(),
        per_class["recall"].mean(),
        per_class["f1"].mean(),
        auc,
        emotion_rate(trials),
        len(trials),
        cm.trace,
        cm,
        echo,
    )


def segmental_snr(target, interference, frame_len, floor_db=-10.0, ceil_db=35.0):
    """Mean per-frame SNR of two aligned stems.

    Non-overlapping frames; each frame's SNR is clipped to
    ``[floor_db, ceil_db]`` before averaging.

    Parameters
    ----------
    target, interference : AudioClip or np.ndarray
    frame_len : int > 0

    Returns
    -------
    snr_db : float
    """

    t = np.asarray(getattr(target, "samples", target), dtype=np.float64)
    i = np.asarray(getattr(interference, "samples", interference), dtype=np.float64)
    if t.shape != i.shape:
        raise ShapeError("stems must have the same length")
    if frame_len < 1:
        raise ParamError("frame_len must be positive")
    n_frames = len(t) // frame_len
    if n_frames < 1:
        raise DataError("stems are shorter than one frame")

    t = t[: n_frames * frame_len].reshape(n_frames, frame_len)
    i = i[: n_frames * frame_len].reshape(n_frames, frame_len)
    e_t = np.sum(t ** 2, axis=1)
    e_i = np.sum(i ** 2, axis=1)

    with np.errstate(divide="ignore", invalid="ignore"):
        snr = 10 * np.log10(e_t / e_i)
    snr[(e_i == 0) & (e_t > 0)] = ceil_db
    snr[e_t == 0] = floor_db
    return float(np.mean(np.clip(snr, floor_db, ceil_db)))


def write_trials(trials, path):
    """Write trials as JSON-lines"""
    try:
        with open(str(path), "w", encoding="utf-8") as fdesc:
            for trial in trials:
                fdesc.write(json.dumps(trial.to_dict(), sort_keys=True) + "\n")
    except OSError as exc:
        raise IoError("cannot write {}: {}".format(path, exc))


def read_trials(path):
    try:
        with open(str(path), "r", encoding="utf-8") as fdesc:
            lines = [line for line in fdesc if line.strip()]
    except OSError as exc:
        raise IoError("cannot read {}: {}".format(path, exc))

    trials = []
    for lineno, line in enumerate(lines, start=1):
        try:
            trials.append(TrialRecord.from_dict(json.loads(line)))
        except (ValueError, TypeError) as exc:
            raise FormatError("{} line {}: {}".format(path, lineno, exc))
    return trials


def rescore(path, alpha=0.10):
    """Evaluate a trial log written by `write_trials`"""
    return evaluate(read_trials(path), alpha=alpha)
