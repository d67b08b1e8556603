#!/usr/bin/env python
# -*- encoding: utf-8 -*-
"""Diagonal-covariance Gaussian mixture tags

A `GmmTag` models the frames of one (speaker, emotion) pair; a `TagBank`
holds one tag per pair and scores query utterances against all of them.
"""

import json
import logging

import numpy as np
import scipy.special
from joblib import Parallel, delayed
from sklearn.cluster import KMeans

from .base import BaseConfig
from .exceptions import DataError, FormatError, IoError, ParamError, ShapeError

__all__ = [
    "GmmConfig",
    "GmmTag",
    "TagBank",
    "LikelihoodVector",
    "gmm_logpdf",
    "gmm_pdf",
    "responsibilities",
    "init_gmm",
    "em_step",
    "train_gmm",
    "train_tag_bank",
    "tag_likelihood_vector",
    "identify_speaker_gmm",
    "recognize_emotion_gmm",
    "argmax_label",
]

logger = logging.getLogger(__name__)

_LOG_2PI = np.log(2 * np.pi)


class GmmConfig(BaseConfig):
    """GMM training parameters

    Attributes
    ----------
    n_components : int > 0
    tol : float >= 0
        Stop when the relative change of the mean log-likelihood falls
        below this value
    max_iter : int >= 0
    variance_floor : float > 0
    kmeans_iter : int > 0
        k-means refinement iterations of the initialization
    seed : int
    """

    def __init__(
        self,
        n_components=16,
        tol=1e-5,
        max_iter=200,
        variance_floor=1e-4,
        kmeans_iter=10,
        seed=0,
    ):
        if n_components < 1:
            raise ParamError("n_components must be positive")
        if tol < 0 or max_iter < 0:
            raise ParamError("tol and max_iter must be non-negative")
        if variance_floor <= 0:
            raise ParamError("variance_floor must be strictly positive")
        if kmeans_iter < 1:
            raise ParamError("kmeans_iter must be positive")

        self.n_components = int(n_components)
        self.tol = float(tol)
        self.max_iter = int(max_iter)
        self.variance_floor = float(variance_floor)
        self.kmeans_iter = int(kmeans_iter)
        self.seed = int(seed)


class GmmTag(object):
    """Parameters ``{weights, means, variances}`` of a diagonal GMM

    Attributes
    ----------
    weights : np.ndarray [shape=(M,)]
    means : np.ndarray [shape=(M, D)]
    variances : np.ndarray [shape=(M, D)]
    trace : list of float
        Mean per-frame log-likelihood after initialization and after each
        EM step (empty if the tag was not produced by `train_gmm`)
    """

    __slots__ = ("weights", "means", "variances", "trace")

    def __init__(self, weights, means, variances, trace=None):
        weights = np.asarray(weights, dtype=np.float64)
        means = np.atleast_2d(np.asarray(means, dtype=np.float64))
        variances = np.atleast_2d(np.asarray(variances, dtype=np.float64))

        if weights.ndim != 1 or means.shape != variances.shape:
            raise ShapeError("inconsistent GMM parameter shapes")
        if means.shape[0] != weights.shape[0]:
            raise ShapeError(
                "{} weights for {} components".format(len(weights), means.shape[0])
            )
        if np.any(weights < 0) or abs(np.sum(weights) - 1.0) > 1e-9:
            raise ParamError("GMM weights must lie on the probability simplex")
        if np.any(variances <= 0):
            raise ParamError("GMM variances must be strictly positive")
        if not (np.all(np.isfinite(means)) and np.all(np.isfinite(variances))):
            raise ParamError("GMM parameters must be finite")

        self.weights = weights
        self.means = means
        self.variances = variances
        self.trace = list(trace or [])

    @property
    def n_components(self):
        return len(self.weights)

    @property
    def dim(self):
        return self.means.shape[1]

    def to_dict(self):
        return dict(
            weights=self.weights.tolist(),
            means=self.means.tolist(),
            variances=self.variances.tolist(),
        )

    @classmethod
    def from_dict(cls, data):
        return cls(data["weights"], data["means"], data["variances"])

    def __eq__(self, other):
        if not isinstance(other, GmmTag):
            return NotImplemented
        return (
            np.array_equal(self.weights, other.weights)
            and np.array_equal(self.means, other.means)
            and np.array_equal(self.variances, other.variances)
        )

    __hash__ = None

    def __repr__(self):
        return "GmmTag(n_components={}, dim={})".format(self.n_components, self.dim)


def _as_frames(X, dim=None):
    X = getattr(X, "values", X)
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[np.newaxis, :]
    if X.ndim != 2:
        raise ShapeError("expected a (frames, dim) matrix, got shape {}".format(X.shape))
    if dim is not None and X.shape[1] != dim:
        raise ShapeError("feature dimension {} != model dimension {}".format(X.shape[1], dim))
    return X


def _log_joint(X, tag):
    """``log P_i + log b_i(x_t)`` for every frame and component, shape (T, M)"""

    diff = X[:, np.newaxis, :] - tag.means[np.newaxis, :, :]
    mahal = np.sum(diff ** 2 / tag.variances[np.newaxis, :, :], axis=2)
    log_det = np.sum(np.log(tag.variances), axis=1)
    log_b = -0.5 * (tag.dim * _LOG_2PI + log_det[np.newaxis, :] + mahal)

    with np.errstate(divide="ignore"):
        log_w = np.log(tag.weights)
    return log_w[np.newaxis, :] + log_b


def gmm_logpdf(X, tag):
    """Log-density of each frame under a GMM

    Parameters
    ----------
    X : np.ndarray [shape=(T, D) or (D,)] or FeatureMatrix
    tag : GmmTag

    Returns
    -------
    log_p : np.ndarray [shape=(T,)]
    """

    X = _as_frames(X, tag.dim)
    return scipy.special.logsumexp(_log_joint(X, tag), axis=1)


def gmm_pdf(X, tag):
    """Density ``p(x | tag) = sum_i P_i b_i(x)``

    Returns a float for a single vector, an array for a matrix of frames.

    Examples
    --------
    >>> tag = GmmTag([1.0], [[0.0]], [[1.0]])
    >>> round(gmm_pdf([0.0], tag), 6)
    0.398942
    """

    single = np.ndim(getattr(X, "values", X)) == 1
    p = np.exp(gmm_logpdf(X, tag))
    return float(p[0]) if single else p


def responsibilities(X, tag):
    """Posterior component probabilities

    Returns
    -------
    resp : np.ndarray [shape=(T, M)]
        Rows sum to 1
    log_p : np.ndarray [shape=(T,)]
        Frame log-densities
    """

    X = _as_frames(X, tag.dim)
    log_joint = _log_joint(X, tag)
    log_p = scipy.special.logsumexp(log_joint, axis=1)
    resp = np.exp(log_joint - log_p[:, np.newaxis])
    resp /= resp.sum(axis=1, keepdims=True)
    return resp, log_p


def init_gmm(X, n_components, seed=0, variance_floor=1e-4, kmeans_iter=10):
    """Initialize a GMM from k-means++ clusters.

    Parameters
    ----------
    X : np.ndarray [shape=(T, D)]
    n_components : int > 0
    seed : int
    variance_floor : float > 0
    kmeans_iter : int > 0

    Returns
    -------
    tag : GmmTag
        Cluster proportions, means and floored per-dimension variances

    Raises
    ------
    DataError
        If there are fewer frames than components
    """

    X = _as_frames(X)
    n_frames = X.shape[0]
    if n_frames < n_components:
        raise DataError(
            "{} frames cannot initialize {} components".format(n_frames, n_components)
        )

    if n_components == 1:
        return GmmTag(
            [1.0],
            X.mean(axis=0, keepdims=True),
            np.maximum(X.var(axis=0, keepdims=True), variance_floor),
        )

    km = KMeans(
        n_clusters=n_components,
        init="k-means++",
        n_init=1,
        max_iter=kmeans_iter,
        random_state=seed,
    ).fit(X)

    global_var = np.maximum(X.var(axis=0), variance_floor)
    weights = np.zeros(n_components)
    means = np.array(km.cluster_centers_, dtype=np.float64)
    variances = np.tile(global_var, (n_components, 1))

    for i in range(n_components):
        members = X[km.labels_ == i]
        weights[i] = len(members) / float(n_frames)
        if len(members):
            means[i] = members.mean(axis=0)
            variances[i] = np.maximum(members.var(axis=0), variance_floor)

    return GmmTag(weights / weights.sum(), means, variances)


def _mean_loglik(X, tag):
    return float(np.mean(gmm_logpdf(X, tag)))


def em_step(X, tag, variance_floor=1e-4):
    """One expectation-maximization update.

    Weights, means and variances follow the classical diagonal-GMM
    re-estimation formulas, with the variance computed as
    ``E[x**2] - mean**2`` and floored at `variance_floor`.

    A component that receives no responsibility mass is re-seeded at the
    frame with the lowest likelihood (weight ``1/T``) if that does not lower
    the likelihood; otherwise it keeps weight 0.

    Parameters
    ----------
    X : np.ndarray [shape=(T, D)]
    tag : GmmTag
    variance_floor : float > 0

    Returns
    -------
    tag_new : GmmTag
    """

    X = _as_frames(X, tag.dim)
    n_frames = X.shape[0]
    if n_frames < 1:
        raise DataError("EM needs at least one frame")

    resp, log_p = responsibilities(X, tag)
    mass = resp.sum(axis=0)
    empty = mass <= 1e-10 * n_frames

    safe = np.where(empty, 1.0, mass)[:, np.newaxis]
    means = resp.T @ X / safe
    second = resp.T @ (X ** 2) / safe
    variances = np.maximum(second - means ** 2, variance_floor)

    means[empty] = tag.means[empty]
    variances[empty] = tag.variances[empty]
    weights = np.where(empty, 0.0, mass)
    weights /= weights.sum()

    new_tag = GmmTag(weights, means, variances)
    if not np.any(empty):
        return new_tag

    worst = int(np.argmin(log_p))
    base_ll = _mean_loglik(X, new_tag)
    for i in np.flatnonzero(empty):
        w = new_tag.weights * (1.0 - 1.0 / n_frames)
        w[i] += 1.0 / n_frames
        m = new_tag.means.copy()
        v = new_tag.variances.copy()
        m[i] = X[worst]
        v[i] = np.maximum(X.var(axis=0), variance_floor)
        candidate = GmmTag(w / w.sum(), m, v)
        cand_ll = _mean_loglik(X, candidate)
        if cand_ll >= base_ll:
            logger.warning("Empty GMM component %d re-seeded at frame %d", i, worst)
            new_tag, base_ll = candidate, cand_ll
        else:
            logger.warning("Empty GMM component %d kept at zero weight", i)

    return new_tag


def train_gmm(
    X, n_components, tol=1e-5, max_iter=200, seed=0, variance_floor=1e-4, kmeans_iter=10
):
    """Fit a GMM by EM until convergence.

    Parameters
    ----------
    X : np.ndarray [shape=(T, D)]
    n_components : int > 0
    tol : float
        Relative change of the mean log-likelihood below which training stops
    max_iter : int >= 0
    seed : int
    variance_floor : float > 0
    kmeans_iter : int > 0

    Returns
    -------
    tag : GmmTag
        With the log-likelihood trace in `tag.trace`

    Examples
    --------
    >>> tag = train_gmm(frames, 2, seed=0)
    >>> tag.trace[-1] >= tag.trace[0]
    True
    """

    X = _as_frames(X)
    tag = init_gmm(
        X, n_components, seed=seed, variance_floor=variance_floor, kmeans_iter=kmeans_iter
    )
    ll = _mean_loglik(X, tag)
    trace = [ll]

    for _ in range(max_iter):
        tag = em_step(X, tag, variance_floor=variance_floor)
        ll_new = _mean_loglik(X, tag)
        trace.append(ll_new)
        change = (ll_new - ll) / max(abs(ll), np.finfo(float).tiny)
        ll = ll_new
        if change < tol:
            break

    tag.trace = trace
    return tag


class LikelihoodVector(object):
    """Average per-frame log-likelihood of a query under every tag

    Attributes
    ----------
    keys : list of (str, str)
        ``(speaker_id, emotion)`` per tag, sorted
    values : np.ndarray [shape=(len(keys),)]
    """

    __slots__ = ("keys", "values")

    def __init__(self, keys, values):
        self.keys = [tuple(k) for k in keys]
        self.values = np.asarray(values, dtype=np.float64)
        if self.values.shape != (len(self.keys),):
            raise ShapeError("one value per key required")
        if not np.all(np.isfinite(self.values)):
            raise ParamError("likelihoods must be finite")

    def __len__(self):
        return len(self.keys)

    def _reduce(self, axis, restrict=None):
        scores = {}
        for (speaker, emotion), value in zip(self.keys, self.values):
            if restrict is not None and (speaker, emotion)[1 - axis] != restrict:
                continue
            label = (speaker, emotion)[axis]
            scores[label] = max(scores.get(label, -np.inf), value)
        return scores

    def per_speaker(self):
        """``{speaker: max over emotions}``"""
        return self._reduce(0)

    def per_emotion(self, speaker=None):
        """``{emotion: max over speakers}``, optionally for one speaker only"""
        return self._reduce(1, restrict=speaker)

    def speaker_scores(self, speakers):
        """Per-speaker scores as an array ordered like `speakers`"""
        scores = self.per_speaker()
        return np.array([scores[s] for s in speakers])

    def to_dict(self):
        return dict(
            keys=[list(k) for k in self.keys], values=self.values.tolist()
        )


def argmax_label(scores, what="label"):
    """Label with the highest score; exact ties go to the smallest label.

    Parameters
    ----------
    scores : dict
        ``{label: score}``, non-empty
    what : str
        Name used in the tie-break log message

    Returns
    -------
    label
    """

    if not scores:
        raise DataError("cannot take the argmax of no scores")

    best = max(scores.values())
    winners = sorted(label for label, value in scores.items() if value == best)
    if len(winners) > 1:
        logger.warning("Tie between %s %s; choosing %r", what, winners, winners[0])
    return winners[0]


class TagBank(object):
    """One GMM tag per (speaker, emotion) pair

    Parameters
    ----------
    tags : dict
        ``{(speaker_id, emotion): GmmTag}``; all tags share one dimension
    """

    def __init__(self, tags):
        tags = {tuple(k): v for k, v in dict(tags).items()}
        if not tags:
            raise DataError("a tag bank needs at least one tag")
        dims = {tag.dim for tag in tags.values()}
        if len(dims) != 1:
            raise ShapeError("tags have different dimensions: {}".format(sorted(dims)))
        self._tags = tags
        self.dim = dims.pop()

    def keys(self):
        return sorted(self._tags)

    def __getitem__(self, key):
        return self._tags[tuple(key)]

    def __contains__(self, key):
        return tuple(key) in self._tags

    def __len__(self):
        return len(self._tags)

    def speakers(self):
        return sorted({s for s, _ in self._tags})

    def emotions(self, speaker=None):
        return sorted({e for s, e in self._tags if speaker is None or s == speaker})

    def __eq__(self, other):
        if not isinstance(other, TagBank):
            return NotImplemented
        return self.keys() == other.keys() and all(
            self[k] == other[k] for k in self.keys()
        )

    __hash__ = None

    def __repr__(self):
        return "TagBank(n_tags={}, dim={}, speakers={})".format(
            len(self), self.dim, self.speakers()
        )

    def to_dict(self):
        return dict(
            dim=self.dim,
            tags=[
                dict(speaker=s, emotion=e, **self[(s, e)].to_dict())
                for s, e in self.keys()
            ],
        )

    @classmethod
    def from_dict(cls, data):
        try:
            tags = {
                (t["speaker"], t["emotion"]): GmmTag.from_dict(t) for t in data["tags"]
            }
        except (KeyError, TypeError) as exc:
            raise FormatError("malformed tag bank: {}".format(exc))
        bank = cls(tags)
        if bank.dim != data.get("dim", bank.dim):
            raise ShapeError("tag bank dimension does not match its tags")
        return bank

    def save(self, path):
        """Write the bank as a JSON document"""
        try:
            with open(str(path), "w", encoding="utf-8") as fdesc:
                json.dump(self.to_dict(), fdesc, sort_keys=True)
        except OSError as exc:
            raise IoError("cannot write {}: {}".format(path, exc))

    @classmethod
    def load(cls, path):
        try:
            with open(str(path), "r", encoding="utf-8") as fdesc:
                data = json.load(fdesc)
        except OSError as exc:
            raise IoError("cannot read {}: {}".format(path, exc))
        except ValueError as exc:
            raise FormatError("malformed tag bank {}: {}".format(path, exc))
        return cls.from_dict(data)


def _train_one(key, X, n_components, config, seed):
    n_frames = len(X)
    if n_frames == 0:
        raise DataError("no frames for speaker {!r}, emotion {!r}".format(*key))
    if n_frames < n_components:
        logger.warning(
            "Only %d frames for %s; reducing to %d components", n_frames, key, n_frames
        )
        n_components = n_frames
    return train_gmm(
        X,
        n_components,
        tol=config.tol,
        max_iter=config.max_iter,
        seed=seed,
        variance_floor=config.variance_floor,
        kmeans_iter=config.kmeans_iter,
    )


def train_tag_bank(frames, config=None, n_jobs=1):
    """Train one tag per (speaker, emotion) pair.

    Parameters
    ----------
    frames : dict
        ``{(speaker_id, emotion): np.ndarray [shape=(T, D)]}``
    config : GmmConfig or None
    n_jobs : int
        Number of parallel workers (joblib); results do not depend on it

    Returns
    -------
    bank : TagBank
    """

    config = config or GmmConfig()
    keys = sorted(frames)

    tags = Parallel(n_jobs=n_jobs)(
        delayed(_train_one)(
            key, _as_frames(frames[key]), config.n_components, config, config.seed + i
        )
        for i, key in enumerate(keys)
    )

    for key, tag in zip(keys, tags):
        logger.info(
            "Trained tag %s/%s: %d components, %d EM steps, loglik %.4f",
            key[0],
            key[1],
            tag.n_components,
            len(tag.trace) - 1,
            tag.trace[-1],
        )

    return TagBank(dict(zip(keys, tags)))


def tag_likelihood_vector(features, bank):
    """Score a query against every tag of a bank.

    Parameters
    ----------
    features : FeatureMatrix or np.ndarray [shape=(T, D)]
    bank : TagBank

    Returns
    -------
    lv : LikelihoodVector
        Average per-frame log-density under each tag
    """

    X = _as_frames(features, bank.dim)
    if X.shape[0] < 1:
        raise DataError("cannot score an empty feature matrix")

    keys = bank.keys()
    values = [np.mean(gmm_logpdf(X, bank[k])) for k in keys]
    return LikelihoodVector(keys, values)


def identify_speaker_gmm(features, bank):
    """Maximum-likelihood speaker decision.

    Parameters
    ----------
    features : FeatureMatrix or np.ndarray
    bank : TagBank

    Returns
    -------
    speaker_id : str
    scores : dict
        ``{speaker_id: max over that speaker's tags}``
    """

    scores = tag_likelihood_vector(features, bank).per_speaker()
    return argmax_label(scores, "speakers"), scores


def recognize_emotion_gmm(features, bank, speaker=None):
    """Maximum-likelihood talking-condition decision.

    Parameters
    ----------
    features : FeatureMatrix or np.ndarray
    bank : TagBank
    speaker : str or None
        If given, only that speaker's tags are considered

    Returns
    -------
    emotion : str
    """

    lv = tag_likelihood_vector(features, bank)
    return argmax_label(lv.per_emotion(speaker), "emotions")
