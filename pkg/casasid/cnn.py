#!/usr/bin/env python
# -*- encoding: utf-8 -*-
"""A small convolutional network with GMM-tag gating

The network sees a feature patch (features x context frames) through a
stack of ``conv -> ReLU -> maxpool`` blocks, followed by fully connected
layers (ReLU on all but the last) and a softmax over speakers.  The
output distribution can then be gated by the GMM tag scores of the same
utterance.
"""

import hashlib
import json
import logging

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .base import BaseConfig, _get_rng
from .exceptions import (
    CorruptModelError,
    DataError,
    DivergenceError,
    FormatError,
    IoError,
    LabelError,
    ParamError,
    ShapeError,
    VersionError,
)

__all__ = [
    "CnnSpec",
    "TrainHyper",
    "GatingConfig",
    "CnnModel",
    "ClassifyResult",
    "init_cnn",
    "cnn_logits",
    "cnn_forward",
    "cnn_loss_and_gradients",
    "train_cnn",
    "gate_with_tags",
    "extract_patches",
    "classify",
    "save_cnn",
    "load_cnn",
]

logger = logging.getLogger(__name__)

CNN_FORMAT_VERSION = 1

GATING_MODES = ("off", "topk", "threshold")


class CnnSpec(BaseConfig):
    """Network architecture

    Attributes
    ----------
    input_shape : (int, int)
        ``(n_features, context_frames)``

    blocks : sequence of (kh, kw, channels, stride, pool)
        One ``conv -> ReLU -> maxpool`` block per entry; valid padding,
        ``pool=1`` disables pooling

    fc : sequence of int
        Hidden fully connected layer widths

    n_classes : int >= 2

    use_tags : bool
        Concatenate the per-speaker GMM scores to the first fully connected
        layer's input
    """

    def __init__(
        self,
        input_shape=(32, 32),
        blocks=((3, 3, 8, 1, 2), (3, 3, 16, 1, 2), (3, 3, 32, 1, 2), (1, 1, 32, 1, 2)),
        fc=(64,),
        n_classes=2,
        use_tags=False,
    ):
        input_shape = tuple(int(v) for v in input_shape)
        blocks = tuple(tuple(int(v) for v in block) for block in blocks)
        fc = tuple(int(v) for v in fc)

        if len(input_shape) != 2 or min(input_shape) < 1:
            raise ParamError("input_shape must be a pair of positive integers")
        for block in blocks:
            if len(block) != 5 or min(block) < 1:
                raise ParamError(
                    "block {} must be 5 positive integers (kh, kw, channels, stride, pool)".format(
                        block
                    )
                )
        if fc and min(fc) < 1:
            raise ParamError("fully connected widths must be positive")
        if n_classes < 2:
            raise ParamError("n_classes must be at least 2")

        self.input_shape = input_shape
        self.blocks = blocks
        self.fc = fc
        self.n_classes = int(n_classes)
        self.use_tags = bool(use_tags)

        self.layer_shapes()

    def layer_shapes(self):
        """Shape ``(channels, height, width)`` after each block

        Raises
        ------
        ParamError
            If any layer would have an empty output
        """

        channels, height, width = 1, self.input_shape[0], self.input_shape[1]
        shapes = []
        for kh, kw, c_out, stride, pool in self.blocks:
            height = ((height - kh) // stride + 1) // pool if height >= kh else 0
            width = ((width - kw) // stride + 1) // pool if width >= kw else 0
            channels = c_out
            if height < 1 or width < 1:
                raise ParamError(
                    "input {} vanishes after block {}".format(
                        self.input_shape, (kh, kw, c_out, stride, pool)
                    )
                )
            shapes.append((channels, height, width))
        return shapes

    def flat_size(self):
        shapes = self.layer_shapes()
        c, h, w = shapes[-1] if shapes else (1,) + self.input_shape
        return c * h * w

    def param_shapes(self):
        """Shapes of the weight and bias tensors, in storage order"""

        shapes = []
        c_in = 1
        for kh, kw, c_out, _, _ in self.blocks:
            shapes.extend([(c_out, c_in, kh, kw), (c_out,)])
            c_in = c_out

        n_in = self.flat_size() + (self.n_classes if self.use_tags else 0)
        for n_out in self.fc + (self.n_classes,):
            shapes.extend([(n_in, n_out), (n_out,)])
            n_in = n_out
        return shapes

    def n_params(self):
        return int(sum(np.prod(s) for s in self.param_shapes()))


class TrainHyper(BaseConfig):
    """Mini-batch SGD with momentum

    Attributes
    ----------
    lr : float > 0
    epochs : int >= 0
    batch_size : int > 0
    momentum : float in [0, 1)
    seed : int
    """

    def __init__(self, lr=0.01, epochs=30, batch_size=16, momentum=0.9, seed=0):
        if lr <= 0:
            raise ParamError("lr must be strictly positive")
        if epochs < 0:
            raise ParamError("epochs must be non-negative")
        if batch_size < 1:
            raise ParamError("batch_size must be positive")
        if not 0 <= momentum < 1:
            raise ParamError("momentum must lie in [0, 1)")
        self.lr = float(lr)
        self.epochs = int(epochs)
        self.batch_size = int(batch_size)
        self.momentum = float(momentum)
        self.seed = int(seed)


class GatingConfig(BaseConfig):
    """How GMM tag scores filter the CNN output

    Attributes
    ----------
    mode : str
        ``off``, ``topk`` or ``threshold``
    k : int > 0 or None
        Speakers kept in ``topk`` mode; ``max(2, ceil(n_speakers / 4))``
        if None
    theta : float >= 0
        Log-likelihood margin (nats) below the best speaker kept in
        ``threshold`` mode
    """

    def __init__(self, mode="topk", k=None, theta=5.0):
        if mode not in GATING_MODES:
            raise ParamError("gating mode must be one of {}".format(GATING_MODES))
        if k is not None and k < 1:
            raise ParamError("k must be positive")
        if theta < 0:
            raise ParamError("theta must be non-negative")
        self.mode = mode
        self.k = None if k is None else int(k)
        self.theta = float(theta)

    def top_k(self, n_speakers):
        if self.k is not None:
            return self.k
        return max(2, int(np.ceil(n_speakers / 4.0)))


class CnnModel(object):
    """Network weights and their provenance

    Attributes
    ----------
    spec : CnnSpec
    params : list of np.ndarray
        Weight and bias tensors in `spec.param_shapes()` order
    classes : list of str
        Label of each output unit
    input_mean, input_std : np.ndarray [shape=(n_features,)]
        Per-feature standardization applied to every patch
    meta : dict
        Training metadata (epochs, seed, loss trace)
    """

    def __init__(self, spec, params, classes=None, input_mean=None, input_std=None, meta=None):
        shapes = spec.param_shapes()
        params = [np.asarray(p, dtype=np.float64) for p in params]
        if [p.shape for p in params] != [tuple(s) for s in shapes]:
            raise ShapeError("parameter shapes do not match the network spec")
        if not all(np.all(np.isfinite(p)) for p in params):
            raise ParamError("network parameters must be finite")

        if classes is None:
            classes = [str(i) for i in range(spec.n_classes)]
        if len(classes) != spec.n_classes:
            raise ShapeError("{} class labels for {} outputs".format(len(classes), spec.n_classes))

        n_feat = spec.input_shape[0]
        self.spec = spec
        self.params = params
        self.classes = [str(c) for c in classes]
        self.input_mean = (
            np.zeros(n_feat) if input_mean is None else np.asarray(input_mean, dtype=np.float64)
        )
        self.input_std = (
            np.ones(n_feat) if input_std is None else np.asarray(input_std, dtype=np.float64)
        )
        if self.input_mean.shape != (n_feat,) or self.input_std.shape != (n_feat,):
            raise ShapeError("input normalization must have one entry per feature")
        self.meta = dict(meta or {})

    def copy(self):
        return CnnModel(
            self.spec,
            [p.copy() for p in self.params],
            list(self.classes),
            self.input_mean.copy(),
            self.input_std.copy(),
            dict(self.meta),
        )

    def __eq__(self, other):
        if not isinstance(other, CnnModel):
            return NotImplemented
        return (
            self.spec == other.spec
            and self.classes == other.classes
            and all(np.array_equal(a, b) for a, b in zip(self.params, other.params))
            and np.array_equal(self.input_mean, other.input_mean)
            and np.array_equal(self.input_std, other.input_std)
        )

    __hash__ = None

    def __repr__(self):
        return "CnnModel(n_params={}, classes={})".format(self.spec.n_params(), self.classes)


def init_cnn(spec, rng=None, classes=None):
    """He-uniform weights, zero biases

    Parameters
    ----------
    spec : CnnSpec
    rng : None, int or np.random.RandomState
    classes : list of str or None
    """

    rng = _get_rng(rng)
    params = []
    for shape in spec.param_shapes():
        if len(shape) == 1:
            params.append(np.zeros(shape))
        else:
            fan_in = int(np.prod(shape[1:])) if len(shape) == 4 else shape[0]
            limit = np.sqrt(6.0 / fan_in)
            params.append(rng.uniform(-limit, limit, size=shape))
    return CnnModel(spec, params, classes=classes)


def _im2col(x, kh, kw, stride):
    n = x.shape[0]
    win = sliding_window_view(x, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    oh, ow = win.shape[2], win.shape[3]
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(n * oh * ow, -1)
    return cols, oh, ow


def _col2im(dcols, x_shape, kh, kw, stride, oh, ow):
    n, c = x_shape[:2]
    d = dcols.reshape(n, oh, ow, c, kh, kw)
    dx = np.zeros(x_shape)
    for i in range(kh):
        for j in range(kw):
            dx[
                :,
                :,
                i : i + stride * (oh - 1) + 1 : stride,
                j : j + stride * (ow - 1) + 1 : stride,
            ] += d[:, :, :, :, i, j].transpose(0, 3, 1, 2)
    return dx


def _maxpool(a, pool):
    if pool == 1:
        return a, None
    n, c, h, w = a.shape
    ho, wo = h // pool, w // pool
    r = (
        a[:, :, : ho * pool, : wo * pool]
        .reshape(n, c, ho, pool, wo, pool)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(n, c, ho, wo, pool * pool)
    )
    arg = r.argmax(axis=-1)
    return np.take_along_axis(r, arg[..., np.newaxis], axis=-1)[..., 0], arg


def _maxpool_backward(dout, arg, shape, pool):
    if pool == 1:
        return dout
    n, c, ho, wo = dout.shape
    r = np.zeros((n, c, ho, wo, pool * pool))
    np.put_along_axis(r, arg[..., np.newaxis], dout[..., np.newaxis], axis=-1)
    r = (
        r.reshape(n, c, ho, wo, pool, pool)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(n, c, ho * pool, wo * pool)
    )
    da = np.zeros(shape)
    da[:, :, : ho * pool, : wo * pool] = r
    return da


def _as_batch(patches, model):
    X = np.asarray(patches, dtype=np.float64)
    single = X.ndim == 2
    if single:
        X = X[np.newaxis]
    if X.ndim != 3 or X.shape[1:] != model.spec.input_shape:
        raise ShapeError(
            "patch shape {} does not match network input {}".format(
                X.shape[-2:], model.spec.input_shape
            )
        )
    return X, single


def _as_tags(tags, model, n):
    if not model.spec.use_tags:
        return None
    if tags is None:
        raise ParamError("this network needs per-speaker GMM scores")
    tags = np.atleast_2d(np.asarray(tags, dtype=np.float64))
    if tags.shape != (n, model.spec.n_classes):
        if tags.shape == (1, model.spec.n_classes):
            tags = np.repeat(tags, n, axis=0)
        else:
            raise ShapeError("expected {} GMM scores per patch".format(model.spec.n_classes))
    # relative to the best speaker
    return tags - tags.max(axis=1, keepdims=True)


def _forward(model, X, tags=None):
    spec = model.spec
    params = model.params
    n = X.shape[0]

    x = ((X - model.input_mean[:, np.newaxis]) / model.input_std[:, np.newaxis])[
        :, np.newaxis, :, :
    ]

    conv_cache = []
    for b, (kh, kw, c_out, stride, pool) in enumerate(spec.blocks):
        W, bias = params[2 * b], params[2 * b + 1]
        cols, oh, ow = _im2col(x, kh, kw, stride)
        z = (cols @ W.reshape(c_out, -1).T + bias).reshape(n, oh, ow, c_out)
        z = z.transpose(0, 3, 1, 2)
        a = np.maximum(z, 0)
        pooled, arg = _maxpool(a, pool)
        conv_cache.append((x.shape, cols, z, arg, oh, ow))
        x = pooled

    pooled_shape = x.shape
    h = x.reshape(n, -1)
    if tags is not None:
        h = np.hstack([h, tags])

    offset = 2 * len(spec.blocks)
    n_fc = len(spec.fc) + 1
    fc_cache = []
    for j in range(n_fc):
        W, bias = params[offset + 2 * j], params[offset + 2 * j + 1]
        z = h @ W + bias
        fc_cache.append((h, z))
        h = np.maximum(z, 0) if j < n_fc - 1 else z

    return h, (conv_cache, pooled_shape, fc_cache)


def _softmax(logits):
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def cnn_logits(patches, model, tags=None):
    """Pre-softmax network outputs

    Parameters
    ----------
    patches : np.ndarray [shape=input_shape or (B,) + input_shape]
    model : CnnModel
    tags : np.ndarray or None
        Per-speaker GMM scores; required iff ``model.spec.use_tags``

    Returns
    -------
    logits : np.ndarray [shape=(n_classes,) or (B, n_classes)]
    """

    X, single = _as_batch(patches, model)
    logits, _ = _forward(model, X, _as_tags(tags, model, len(X)))
    return logits[0] if single else logits


def cnn_forward(patches, model, tags=None):
    """Class probabilities

    Parameters
    ----------
    patches : np.ndarray [shape=input_shape or (B,) + input_shape]
    model : CnnModel
    tags : np.ndarray or None

    Returns
    -------
    probs : np.ndarray [shape=(n_classes,) or (B, n_classes)]
        Non-negative, summing to 1
    """

    return _softmax(cnn_logits(patches, model, tags))


def cnn_loss_and_gradients(patches, labels, model, tags=None):
    """Mean cross-entropy and its gradient by back-propagation.

    Parameters
    ----------
    patches : np.ndarray [shape=(B,) + input_shape]
    labels : np.ndarray [shape=(B,)]
        Class indices
    model : CnnModel
    tags : np.ndarray or None

    Returns
    -------
    loss : float
    grads : list of np.ndarray
        One per entry of `model.params`

    Raises
    ------
    LabelError
        If a label is outside ``[0, n_classes)``
    """

    X, _ = _as_batch(patches, model)
    labels = np.atleast_1d(np.asarray(labels))
    n = X.shape[0]
    if n == 0:
        raise DataError("empty batch")
    if labels.shape != (n,):
        raise ShapeError("one label per patch required")
    n_classes = model.spec.n_classes
    if np.any(labels < 0) or np.any(labels >= n_classes) or np.any(labels != np.round(labels)):
        raise LabelError("labels must be class indices in [0, {})".format(n_classes))
    labels = labels.astype(int)

    tag_in = _as_tags(tags, model, n)
    logits, (conv_cache, pooled_shape, fc_cache) = _forward(model, X, tag_in)

    shifted = logits - logits.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.sum(np.exp(shifted), axis=1, keepdims=True))
    loss = -float(np.mean(log_probs[np.arange(n), labels]))

    spec = model.spec
    params = model.params
    grads = [None] * len(params)

    dh = np.exp(log_probs)
    dh[np.arange(n), labels] -= 1.0
    dh /= n

    offset = 2 * len(spec.blocks)
    n_fc = len(fc_cache)
    for j in reversed(range(n_fc)):
        h_in, z = fc_cache[j]
        dz = dh if j == n_fc - 1 else dh * (z > 0)
        W = params[offset + 2 * j]
        grads[offset + 2 * j] = h_in.T @ dz
        grads[offset + 2 * j + 1] = dz.sum(axis=0)
        dh = dz @ W.T

    if tag_in is not None:
        dh = dh[:, : dh.shape[1] - n_classes]
    dx = dh.reshape(pooled_shape)

    for b in reversed(range(len(spec.blocks))):
        kh, kw, c_out, stride, pool = spec.blocks[b]
        x_shape, cols, z, arg, oh, ow = conv_cache[b]
        da = _maxpool_backward(dx, arg, z.shape, pool)
        dz = (da * (z > 0)).transpose(0, 2, 3, 1).reshape(-1, c_out)
        W = params[2 * b]
        grads[2 * b] = (dz.T @ cols).reshape(W.shape)
        grads[2 * b + 1] = dz.sum(axis=0)
        if b > 0:
            dx = _col2im(dz @ W.reshape(c_out, -1), x_shape, kh, kw, stride, oh, ow)

    return loss, grads


def train_cnn(patches, labels, spec, hyper=None, tags=None, classes=None):
    """Train a network by mini-batch SGD with momentum.

    Parameters
    ----------
    patches : np.ndarray [shape=(n,) + spec.input_shape]
    labels : np.ndarray [shape=(n,)]
        Class indices; every class must occur at least once
    spec : CnnSpec
    hyper : TrainHyper or None
    tags : np.ndarray [shape=(n, n_classes)] or None
        Per-speaker GMM scores of each patch's utterance
    classes : list of str or None
        Output labels

    Returns
    -------
    model : CnnModel
        With ``meta['loss_trace']``: the initial full-data loss followed by
        the mean loss of each epoch
        Zero epochs leave the initialized network, input normalization
        included, untouched

    Raises
    ------
    DivergenceError
        If the loss becomes non-finite; reduce the learning rate
    """

    hyper = hyper or TrainHyper()
    X = np.asarray(patches, dtype=np.float64)
    labels = np.asarray(labels).astype(int)
    if X.ndim != 3 or X.shape[1:] != spec.input_shape:
        raise ShapeError("patches must have shape (n,) + {}".format(spec.input_shape))
    if len(labels) != len(X):
        raise ShapeError("one label per patch required")

    counts = np.bincount(labels[(labels >= 0) & (labels < spec.n_classes)], minlength=spec.n_classes)
    if np.any(labels < 0) or np.any(labels >= spec.n_classes):
        raise LabelError("labels must lie in [0, {})".format(spec.n_classes))
    if np.any(counts == 0):
        raise DataError(
            "no training patch for class(es) {}".format(np.flatnonzero(counts == 0).tolist())
        )

    rng = _get_rng(hyper.seed)
    model = init_cnn(spec, rng, classes=classes)

    if hyper.epochs > 0:
        model.input_mean = X.mean(axis=(0, 2))
        std = X.std(axis=(0, 2))
        model.input_std = np.where(std > 1e-8, std, 1.0)

    loss, _ = cnn_loss_and_gradients(X, labels, model, tags)
    trace = [loss]
    velocity = [np.zeros_like(p) for p in model.params]

    n = len(X)
    for epoch in range(hyper.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, hyper.batch_size):
            idx = order[start : start + hyper.batch_size]
            batch_tags = None if tags is None else np.asarray(tags)[idx]
            loss, grads = cnn_loss_and_gradients(X[idx], labels[idx], model, batch_tags)
            if not np.isfinite(loss):
                raise DivergenceError(
                    "non-finite loss at epoch {}; reduce the learning rate (lr={})".format(
                        epoch, hyper.lr
                    )
                )
            for p, v, g in zip(model.params, velocity, grads):
                v *= hyper.momentum
                v -= hyper.lr * g
                p += v
            total += loss * len(idx)
        trace.append(total / n)
        logger.debug("Epoch %d: loss %.5f", epoch, trace[-1])

    if not all(np.all(np.isfinite(p)) for p in model.params):
        raise DivergenceError("non-finite weights; reduce the learning rate")

    model.meta = dict(
        epochs=hyper.epochs, seed=hyper.seed, loss_trace=trace, final_loss=trace[-1]
    )
    logger.info(
        "Trained CNN (%d parameters): loss %.4f -> %.4f over %d epochs",
        spec.n_params(),
        trace[0],
        trace[-1],
        hyper.epochs,
    )
    return model


def gate_with_tags(probs, scores, config=None, speakers=None):
    """Filter CNN probabilities by GMM tag scores.

    Parameters
    ----------
    probs : np.ndarray [shape=(n_speakers,)]
    scores : np.ndarray [shape=(n_speakers,)] or LikelihoodVector
        Per-speaker GMM scores aligned with `probs`; a likelihood vector is
        reduced per speaker (max over emotions) in `speakers` order
    config : GatingConfig or None
    speakers : list of str or None
        Needed when `scores` is a likelihood vector

    Returns
    -------
    gated : np.ndarray [shape=(n_speakers,)]
        Sums to 1; never all zero
    """

    config = config or GatingConfig()
    probs = np.asarray(probs, dtype=np.float64)

    if hasattr(scores, "speaker_scores"):
        if speakers is None:
            raise ParamError("speaker order is required to gate with a likelihood vector")
        scores = scores.speaker_scores(speakers)
    scores = np.asarray(scores, dtype=np.float64)
    if scores.shape != probs.shape:
        raise ShapeError("probabilities and GMM scores cover different speaker sets")

    if config.mode == "off":
        return probs

    if config.mode == "topk":
        k = min(config.top_k(len(scores)), len(scores))
        keep = np.argsort(-scores, kind="stable")[:k]
        mask = np.zeros(len(scores), dtype=bool)
        mask[keep] = True
    else:
        mask = scores >= np.max(scores) - config.theta

    gated = np.where(mask, probs, 0.0)
    total = gated.sum()
    if not total > 0:
        best = int(np.argmax(scores))
        logger.warning("Gating removed every speaker; keeping the GMM best (%d)", best)
        gated = np.zeros_like(probs)
        gated[best] = 1.0
        return gated
    return gated / total


class ClassifyResult(object):
    """Outcome of `classify`

    Attributes
    ----------
    speaker : str
    confidence : float
    probs : np.ndarray
        Window-averaged gated probabilities
    n_windows : int
    padded : bool
        True if the utterance was shorter than one context window
    """

    __slots__ = ("speaker", "confidence", "probs", "n_windows", "padded")

    def __init__(self, speaker, confidence, probs, n_windows, padded):
        self.speaker = speaker
        self.confidence = float(confidence)
        self.probs = probs
        self.n_windows = int(n_windows)
        self.padded = bool(padded)


def extract_patches(features, context, hop=None):
    """Tile a feature matrix into ``(n_features, context)`` patches.

    Utterances shorter than `context` frames are padded by repeating their
    last frame.

    Parameters
    ----------
    features : FeatureMatrix or np.ndarray [shape=(T, n_features)]
    context : int
    hop : int or None
        Window advance in frames; half the context by default

    Returns
    -------
    patches : np.ndarray [shape=(n_windows, n_features, context)]
    padded : bool
    """

    values = np.asarray(getattr(features, "values", features), dtype=np.float64)
    if values.shape[0] == 0:
        raise DataError("no frames to tile")
    hop = max(1, context // 2) if hop is None else int(hop)

    padded = values.shape[0] < context
    if padded:
        values = np.pad(values, [(0, context - values.shape[0]), (0, 0)], mode="edge")

    starts = range(0, values.shape[0] - context + 1, hop)
    return np.stack([values[s : s + context].T for s in starts]), padded


def classify(features, model, scores, config=None, hop=None):
    """Speaker decision from context windows of an utterance.

    Each window is classified by the network, gated by the utterance's GMM
    scores, and the gated distributions are averaged.

    Parameters
    ----------
    features : FeatureMatrix or np.ndarray [shape=(T, n_features)]
    model : CnnModel
    scores : np.ndarray [shape=(n_classes,)] or LikelihoodVector
        Per-speaker GMM scores, in `model.classes` order
    config : GatingConfig or None
    hop : int or None
        Window advance; half the context by default

    Returns
    -------
    result : ClassifyResult
    """

    values = np.asarray(getattr(features, "values", features), dtype=np.float64)
    n_feat, context = model.spec.input_shape
    if values.ndim != 2 or values.shape[1] != n_feat:
        raise ShapeError(
            "features have shape {}, network expects {} per frame".format(values.shape, n_feat)
        )

    patches, padded = extract_patches(values, context, hop)
    if padded:
        logger.warning(
            "Utterance of %d frames padded to a %d-frame window", values.shape[0], context
        )

    if hasattr(scores, "speaker_scores"):
        scores = scores.speaker_scores(model.classes)
    scores = np.asarray(scores, dtype=np.float64)

    tags = scores if model.spec.use_tags else None
    probs = np.atleast_2d(cnn_forward(patches, model, tags))
    gated = np.mean([gate_with_tags(p, scores, config) for p in probs], axis=0)

    best = int(np.argmax(gated))
    return ClassifyResult(model.classes[best], gated[best], gated, len(patches), padded)


def _blob(model):
    arrays = list(model.params) + [model.input_mean, model.input_std]
    return b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for a in arrays)


def save_cnn(model, json_path, bin_path):
    """Store a network as a JSON header and a raw float64 weight blob.

    Returns
    -------
    digest : str
        SHA-256 of the blob
    """

    blob = _blob(model)
    digest = hashlib.sha256(blob).hexdigest()
    header = dict(
        format_version=CNN_FORMAT_VERSION,
        spec=model.spec.to_dict(),
        classes=model.classes,
        meta=model.meta,
        sha256=digest,
        n_values=len(blob) // 8,
    )
    try:
        with open(str(bin_path), "wb") as fdesc:
            fdesc.write(blob)
        with open(str(json_path), "w", encoding="utf-8") as fdesc:
            json.dump(header, fdesc, sort_keys=True)
    except OSError as exc:
        raise IoError("cannot write network files: {}".format(exc))
    return digest


def load_cnn(json_path, bin_path):
    """Load a network written by `save_cnn`.

    Raises
    ------
    CorruptModelError
        If a file is missing or the blob does not match its hash
    VersionError
        If the header format version is not supported
    """

    try:
        with open(str(json_path), "r", encoding="utf-8") as fdesc:
            header = json.load(fdesc)
        with open(str(bin_path), "rb") as fdesc:
            blob = fdesc.read()
    except FileNotFoundError as exc:
        raise CorruptModelError("missing network file: {}".format(exc))
    except OSError as exc:
        raise IoError("cannot read network files: {}".format(exc))
    except ValueError as exc:
        raise FormatError("malformed network header: {}".format(exc))

    if header.get("format_version") != CNN_FORMAT_VERSION:
        raise VersionError(
            "network format {} is not supported (expected {})".format(
                header.get("format_version"), CNN_FORMAT_VERSION
            )
        )
    if hashlib.sha256(blob).hexdigest() != header.get("sha256"):
        raise CorruptModelError("network weights do not match their SHA-256")

    spec = CnnSpec.from_dict(header["spec"])
    values = np.frombuffer(blob, dtype="<f8").astype(np.float64)
    n_feat = spec.input_shape[0]
    shapes = [tuple(s) for s in spec.param_shapes()] + [(n_feat,), (n_feat,)]
    sizes = [int(np.prod(s)) for s in shapes]
    if sum(sizes) != values.size:
        raise CorruptModelError("weight blob size does not match the network spec")

    arrays = []
    pos = 0
    for shape, size in zip(shapes, sizes):
        arrays.append(values[pos : pos + size].reshape(shape).copy())
        pos += size

    return CnnModel(
        spec,
        arrays[:-2],
        classes=header["classes"],
        input_mean=arrays[-2],
        input_std=arrays[-1],
        meta=header.get("meta"),
    )
