#!/usr/bin/env python
"""Base module components."""

import copy
import inspect

import jsonpickle
import numpy as np

from .exceptions import ParamError

__all__ = ["BaseConfig", "BaseTransformer", "serialize", "deserialize"]


class BaseConfig(object):
    """The base class for all parameter objects.

    Parameters are the keyword arguments of ``__init__``, stored as
    attributes of the same name.  This provides introspection, printing,
    equality and serialization."""

    # This bit gleefully stolen from sklearn.base
    @classmethod
    def _get_param_names(cls):
        """Get the list of parameter names for the object"""

        init = cls.__init__
        if init is object.__init__:
            return []

        args, varargs = inspect.getfullargspec(init)[:2]

        if varargs is not None:
            raise RuntimeError("BaseConfig objects cannot have varargs")

        args.pop(0)
        args.sort()
        return args

    def get_params(self, deep=True):
        """Get the parameters for this object.  Returns as a dict.

        Parameters
        ----------
        deep : bool
            Recurse on nested objects

        Returns
        -------
        params : dict
            A dictionary containing all parameters for this object
        """

        out = dict(__class__=self.__class__, params=dict())

        for key in self._get_param_names():
            value = getattr(self, key, None)

            if deep and hasattr(value, "get_params"):
                out["params"][key] = value.get_params()
            else:
                out["params"][key] = value

        return out

    def to_dict(self):
        """Plain key-value form of the parameters (nested configs expanded)"""

        out = dict()
        for key in self._get_param_names():
            value = getattr(self, key, None)
            if isinstance(value, BaseConfig):
                value = value.to_dict()
            elif isinstance(value, tuple):
                value = list(value)
            out[key] = value
        return out

    @classmethod
    def from_dict(cls, data):
        """Construct from a plain key-value document.

        Unknown keys raise `ParamError`.
        """
        data = dict(data or {})
        unknown = set(data) - set(cls._get_param_names())
        if unknown:
            raise ParamError(
                "{}: unknown parameter(s) {}".format(cls.__name__, sorted(unknown))
            )
        return cls(**data)

    def replace(self, **kwargs):
        """Copy of this object with some parameters changed"""
        params = {k: getattr(self, k) for k in self._get_param_names()}
        params.update(kwargs)
        return self.__class__(**params)

    def __eq__(self, other):
        if type(self) is not type(other):
            return NotImplemented
        return _params_equal(self.to_dict(), other.to_dict())

    def __ne__(self, other):
        result = self.__eq__(other)
        if result is NotImplemented:
            return result
        return not result

    __hash__ = None

    def __repr__(self):
        """Pretty-print this object"""

        class_name = self.__class__.__name__
        return "{:s}({:s})".format(
            class_name,
            _pprint(self.get_params(deep=False)["params"], offset=len(class_name)),
        )


class BaseTransformer(BaseConfig):
    """The base class for audio transformations.

    A transformer generates a sequence of *states* for an input clip, and
    applies each state to produce an output clip.  The output clip carries
    the input's history extended by ``{"transformer": ..., "state": ...}``
    so that it can be replayed later.
    """

    def states(self, clip):
        raise NotImplementedError

    def audio(self, clip, state):
        raise NotImplementedError

    def _transform(self, clip, state):
        """Apply the transformation for a single state.

        Parameters
        ----------
        clip : casasid.AudioClip
            Input clip (not modified)

        state : dict
            One of the states generated by `states`

        Returns
        -------
        clip_out : casasid.AudioClip
            The transformed clip with its history updated
        """

        out = self.audio(clip, state)

        history = list(clip.meta.get("history", []))
        history.append({"transformer": self.__serialize__, "state": state})

        meta = copy.deepcopy(dict(out.meta))
        meta["history"] = history
        return out.with_meta(**meta)

    def transform(self, clip):
        """Iterative transformation generator

        Parameters
        ----------
        clip : casasid.AudioClip
            The clip to transform

        Yields
        ------
        clip_out : casasid.AudioClip
            One transformed clip per state

        Examples
        --------
        >>> for noisy in mixer.transform(clip):
        ...     process(noisy)
        """

        for state in self.states(clip):
            yield self._transform(clip, state)

    @property
    def __serialize__(self):
        """Serializer"""

        data = self.get_params()
        data["__class__"] = data["__class__"].__name__
        return data


def _params_equal(a, b):
    if isinstance(a, dict) and isinstance(b, dict):
        return a.keys() == b.keys() and all(_params_equal(a[k], b[k]) for k in a)
    if isinstance(a, (list, tuple)) and isinstance(b, (list, tuple)):
        return len(a) == len(b) and all(_params_equal(x, y) for x, y in zip(a, b))
    if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
        return np.array_equal(a, b)
    return a == b


def __reconstruct(params):
    """Reconstruct a configuration object given a parameter dump."""

    if isinstance(params, dict):
        if "__class__" in params:
            cls = params["__class__"]
            data = __reconstruct(params["params"])
            return cls(**data)
        else:
            data = dict()
            for key, value in params.items():
                data[key] = __reconstruct(value)
            return data

    elif isinstance(params, list):
        return [__reconstruct(v) for v in params]

    elif isinstance(params, tuple):
        return tuple(__reconstruct(v) for v in params)

    else:
        return params


def serialize(config, **kwargs):
    """Serialize a configuration or transformer object.

    Parameters
    ----------
    config : BaseConfig
        The object to be serialized

    kwargs
        Additional keyword arguments to `jsonpickle.encode()`

    Returns
    -------
    json_str : str
        A JSON encoding of the object

    See Also
    --------
    deserialize

    Examples
    --------
    >>> cfg = casasid.CasaConfig(rho_min=-5, rho_max=5)
    >>> cfg2 = casasid.deserialize(casasid.serialize(cfg))
    >>> cfg2 == cfg
    True
    """

    kwargs.setdefault("keys", False)
    return jsonpickle.encode(config.get_params(), **kwargs)


def deserialize(encoded, **kwargs):
    """Construct a configuration object from a JSON encoded string.

    Parameters
    ----------
    encoded : str
        JSON encoding of the object

    kwargs
        Additional keyword arguments to `jsonpickle.decode()`

    Returns
    -------
    obj
        The configuration object

    See Also
    --------
    serialize
    """

    params = jsonpickle.decode(encoded, **kwargs)

    return __reconstruct(params)


def _pprint(params, offset=0):
    """Sorted ``key=value`` pairs, wrapped before 75 columns"""

    line_sep = ",\n" + (1 + offset // 2) * " "
    pieces = []
    width = offset
    for key, value in sorted(params.items()):
        text = "{}={!r}".format(key, value)
        if pieces:
            if width + len(text) >= 75:
                pieces.append(line_sep)
                width = len(line_sep)
            else:
                pieces.append(", ")
                width += 2
        pieces.append(text)
        width += len(text)
    return "".join(pieces)


def _get_rng(random_state):
    """Get a random number generator (RandomState) object
    from a seed or existing state.

    Parameters
    ----------
    random_state : None, int, or np.random.RandomState
        If int, random_state is the seed used by the random number generator;

        If RandomState instance, random_state is the random number generator;

        If None, the random number generator is a copy of the current global
        random state.

    Returns
    -------
    rng : np.random.RandomState
        The RandomState object
    """
    if random_state is None:
        state = np.random.get_state()
        rng = np.random.RandomState()
        rng.set_state(state)
    elif isinstance(random_state, (int, np.integer)) and not isinstance(
        random_state, bool
    ):
        rng = np.random.RandomState(seed=int(random_state))
    elif isinstance(random_state, np.random.RandomState):
        rng = random_state
    else:
        raise ParamError("Invalid random_state={}".format(random_state))

    return rng
