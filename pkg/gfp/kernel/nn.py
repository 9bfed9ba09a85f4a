# Copyright (c) 2025 The GFP authors
# GNU General Public License v3.0+ (see COPYING or https://www.gnu.org/licenses/gpl-3.0.txt)
"""
Dense GeLU networks with optional layer normalization and a sinusoidal time input.

Everything runs in float64 and gradients are computed by hand in mlp_backward, there is
no general purpose autodiff here: only the MLP shapes used by the agent are supported.
"""

import dataclasses
import math
from typing import Tuple

import numpy as np
from scipy.special import ndtr

from gfp.exceptions import ShapeError, StaleCacheError

LAYER_NORM_EPS = 1e-6
TIME_SCALE = 1000.0
INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def gelu(x):
    """ Exact GeLU, x * Phi(x) """
    return x * ndtr(x)


def gelu_grad(x, cdf=None):
    """ Phi(x) + x * phi(x), reusing Phi(x) when the forward pass already computed it """
    cdf = ndtr(x) if cdf is None else cdf
    return cdf + x * INV_SQRT_2PI * np.exp(-0.5 * np.square(x))


def _normalize(x):
    mean = x.mean(axis=-1, keepdims=True)
    centered = x - mean
    sigma = np.sqrt(np.square(centered).mean(axis=-1, keepdims=True) + LAYER_NORM_EPS)
    return centered / sigma, sigma


def layer_norm(x, gain, offset):
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] < 2 or np.shape(gain) != x.shape[-1:] or np.shape(offset) != x.shape[-1:]:
        raise ShapeError("layer_norm", "matching lengths >= 2", (x.shape, np.shape(gain), np.shape(offset)))
    xhat, _ = _normalize(x)
    return gain * xhat + offset


def time_embed(t, dim):
    """
    Sinusoidal embedding of a flow time (scalar or batch), sin features first then cos features.
    """
    if dim < 2 or dim % 2:
        raise ShapeError("time_embed dim", "an even integer >= 2", dim)
    half = dim // 2
    freqs = np.exp(-math.log(10000.0) * np.arange(half) / max(half - 1, 1))
    p = TIME_SCALE * np.asarray(t, dtype=np.float64)
    args = np.multiply.outer(p, freqs)
    return np.concatenate([np.sin(args), np.cos(args)], axis=-1)


@dataclasses.dataclass(frozen=True)
class MlpSpec:
    input_dim: int
    hidden_dims: Tuple[int, ...]
    output_dim: int
    use_layer_norm: bool = False
    time_embed_dim: int = 0

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(d) for d in self.hidden_dims))
        if self.input_dim < 1 or self.output_dim < 1:
            raise ShapeError("MlpSpec", "input_dim and output_dim >= 1", (self.input_dim, self.output_dim))
        if not self.hidden_dims or min(self.hidden_dims) < 1:
            raise ShapeError("MlpSpec.hidden_dims", "a non-empty list of positive integers", self.hidden_dims)
        if self.use_layer_norm and min(self.hidden_dims) < 2:
            raise ShapeError("MlpSpec.hidden_dims", "widths >= 2 when layer norm is enabled", self.hidden_dims)
        if self.time_embed_dim < 0 or self.time_embed_dim % 2:
            raise ShapeError("MlpSpec.time_embed_dim", "0 or a positive even integer", self.time_embed_dim)

    @property
    def full_input_dim(self):
        return self.input_dim + self.time_embed_dim

    @property
    def layer_dims(self):
        dims = (self.full_input_dim,) + self.hidden_dims + (self.output_dim,)
        return list(zip(dims[:-1], dims[1:]))

    def to_dict(self):
        data = dataclasses.asdict(self)
        data["hidden_dims"] = list(self.hidden_dims)
        return data

    @classmethod
    def from_dict(cls, data):
        return cls(**data)


class ParamSet(object):
    """
    Parameters of one MLP. `layers` is a list of dicts holding "weight" (fan_in, fan_out) and
    "bias", plus "gain" and "offset" on hidden layers when the spec enables layer norm.
    `version` is bumped on every in-place update so forward caches can detect staleness.
    """

    def __init__(self, spec, layers):
        self.spec = spec
        self.layers = layers
        self.version = 0
        self._check_shapes()

    def _check_shapes(self):
        if len(self.layers) != len(self.spec.layer_dims):
            raise ShapeError("ParamSet layers", len(self.spec.layer_dims), len(self.layers))
        for name, array in self.named_arrays():
            expected = self._expected_shape(name)
            if array.shape != expected:
                raise ShapeError("ParamSet %s" % name, expected, array.shape)

    def _expected_shape(self, name):
        layer, kind = name.split(".")
        fan_in, fan_out = self.spec.layer_dims[int(layer[len("layer"):])]
        return (fan_in, fan_out) if kind == "weight" else (fan_out,)

    def has_norm(self, index):
        return self.spec.use_layer_norm and index < len(self.spec.hidden_dims)

    def named_arrays(self):
        """ Canonical order: weight, bias, then gain and offset, layer by layer """
        for index, layer in enumerate(self.layers):
            keys = ("weight", "bias", "gain", "offset") if self.has_norm(index) else ("weight", "bias")
            for key in keys:
                yield "layer%d.%s" % (index, key), layer[key]

    def arrays(self):
        return [array for _, array in self.named_arrays()]

    def bump(self):
        self.version += 1

    def copy(self):
        return ParamSet(self.spec, [{k: v.copy() for k, v in layer.items()} for layer in self.layers])

    def zeros_like(self):
        return ParamSet(self.spec, [{k: np.zeros_like(v) for k, v in layer.items()} for layer in self.layers])

    def assign(self, other):
        """ Copies the values of another ParamSet with the same spec in place """
        check_compatible(self, other, "assign")
        for dst, src in zip(self.arrays(), other.arrays()):
            dst[...] = src
        self.bump()

    def is_finite(self):
        return all(np.all(np.isfinite(a)) for a in self.arrays())

    def max_abs_diff(self, other):
        check_compatible(self, other, "max_abs_diff")
        return max(float(np.max(np.abs(a - b))) for a, b in zip(self.arrays(), other.arrays()))

    @classmethod
    def zeros(cls, spec):
        layers = []
        for index, (fan_in, fan_out) in enumerate(spec.layer_dims):
            layer = {"weight": np.zeros((fan_in, fan_out)), "bias": np.zeros(fan_out)}
            if spec.use_layer_norm and index < len(spec.hidden_dims):
                layer["gain"] = np.ones(fan_out)
                layer["offset"] = np.zeros(fan_out)
            layers.append(layer)
        return cls(spec, layers)

    @classmethod
    def init(cls, spec, rng, zero_output=False):
        """ LeCun-normal weights, zero biases, unit gains """
        params = cls.zeros(spec)
        for index, layer in enumerate(params.layers):
            if zero_output and index == len(params.layers) - 1:
                continue
            fan_in, fan_out = layer["weight"].shape
            layer["weight"][...] = rng.standard_normal((fan_in, fan_out)) / math.sqrt(fan_in)
        return params


def check_compatible(a, b, what):
    if a.spec != b.spec:
        raise ShapeError(what, a.spec, b.spec)


class ForwardCache(object):
    __slots__ = ("params", "version", "inputs", "hidden", "output")

    def __init__(self, params, inputs):
        self.params = params
        self.version = params.version
        self.inputs = inputs
        self.hidden = []
        self.output = None


def _as_batch(inputs, width, what):
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != width:
        raise ShapeError(what, "(batch, %d)" % width, x.shape)
    return x


def mlp_forward(params, spec, inputs, t=None):
    """
    Runs the network on a (batch, input_dim) array, appending time_embed(t) when the spec has a
    time input. Returns (outputs, cache) where the cache feeds mlp_backward.
    """
    if params.spec != spec:
        raise ShapeError("mlp_forward params", spec, params.spec)
    x = _as_batch(inputs, spec.input_dim, "mlp_forward inputs")
    if spec.time_embed_dim:
        if t is None:
            raise ShapeError("mlp_forward t", "a time batch for a time-conditioned network", None)
        t = np.broadcast_to(np.asarray(t, dtype=np.float64), (x.shape[0],))
        x = np.concatenate([x, time_embed(t, spec.time_embed_dim)], axis=1)
    elif t is not None:
        raise ShapeError("mlp_forward t", "no time input", np.shape(t))

    cache = ForwardCache(params, x)
    h = x
    for index in range(len(spec.hidden_dims)):
        xhat, sigma, u, cdf, out = _activate(params, index, _affine(h, params.layers[index]))
        cache.hidden.append((h, xhat, sigma, u, cdf))
        h = out
    cache.output = h
    return _affine(h, params.layers[-1]), cache


def _affine(h, layer):
    z = h @ layer["weight"]
    z += layer["bias"]
    return z


def _activate(params, index, z):
    """ (layer norm) then GeLU on the pre-activation z of hidden layer `index` """
    if params.has_norm(index):
        layer = params.layers[index]
        xhat, sigma = _normalize(z)
        u = xhat * layer["gain"]
        u += layer["offset"]
    else:
        xhat, sigma, u = None, None, z
    cdf = ndtr(u)
    return xhat, sigma, u, cdf, u * cdf


def mlp_continue(params, spec, z):
    """
    Inference from the pre-activation of the first hidden layer to the output, no cache kept.
    Lets callers that evaluate one network many times on partly fixed inputs assemble the first
    layer themselves.
    """
    if params.spec != spec:
        raise ShapeError("mlp_continue params", spec, params.spec)
    if np.ndim(z) != 2 or np.shape(z)[1] != spec.hidden_dims[0]:
        raise ShapeError("mlp_continue z", "(batch, %d)" % spec.hidden_dims[0], np.shape(z))
    h = _activate(params, 0, z)[-1]
    for index in range(1, len(spec.hidden_dims)):
        h = _activate(params, index, _affine(h, params.layers[index]))[-1]
    return _affine(h, params.layers[-1])


def mlp_apply(params, spec, inputs, t=None):
    return mlp_forward(params, spec, inputs, t)[0]


def mlp_backward(cache, grad_out, param_grads=True):
    """
    Reverse-mode pass for a cached forward. Returns (grads, input_grads); grads is a ParamSet
    (None when param_grads is False) and input_grads covers the raw input columns only, the
    time embedding columns are dropped.
    """
    params = cache.params
    if params.version != cache.version:
        raise StaleCacheError(cache.version, params.version)
    spec = params.spec
    g = np.asarray(grad_out, dtype=np.float64)
    batch = cache.inputs.shape[0]
    if g.shape != (batch, spec.output_dim):
        raise ShapeError("mlp_backward grad_out", (batch, spec.output_dim), g.shape)

    grads = params.zeros_like() if param_grads else None
    last = params.layers[-1]
    if param_grads:
        grads.layers[-1]["weight"][...] = cache.output.T @ g
        grads.layers[-1]["bias"][...] = g.sum(axis=0)
    g = g @ last["weight"].T

    for index in reversed(range(len(spec.hidden_dims))):
        layer = params.layers[index]
        h_in, xhat, sigma, u, cdf = cache.hidden[index]
        du = g * gelu_grad(u, cdf)
        if spec.use_layer_norm:
            if param_grads:
                grads.layers[index]["gain"][...] = (du * xhat).sum(axis=0)
                grads.layers[index]["offset"][...] = du.sum(axis=0)
            dxhat = du * layer["gain"]
            dz = (
                dxhat
                - dxhat.mean(axis=1, keepdims=True)
                - xhat * (dxhat * xhat).mean(axis=1, keepdims=True)
            ) / sigma
        else:
            dz = du
        if param_grads:
            grads.layers[index]["weight"][...] = h_in.T @ dz
            grads.layers[index]["bias"][...] = dz.sum(axis=0)
        g = dz @ layer["weight"].T

    return grads, g[:, : spec.input_dim]
