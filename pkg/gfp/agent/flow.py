# Copyright (c) 2025 The GFP authors
# GNU General Public License v3.0+ (see COPYING or https://www.gnu.org/licenses/gpl-3.0.txt)
"""
Multi-step flow policy: a time-conditioned velocity field integrated with explicit Euler steps
from Gaussian noise to an action, trained by (weighted) conditional flow matching.
"""

import logging

import numpy as np

from gfp.exceptions import NonFiniteError, ShapeError
from gfp.kernel.nn import MlpSpec, ParamSet, mlp_backward, mlp_continue, mlp_forward, time_embed
from gfp.kernel.optim import AdamState, adam_step

log = logging.getLogger(__name__)


class FlowPolicy(object):
    def __init__(self, params, action_dim, euler_steps=10, learning_rate=3e-4):
        if euler_steps < 1:
            raise ValueError("euler_steps must be >= 1, got %r" % euler_steps)
        if params.spec.output_dim != action_dim or not params.spec.time_embed_dim:
            raise ShapeError("FlowPolicy spec", "a time-conditioned network with %d outputs" % action_dim, params.spec)
        self.params = params
        self.spec = params.spec
        self.action_dim = action_dim
        self.state_dim = params.spec.input_dim - action_dim
        self.euler_steps = euler_steps
        self.adam = AdamState.create(params, learning_rate)

    @classmethod
    def create(cls, state_dim, action_dim, hidden_dims, rng, time_embed_dim=64, euler_steps=10, learning_rate=3e-4):
        spec = MlpSpec(state_dim + action_dim, hidden_dims, action_dim, False, time_embed_dim)
        return cls(ParamSet.init(spec, rng), action_dim, euler_steps, learning_rate)

    def with_params(self, params):
        """ A read-only view of this policy running on other parameters (e.g. a Polyak copy) """
        view = FlowPolicy.__new__(FlowPolicy)
        view.__dict__.update(self.__dict__)
        view.params = params
        return view

    def velocity(self, t, s, x):
        return mlp_forward(self.params, self.spec, self._inputs(s, x), t)[0]

    def velocity_field(self, s):
        """
        v(t, x) for a fixed batch of states. The state and time contributions to the first layer are
        computed once per state batch and once per distinct t, only the x columns are multiplied per call.
        The field holds on to the current parameter values and must not outlive an update.
        """
        s = np.asarray(s, dtype=np.float64)
        if s.ndim != 2 or s.shape[1] != self.state_dim:
            raise ShapeError("flow states", "(batch, %d)" % self.state_dim, s.shape)
        first = self.params.layers[0]
        weight = first["weight"]
        sd = self.state_dim
        split = sd + self.action_dim
        base = s @ weight[:sd]
        base += first["bias"]
        w_x, w_t = weight[sd:split], weight[split:]
        params, spec = self.params, self.spec

        def field(t, x):
            x = np.asarray(x, dtype=np.float64)
            if x.shape != (s.shape[0], self.action_dim):
                raise ShapeError("flow points", (s.shape[0], self.action_dim), x.shape)
            z = x @ w_x
            z += base
            z += time_embed(t, spec.time_embed_dim) @ w_t
            return mlp_continue(params, spec, z)

        return field

    def _inputs(self, s, x):
        s, x = self._check(s, x)
        return np.concatenate([s, x], axis=1)

    def _check(self, s, x):
        s = np.asarray(s, dtype=np.float64)
        x = np.asarray(x, dtype=np.float64)
        if s.ndim != 2 or x.ndim != 2 or s.shape[0] != x.shape[0] or x.shape[1] != self.action_dim:
            raise ShapeError("flow inputs", "(batch, %d) states and (batch, %d) points" % (
                self.state_dim, self.action_dim), (s.shape, x.shape))
        return s, x


def velocity_eval(fp, t, s, x):
    """ v(t, s, x) for normalized states s and action-space points x """
    return fp.velocity(t, s, x)


def integrate(fp, s, z, clip=True):
    """ Euler integration of the flow from noise z, clipped to [-1, 1] after the last step only """
    s, x = fp._check(s, z)
    x = x.copy()
    field = fp.velocity_field(s)
    dt = 1.0 / fp.euler_steps
    for k in range(fp.euler_steps):
        x += dt * field(k * dt, x)
        if not np.all(np.isfinite(x)):
            raise NonFiniteError("integrate", step=k, detail="Euler step %d of %d" % (k, fp.euler_steps))
    return np.clip(x, -1.0, 1.0) if clip else x


def sample_action(fp, s, rng):
    s = np.atleast_2d(s)
    return integrate(fp, s, rng.standard_normal((s.shape[0], fp.action_dim)))


def _flow_matching_loss(fp, s, a, eps, t, weights=None):
    batch = a.shape[0]
    t = np.broadcast_to(np.asarray(t, dtype=np.float64), (batch,))
    weights = np.ones(batch) if weights is None else np.asarray(weights, dtype=np.float64)
    a_t = (1.0 - t)[:, None] * eps + t[:, None] * a
    target = a - eps
    velocity, cache = mlp_forward(fp.params, fp.spec, fp._inputs(s, a_t), t)
    residual = velocity - target
    loss = float(np.mean(weights * np.square(residual).sum(axis=1)))
    grads, _ = mlp_backward(cache, (2.0 / batch) * weights[:, None] * residual)
    return loss, grads


def fm_bc_loss(fp, s, a, eps, t):
    """ Unweighted conditional flow-matching loss, returns (loss, grads) """
    return _flow_matching_loss(fp, s, a, eps, t)


def weighted_fm_loss(fp, s, a, weights, eps, t):
    """ Flow-matching loss with constant per-row weights, returns (loss, grads) """
    return _flow_matching_loss(fp, s, a, eps, t, weights)


def flow_update(fp, s, a, weights, eps, t, step=None):
    loss, grads = weighted_fm_loss(fp, s, a, weights, eps, t)
    if not np.isfinite(loss):
        raise NonFiniteError("flow_update", step=step)
    adam_step(fp.params, grads, fp.adam, where="flow_update")
    return loss
