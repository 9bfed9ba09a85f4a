# Copyright (c) 2025 The GFP authors
# GNU General Public License v3.0+ (see COPYING or https://www.gnu.org/licenses/gpl-3.0.txt)

import logging

import numpy as np

from gfp.exceptions import NonFiniteError, ShapeError
from gfp.kernel.nn import MlpSpec, ParamSet, mlp_backward, mlp_forward
from gfp.kernel.optim import AdamState, adam_step, polyak_update

log = logging.getLogger(__name__)

AGGREGATIONS = ("mean", "min")


class CriticEnsemble(object):
    """ Two layer-normalized Q heads with Polyak-averaged target copies """

    def __init__(self, online, aggregation="mean", tau=0.005, gamma=0.99, learning_rate=3e-4):
        if len(online) != 2:
            raise ShapeError("CriticEnsemble heads", 2, len(online))
        if aggregation not in AGGREGATIONS:
            raise ValueError("Unsupported aggregation: %s" % aggregation)
        if not 0.0 < gamma < 1.0:
            raise ValueError("gamma must be in (0, 1), got %r" % gamma)
        if not 0.0 < tau <= 1.0:
            raise ValueError("tau must be in (0, 1], got %r" % tau)
        self.online = list(online)
        self.targets = [p.copy() for p in self.online]
        self.spec = self.online[0].spec
        self.aggregation = aggregation
        self.tau = tau
        self.gamma = gamma
        self.adam = [AdamState.create(p, learning_rate) for p in self.online]

    @classmethod
    def create(cls, state_dim, action_dim, hidden_dims, rng, aggregation="mean", tau=0.005, gamma=0.99,
               learning_rate=3e-4):
        spec = MlpSpec(state_dim + action_dim, hidden_dims, 1, use_layer_norm=True)
        online = [ParamSet.init(spec, rng) for _ in range(2)]
        return cls(online, aggregation, tau, gamma, learning_rate)

    def heads(self, which):
        if which == "online":
            return self.online
        if which == "target":
            return self.targets
        raise ValueError("Unsupported critic heads: %s" % which)


def _inputs(ce, s, a):
    s = np.asarray(s, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    if s.ndim != 2 or a.ndim != 2 or s.shape[0] != a.shape[0] or s.shape[1] + a.shape[1] != ce.spec.input_dim:
        raise ShapeError("critic inputs", "(batch, %d) state-action pairs" % ce.spec.input_dim, (s.shape, a.shape))
    return np.concatenate([s, a], axis=1)


def q_pair_eval(ce, s, a, which="online"):
    x = _inputs(ce, s, a)
    q1, q2 = (mlp_forward(p, ce.spec, x)[0][:, 0] for p in ce.heads(which))
    return q1, q2


def q_agg(q1, q2, aggregation):
    if aggregation == "mean":
        return (q1 + q2) / 2.0
    if aggregation == "min":
        return np.minimum(q1, q2)
    raise ValueError("Unsupported aggregation: %s" % aggregation)


def q_value(ce, s, a, which="online"):
    return q_agg(*q_pair_eval(ce, s, a, which), ce.aggregation)


def q_value_and_action_grad(ce, s, a):
    """ Aggregated online Q and its gradient with respect to the action columns """
    x = _inputs(ce, s, a)
    batch = x.shape[0]
    state_dim = np.shape(s)[1]
    ones = np.ones((batch, 1))
    values, action_grads = [], []
    for params in ce.online:
        q, cache = mlp_forward(params, ce.spec, x)
        _, input_grads = mlp_backward(cache, ones, param_grads=False)
        values.append(q[:, 0])
        action_grads.append(input_grads[:, state_dim:])
    q1, q2 = values
    if ce.aggregation == "mean":
        return (q1 + q2) / 2.0, (action_grads[0] + action_grads[1]) / 2.0
    first = (q1 <= q2)[:, None]
    return np.minimum(q1, q2), np.where(first, action_grads[0], action_grads[1])


def bellman_target_standard(ce, r, s_next, terminal, actor, z_next):
    """ y = r + (1 - terminal) * gamma * Qbar(s', actor(s', z')) """
    a_next = actor(s_next, z_next)
    q_next = q_value(ce, s_next, a_next, which="target")
    return r + (1.0 - terminal) * ce.gamma * q_next


def bellman_target_vabc(ce, r, s_next, terminal, actor, flow, z_next):
    """ Averages the bootstrap over the actor's and the flow's action, both drawn from the same noise """
    q_actor = q_value(ce, s_next, actor(s_next, z_next), which="target")
    q_flow = q_value(ce, s_next, flow(s_next, z_next), which="target")
    return r + (1.0 - terminal) * (ce.gamma / 2.0) * (q_actor + q_flow)


def critic_update(ce, s, a, y, step=None):
    """ One Adam step on both heads against the shared target y, then a Polyak step on the targets """
    x = _inputs(ce, s, a)
    batch = x.shape[0]
    y = np.asarray(y, dtype=np.float64)
    loss = 0.0
    updates = []
    for params in ce.online:
        q, cache = mlp_forward(params, ce.spec, x)
        residual = q[:, 0] - y
        loss += float(np.mean(np.square(residual)))
        updates.append((params, cache, residual))
    if not np.isfinite(loss):
        raise NonFiniteError("critic_update", step=step, detail="loss=%r" % loss)
    for (params, cache, residual), adam in zip(updates, ce.adam):
        grads, _ = mlp_backward(cache, (2.0 / batch) * residual[:, None])
        adam_step(params, grads, adam, where="critic_update")
    for target, online in zip(ce.targets, ce.online):
        polyak_update(target, online, ce.tau)
    return loss


def target_sync(ce):
    for target, online in zip(ce.targets, ce.online):
        target.assign(online)
