# Copyright (c) 2025 The GFP authors
# GNU General Public License v3.0+ (see COPYING or https://www.gnu.org/licenses/gpl-3.0.txt)

import dataclasses
import logging

import numpy as np

from gfp.agent.critic import q_value_and_action_grad
from gfp.agent.flow import integrate
from gfp.exceptions import NonFiniteError, ShapeError
from gfp.kernel.nn import MlpSpec, ParamSet, mlp_backward, mlp_forward
from gfp.kernel.optim import AdamState, adam_step

log = logging.getLogger(__name__)


class Actor(object):
    """ One-step policy mapping (state, noise) to an action """

    def __init__(self, params, action_dim, alpha=1.0, learning_rate=3e-4):
        if alpha < 0:
            raise ValueError("alpha must be >= 0, got %r" % alpha)
        if params.spec.output_dim != action_dim:
            raise ShapeError("Actor spec output_dim", action_dim, params.spec.output_dim)
        self.params = params
        self.spec = params.spec
        self.action_dim = action_dim
        self.state_dim = params.spec.input_dim - action_dim
        self.alpha = alpha
        self.adam = AdamState.create(params, learning_rate)

    @classmethod
    def create(cls, state_dim, action_dim, hidden_dims, rng, alpha=1.0, learning_rate=3e-4):
        spec = MlpSpec(state_dim + action_dim, hidden_dims, action_dim)
        return cls(ParamSet.init(spec, rng), action_dim, alpha, learning_rate)


@dataclasses.dataclass
class ActorStep:
    loss: float
    q_term: float
    bc_term: float
    flow_actions: np.ndarray


def _inputs(actor, s, z):
    s = np.asarray(s, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    if s.ndim != 2 or z.ndim != 2 or s.shape[0] != z.shape[0] or z.shape[1] != actor.action_dim:
        raise ShapeError("actor inputs", "(batch, %d) states and (batch, %d) noise" % (
            actor.state_dim, actor.action_dim), (s.shape, z.shape))
    return np.concatenate([s, z], axis=1)


def actor_forward(actor, s, z, params=None):
    """ Unclipped outputs and the forward cache of the actor on (s, z) """
    params = actor.params if params is None else params
    return mlp_forward(params, actor.spec, _inputs(actor, s, z))


def actor_sample(actor, s, z, params=None):
    """ Deterministic given (s, z), clipped to [-1, 1] """
    return np.clip(actor_forward(actor, s, z, params)[0], -1.0, 1.0)


def actor_objective(actor, critic, s, z, flow_actions, lam, use_q=True, forward=None, critic_eval=None):
    """
    -lam * Q(s, clip(mu(s, z))) + alpha * |mu(s, z) - flow_actions|^2 averaged over the batch.
    The distillation term uses the unclipped output so it keeps a gradient outside [-1, 1].
    Returns (loss, q_term, bc_term, grads).

    forward is an actor_forward result and critic_eval a q_value_and_action_grad result on the
    clipped actions, both computed on the current parameters; they are recomputed when omitted.
    """
    pre, cache = actor_forward(actor, s, z) if forward is None else forward
    batch = pre.shape[0]
    grad_out = np.zeros_like(pre)

    q_term = 0.0
    if use_q:
        actions = np.clip(pre, -1.0, 1.0)
        q, dq_da = q_value_and_action_grad(critic, s, actions) if critic_eval is None else critic_eval
        q_term = float(-lam * np.mean(q))
        grad_out += (-lam / batch) * dq_da * (np.abs(pre) < 1.0)

    diff = pre - flow_actions
    bc_term = float(actor.alpha * np.mean(np.square(diff).sum(axis=1)))
    grad_out += (2.0 * actor.alpha / batch) * diff

    grads, _ = mlp_backward(cache, grad_out)
    return q_term + bc_term, q_term, bc_term, grads


def actor_update(actor, critic, flow, s, z, lam, step=None, use_q=True, forward=None, critic_eval=None):
    """
    Distills the flow policy into the actor while ascending the critic. The flow action is computed
    from the same noise z as the actor's and carries no gradient.
    """
    flow_actions = integrate(flow, s, z)
    loss, q_term, bc_term, grads = actor_objective(
        actor, critic, s, z, flow_actions, lam, use_q=use_q, forward=forward, critic_eval=critic_eval
    )
    if not np.isfinite(loss):
        raise NonFiniteError("actor_update", step=step, detail="loss=%r" % loss)
    adam_step(actor.params, grads, actor.adam, where="actor_update")
    return ActorStep(loss=loss, q_term=q_term, bc_term=bc_term, flow_actions=flow_actions)
