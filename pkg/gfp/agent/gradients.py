# Copyright (c) 2025 The GFP authors
# GNU General Public License v3.0+ (see COPYING or https://www.gnu.org/licenses/gpl-3.0.txt)
"""
Finite-difference checks for every network shape the trainer builds, at a size small enough
for central differences over each parameter.
"""

import numpy as np

from gfp.agent.actor import Actor, actor_objective
from gfp.agent.critic import CriticEnsemble
from gfp.agent.flow import FlowPolicy, weighted_fm_loss
from gfp.kernel.gradcheck import grad_check
from gfp.kernel.nn import mlp_backward, mlp_forward
from gfp.kernel.rng import Rng

CHECK_STREAM = 42
STATE_DIM = 2
ACTION_DIM = 2
HIDDEN = (16, 16)
BATCH = 8


def _squared_loss_builder(params, inputs, targets):
    def objective():
        out, cache = mlp_forward(params, params.spec, inputs)
        residual = out - targets
        loss = float(np.mean(np.square(residual).sum(axis=1)))
        grads, _ = mlp_backward(cache, (2.0 / inputs.shape[0]) * residual)
        return loss, grads

    return lambda: (params, objective)


def critic_builder(seed=0):
    rng = Rng(seed, CHECK_STREAM)
    critic = CriticEnsemble.create(STATE_DIM, ACTION_DIM, HIDDEN, rng)
    inputs = rng.standard_normal((BATCH, STATE_DIM + ACTION_DIM))
    return _squared_loss_builder(critic.online[0], inputs, rng.standard_normal((BATCH, 1)))


def actor_builder(seed=0):
    rng = Rng(seed, CHECK_STREAM + 1)
    actor = Actor.create(STATE_DIM, ACTION_DIM, HIDDEN, rng)
    inputs = rng.standard_normal((BATCH, STATE_DIM + ACTION_DIM))
    return _squared_loss_builder(actor.params, inputs, rng.standard_normal((BATCH, ACTION_DIM)))


def flow_builder(seed=0):
    rng = Rng(seed, CHECK_STREAM + 2)
    flow = FlowPolicy.create(STATE_DIM, ACTION_DIM, HIDDEN, rng, time_embed_dim=8, euler_steps=4)
    s = rng.standard_normal((BATCH, STATE_DIM))
    a = np.clip(rng.standard_normal((BATCH, ACTION_DIM)), -1.0, 1.0)
    eps = rng.standard_normal((BATCH, ACTION_DIM))
    t = rng.uniforms(BATCH)
    weights = rng.uniforms(BATCH)

    def objective():
        return weighted_fm_loss(flow, s, a, weights, eps, t)

    return lambda: (flow.params, objective)


def actor_objective_builder(seed=0, alpha=3.0, lam=0.7):
    """ Actor loss composed with a fixed critic: gradients flow through the critic's action input """
    rng = Rng(seed, CHECK_STREAM + 3)
    critic = CriticEnsemble.create(STATE_DIM, ACTION_DIM, HIDDEN, rng)
    actor = Actor.create(STATE_DIM, ACTION_DIM, HIDDEN, rng, alpha=alpha)
    # keep actions away from the clipping boundary
    actor.params.layers[-1]["weight"] *= 0.1
    s = rng.standard_normal((BATCH, STATE_DIM))
    z = rng.standard_normal((BATCH, ACTION_DIM))
    flow_actions = np.clip(rng.standard_normal((BATCH, ACTION_DIM)), -1.0, 1.0)

    def objective():
        loss, _, _, grads = actor_objective(actor, critic, s, z, flow_actions, lam)
        return loss, grads

    return lambda: (actor.params, objective)


BUILDERS = (
    ("critic", critic_builder),
    ("actor", actor_builder),
    ("flow", flow_builder),
    ("actor_objective", actor_objective_builder),
)


def gradient_suite(tolerance=1e-4, corrupt=False, seed=0):
    return [grad_check(builder(seed), tolerance, name=name, corrupt=corrupt) for name, builder in BUILDERS]
