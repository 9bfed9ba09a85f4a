# Copyright (c) 2025 The GFP authors
# GNU General Public License v3.0+ (see COPYING or https://www.gnu.org/licenses/gpl-3.0.txt)

import dataclasses
import logging

import numpy as np

from gfp.agent.actor import actor_sample
from gfp.agent.flow import integrate
from gfp.envs.oracle import normalize_score
from gfp.envs.specs import env_reset, env_step
from gfp.kernel.rng import Rng

log = logging.getLogger(__name__)

# Episode i draws from stream EVAL_STREAM_BASE + i, away from the training streams
EVAL_STREAM_BASE = 1 << 20
POLICIES = ("actor", "vabc")


@dataclasses.dataclass
class EvalResult:
    policy: str
    episodes: int
    mean_return: float
    normalized_score: float

    def to_dict(self):
        return dataclasses.asdict(self)


def actor_policy(actor, dataset):
    return lambda states, z: actor_sample(actor, dataset.normalize(states), z)


def flow_policy(flow, dataset):
    return lambda states, z: integrate(flow, dataset.normalize(states), z)


def rollout_returns(act_fn, spec, episodes, seed, stream_base=EVAL_STREAM_BASE):
    """
    Undiscounted returns of `episodes` episodes run side by side. Episode i owns its own Rng so
    the result does not depend on how episodes are batched; noise is drawn every step for every
    episode, finished or not.
    """
    rngs = [Rng(seed, stream_base + i) for i in range(episodes)]
    states = np.stack([env_reset(spec, rng) for rng in rngs])
    total = np.zeros(episodes)
    alive = np.ones(episodes, dtype=bool)
    for _ in range(spec.horizon):
        z = np.stack([rng.standard_normal(spec.action_dim) for rng in rngs])
        states, reward, terminal = env_step(spec, states, act_fn(states, z))
        total += reward * alive
        alive &= ~terminal
        if not alive.any():
            break
    return total


def evaluate_policy(act_fn, spec, episodes, seed, oracle, policy="custom"):
    returns = rollout_returns(act_fn, spec, episodes, seed)
    mean_return = float(returns.mean())
    result = EvalResult(policy, episodes, mean_return, normalize_score(mean_return, oracle))
    log.debug("evaluated %s over %d episodes: J=%.6f score=%.3f" % (policy, episodes, mean_return,
                                                                   result.normalized_score))
    return result
