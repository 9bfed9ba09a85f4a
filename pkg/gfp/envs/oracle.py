# Copyright (c) 2025 The GFP authors
# GNU General Public License v3.0+ (see COPYING or https://www.gnu.org/licenses/gpl-3.0.txt)
"""
Brute-force reference values for the synthetic environments: value iteration on a state/action
grid for line-reach and two-goal, an exhaustive action grid for bandit-bimodal.
"""

import dataclasses
import functools
import logging
from typing import Optional

import numpy as np

from gfp.config import settings
from gfp.envs.specs import bandit_reward, env_reset, env_step, get_env_spec, goal_rewards
from gfp.exceptions import DegenerateOracleError
from gfp.kernel.rng import Rng

log = logging.getLogger(__name__)

STATE_POINTS = 201
ACTION_POINTS = 41
BANDIT_POINTS = 100001
VI_TOLERANCE = 1e-9
VI_MAX_ITERATIONS = 10000
ORACLE_SEED = 0x5EED
ORACLE_STREAM = 97


class QGrid(object):
    """
    Optimal action values on a regular grid. Each state dimension is discretized independently
    and the dynamics move each coordinate on its own, so the next-state index is a per-dimension
    table of shape (STATE_POINTS, ACTION_POINTS).
    """

    def __init__(self, spec, gamma):
        self.spec = spec
        self.gamma = gamma
        self.states = np.linspace(-1.0, 1.0, STATE_POINTS)
        self.actions = np.linspace(-1.0, 1.0, ACTION_POINTS)
        moved = np.clip(self.states[:, None] + spec.step_size * self.actions[None, :], -1.0, 1.0)
        self.next_index = self.index_of(moved)
        self.values = None
        self.backup = None
        self.iterations = 0

    def index_of(self, x):
        scaled = (np.asarray(x, dtype=np.float64) + 1.0) * (STATE_POINTS - 1) / 2.0
        return np.clip(np.rint(scaled), 0, STATE_POINTS - 1).astype(np.int64)

    def _arrival(self):
        """ Reward and terminal flag for arriving at every grid state """
        mesh = np.stack(np.meshgrid(*([self.states] * self.spec.state_dim), indexing="ij"), axis=-1)
        flat = mesh.reshape(-1, self.spec.state_dim)
        reward, terminal = goal_rewards(self.spec, flat)
        shape = (STATE_POINTS,) * self.spec.state_dim
        return reward.reshape(shape), terminal.reshape(shape)

    def _max_over_actions(self, w):
        n = self.next_index
        if self.spec.state_dim == 1:
            return w[n].max(axis=1)
        inner = w[:, n].max(axis=2)
        return inner[n].max(axis=1)

    def solve(self):
        reward, terminal = self._arrival()
        values = np.zeros_like(reward)
        for iteration in range(1, VI_MAX_ITERATIONS + 1):
            backup = reward + self.gamma * (~terminal) * values
            new_values = self._max_over_actions(backup)
            delta = np.max(np.abs(new_values - values))
            values = new_values
            if delta < VI_TOLERANCE:
                break
        self.iterations = iteration
        self.values = values
        self.backup = reward + self.gamma * (~terminal) * values
        log.debug("value iteration on %s converged in %d iterations" % (self.spec.env_id, iteration))
        return self

    def q_values(self, s):
        """ Q over the full action grid for a batch of states, (batch, ACTION_POINTS ** action_dim) """
        idx = self.index_of(np.atleast_2d(s))
        n = self.next_index
        if self.spec.state_dim == 1:
            return self.backup[n[idx[:, 0]]]
        q = self.backup[n[idx[:, 0]][:, :, None], n[idx[:, 1]][:, None, :]]
        return q.reshape(q.shape[0], -1)

    def action_grid(self):
        mesh = np.stack(np.meshgrid(*([self.actions] * self.spec.action_dim), indexing="ij"), axis=-1)
        return mesh.reshape(-1, self.spec.action_dim)

    def greedy_action(self, s):
        return self.action_grid()[np.argmax(self.q_values(s), axis=1)]

    def q_value(self, s, a):
        """ Grid Q*(s, a) with the action snapped to the grid """
        s = np.atleast_2d(s)
        a_idx = np.clip(np.rint((np.atleast_2d(a) + 1.0) * (ACTION_POINTS - 1) / 2.0), 0, ACTION_POINTS - 1)
        flat = np.ravel_multi_index(tuple(a_idx.astype(np.int64).T), (ACTION_POINTS,) * self.spec.action_dim)
        return self.q_values(s)[np.arange(s.shape[0]), flat]

    def value(self, s):
        idx = self.index_of(np.atleast_2d(s))
        return self.values[tuple(idx.T)]


@dataclasses.dataclass
class OracleResult:
    env_id: str
    gamma: float
    j_opt: float
    j_rand: float
    v_start: float
    q_grid: Optional[QGrid] = None

    def greedy_policy(self):
        """ Returns an action function over raw states, None for the bandit which has no grid """
        if self.q_grid is None:
            spec = get_env_spec(self.env_id)
            return lambda s: np.full((np.atleast_2d(s).shape[0], spec.action_dim), spec.modes[0][0])
        return self.q_grid.greedy_action


def rollout_return(spec, policy, states):
    """ Undiscounted horizon-H return of a deterministic policy from each start state """
    total = np.zeros(states.shape[0])
    alive = np.ones(states.shape[0], dtype=bool)
    for _ in range(spec.horizon):
        states, reward, terminal = env_step(spec, states, policy(states))
        total += reward * alive
        alive &= ~terminal
        if not alive.any():
            break
    return total


def random_policy_return(spec, episodes, seed=ORACLE_SEED):
    """ Monte-Carlo estimate of the uniform-random policy's undiscounted return """
    generator = np.random.default_rng(seed)
    states = env_reset(spec, Rng(seed, ORACLE_STREAM), n=episodes)
    total = np.zeros(episodes)
    alive = np.ones(episodes, dtype=bool)
    for _ in range(spec.horizon):
        actions = generator.uniform(-1.0, 1.0, size=(episodes, spec.action_dim))
        states, reward, terminal = env_step(spec, states, actions)
        total += reward * alive
        alive &= ~terminal
    return float(total.mean())


def start_grid(spec):
    """ Grid points covering the start distribution """
    if spec.env_id == "two-goal":
        axis = np.linspace(-0.1, 0.1, 21)
        return np.stack(np.meshgrid(axis, axis, indexing="ij"), axis=-1).reshape(-1, 2)
    return np.full((1, spec.state_dim), -1.0 if spec.env_id == "line-reach" else 0.0)


def _solve_bandit(spec, gamma):
    actions = np.linspace(-1.0, 1.0, BANDIT_POINTS)[:, None]
    rewards = bandit_reward(spec, actions)
    j_opt = float(rewards.max())
    return OracleResult(spec.env_id, gamma, j_opt=j_opt, j_rand=float(rewards.mean()), v_start=j_opt)


@functools.lru_cache(maxsize=None)
def oracle_solve(spec, gamma):
    """
    J_opt is the undiscounted return of the greedy grid policy averaged over the start grid, the
    quantity evaluate_policy measures. Rewards are summed without a gamma^(k-1) factor, so the greedy
    policy itself scores exactly 100; gamma only enters the value iteration and v_start, the
    discounted optimal value at the start states.
    """
    if isinstance(spec, str):
        spec = get_env_spec(spec)
    env_id = spec.env_id
    if env_id == "bandit-bimodal":
        return _solve_bandit(spec, gamma)
    grid = QGrid(spec, gamma).solve()
    starts = start_grid(spec)
    j_opt = float(rollout_return(spec, grid.greedy_action, starts).mean())
    v_start = float(grid.value(starts).mean())
    j_rand = random_policy_return(spec, settings.ORACLE_EPISODES)
    log.info("oracle %s gamma=%s: J_opt=%.6f J_rand=%.6f v_start=%.6f" % (env_id, gamma, j_opt, j_rand, v_start))
    return OracleResult(env_id, gamma, j_opt=j_opt, j_rand=j_rand, v_start=v_start, q_grid=grid)


def normalize_score(j, oracle):
    if not oracle.j_opt > oracle.j_rand:
        raise DegenerateOracleError(oracle.j_opt, oracle.j_rand)
    return 100.0 * (j - oracle.j_rand) / (oracle.j_opt - oracle.j_rand)


def policy_q_value(spec, policy, s, a, gamma, max_steps=2000):
    """ Exact discounted Q^pi(s, a) of a deterministic policy by rollout, bootstrapping through time limits """
    states, reward, terminal = env_step(spec, np.atleast_2d(s), np.atleast_2d(a))
    q = reward.copy()
    alive = ~terminal
    discount = 1.0
    for _ in range(max_steps):
        if not alive.any():
            break
        discount *= gamma
        states, reward, terminal = env_step(spec, states, policy(states))
        q += discount * reward * alive
        alive &= ~terminal
    return q
