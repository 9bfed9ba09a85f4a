# Copyright (c) 2025 The GFP authors
# GNU General Public License v3.0+ (see COPYING or https://www.gnu.org/licenses/gpl-3.0.txt)
"""
Synthetic environments. All of them are vectorized over a leading batch axis: states are
(batch, state_dim) arrays and actions (batch, action_dim) arrays, clipped to [-1, 1] here.
"""

import dataclasses
from typing import Tuple

import numpy as np

from gfp.exceptions import InvalidMixError, UnknownEnvironment

# Boundary comparisons tolerate accumulated float error, 0.7 + 0.2 * 0.5 must land in the goal band.
BOUNDARY_TOL = 1e-9


@dataclasses.dataclass(frozen=True)
class EnvSpec:
    env_id: str
    state_dim: int
    action_dim: int
    horizon: int
    gamma_default: float
    step_size: float = 0.0
    goals: Tuple[Tuple[Tuple[float, ...], float], ...] = ()
    goal_radius: float = 0.0
    # bandit-bimodal reward modes as (center, height) pairs
    modes: Tuple[Tuple[float, float], ...] = ()
    mode_width: float = 0.02


LINE_REACH = EnvSpec(
    env_id="line-reach",
    state_dim=1,
    action_dim=1,
    horizon=20,
    gamma_default=0.99,
    step_size=0.2,
    goals=(((0.8,), 1.0),),
    goal_radius=0.05,
)

TWO_GOAL = EnvSpec(
    env_id="two-goal",
    state_dim=2,
    action_dim=2,
    horizon=30,
    gamma_default=0.99,
    step_size=0.15,
    goals=(((0.8, 0.8), 1.0), ((-0.8, 0.8), 0.3)),
    goal_radius=0.1,
)

BANDIT_BIMODAL = EnvSpec(
    env_id="bandit-bimodal",
    state_dim=1,
    action_dim=1,
    horizon=1,
    gamma_default=0.99,
    modes=((0.7, 1.0), (-0.5, 0.4)),
    mode_width=0.02,
)

ENVIRONMENTS = {spec.env_id: spec for spec in (LINE_REACH, TWO_GOAL, BANDIT_BIMODAL)}


def get_env_spec(env_id):
    try:
        return ENVIRONMENTS[env_id]
    except KeyError:
        raise UnknownEnvironment(env_id, ENVIRONMENTS)


def _check_spec(spec):
    if ENVIRONMENTS.get(spec.env_id) != spec:
        raise UnknownEnvironment(spec.env_id, ENVIRONMENTS)


def env_reset(spec, rng, n=None):
    """ Draws initial states, a single (state_dim,) vector when n is None """
    _check_spec(spec)
    count = 1 if n is None else n
    if spec.env_id == "two-goal":
        states = rng.uniforms((count, 2)) * 0.2 - 0.1
    elif spec.env_id == "line-reach":
        states = np.full((count, 1), -1.0)
    else:
        states = np.zeros((count, 1))
    return states[0] if n is None else states


def bandit_reward(spec, a):
    reward = np.zeros(np.shape(a)[0])
    for center, height in spec.modes:
        reward += height * np.exp(-np.square(a[:, 0] - center) / spec.mode_width)
    return reward


def goal_rewards(spec, positions):
    """ Reward and terminal flag of arriving at `positions` """
    reward = np.zeros(positions.shape[0])
    terminal = np.zeros(positions.shape[0], dtype=bool)
    for center, value in spec.goals:
        distance = np.linalg.norm(positions - np.asarray(center), axis=1)
        hit = (distance <= spec.goal_radius + BOUNDARY_TOL) & ~terminal
        reward[hit] = value
        terminal |= hit
    return reward, terminal


def env_step(spec, s, a):
    """ Returns (s_next, reward, terminal), batched like the inputs """
    _check_spec(spec)
    single = np.ndim(s) == 1
    s = np.atleast_2d(np.asarray(s, dtype=np.float64))
    a = np.clip(np.atleast_2d(np.asarray(a, dtype=np.float64)), -1.0, 1.0)
    if spec.env_id == "bandit-bimodal":
        s_next = s.copy()
        reward = bandit_reward(spec, a)
        terminal = np.ones(s.shape[0], dtype=bool)
    else:
        s_next = np.clip(s + spec.step_size * a, -1.0, 1.0)
        reward, terminal = goal_rewards(spec, s_next)
    if single:
        return s_next[0], float(reward[0]), bool(terminal[0])
    return s_next, reward, terminal


def expert_action(spec, s):
    """ Greedy closed-form policy heading to the highest-value goal or reward mode """
    s = np.atleast_2d(np.asarray(s, dtype=np.float64))
    if spec.env_id == "bandit-bimodal":
        return np.full((s.shape[0], 1), spec.modes[0][0])
    target = np.asarray(spec.goals[0][0])
    return np.clip((target - s) / spec.step_size, -1.0, 1.0)


def low_mode_action(spec, s):
    """ Policy heading to the low-value mode, only environments with two modes have one """
    s = np.atleast_2d(np.asarray(s, dtype=np.float64))
    if spec.env_id == "bandit-bimodal":
        return np.full((s.shape[0], 1), spec.modes[1][0])
    if len(spec.goals) < 2:
        raise InvalidMixError("'low-mode' behavior is not available on %s" % spec.env_id)
    target = np.asarray(spec.goals[1][0])
    return np.clip((target - s) / spec.step_size, -1.0, 1.0)
