# Copyright (c) 2025 The GFP authors
# GNU General Public License v3.0+ (see COPYING or https://www.gnu.org/licenses/gpl-3.0.txt)

import functools
import unittest

import numpy as np
from numpy import testing as npt

from gfp.agent.actor import Actor, actor_sample
from gfp.agent.critic import (
    CriticEnsemble,
    bellman_target_standard,
    bellman_target_vabc,
    critic_update,
    q_agg,
    q_pair_eval,
    q_value,
    q_value_and_action_grad,
    target_sync,
)
from gfp.agent.flow import FlowPolicy, integrate
from gfp.exceptions import NonFiniteError
from gfp.kernel.rng import Rng


def _critic(aggregation="mean", seed=0):
    return CriticEnsemble.create(2, 2, (16, 16), Rng(seed, 6), aggregation=aggregation, tau=0.05)


def _batch(seed=1, size=10):
    rng = Rng(seed)
    s = rng.standard_normal((size, 2))
    a = np.clip(rng.standard_normal((size, 2)), -1.0, 1.0)
    r = rng.uniforms(size)
    s_next = rng.standard_normal((size, 2))
    terminal = (rng.uniforms(size) < 0.4).astype(np.float64)
    z_next = rng.standard_normal((size, 2))
    return s, a, r, s_next, terminal, z_next


class CriticEnsembleTestCase(unittest.TestCase):
    def test_targets_start_as_copies(self):
        critic = _critic()
        for online, target in zip(critic.online, critic.targets):
            self.assertIsNot(online, target)
            self.assertEqual(online.max_abs_diff(target), 0.0)
        self.assertTrue(critic.spec.use_layer_norm)

    def test_invalid_settings(self):
        with self.assertRaises(ValueError):
            _critic(aggregation="max")
        with self.assertRaises(ValueError):
            CriticEnsemble.create(2, 2, (16, 16), Rng(0), gamma=1.0)

    def test_min_below_mean(self):
        critic = _critic()
        s, a = _batch()[:2]
        q1, q2 = q_pair_eval(critic, s, a)
        self.assertFalse(np.array_equal(q1, q2))
        self.assertTrue(np.all(q_agg(q1, q2, "min") <= q_agg(q1, q2, "mean")))
        npt.assert_array_equal(q_agg(q1, q1, "min"), q_agg(q1, q1, "mean"))

    def test_action_gradient(self):
        for aggregation in ("mean", "min"):
            critic = _critic(aggregation)
            s, a = _batch()[:2]
            a = a * 0.5
            q, grad = q_value_and_action_grad(critic, s, a)
            npt.assert_allclose(q, q_value(critic, s, a))
            h = 1e-6
            for column in range(2):
                plus, minus = a.copy(), a.copy()
                plus[:, column] += h
                minus[:, column] -= h
                numeric = (q_value(critic, s, plus) - q_value(critic, s, minus)) / (2 * h)
                npt.assert_allclose(grad[:, column], numeric, rtol=1e-5, atol=1e-7)


class BellmanTargetTestCase(unittest.TestCase):
    def setUp(self):
        self.critic = _critic()
        self.actor = Actor.create(2, 2, (16, 16), Rng(2, 6))
        self.flow = FlowPolicy.create(2, 2, (16, 16), Rng(3, 6), time_embed_dim=8, euler_steps=4)
        self.actor_fn = functools.partial(actor_sample, self.actor)
        self.flow_fn = functools.partial(integrate, self.flow)

    def test_terminal_rows_return_reward(self):
        _, _, r, s_next, terminal, z_next = _batch()
        terminal[:] = 1.0
        standard = bellman_target_standard(self.critic, r, s_next, terminal, self.actor_fn, z_next)
        vabc = bellman_target_vabc(self.critic, r, s_next, terminal, self.actor_fn, self.flow_fn, z_next)
        npt.assert_array_equal(standard, r)
        npt.assert_array_equal(vabc, r)

    def test_standard_target(self):
        _, _, r, s_next, terminal, z_next = _batch()
        y = bellman_target_standard(self.critic, r, s_next, terminal, self.actor_fn, z_next)
        q_next = q_value(self.critic, s_next, self.actor_fn(s_next, z_next), which="target")
        npt.assert_allclose(y, r + (1.0 - terminal) * 0.99 * q_next, rtol=1e-15)

    def test_vabc_target_averages_both_policies(self):
        _, _, r, s_next, terminal, z_next = _batch()
        vabc = bellman_target_vabc(self.critic, r, s_next, terminal, self.actor_fn, self.flow_fn, z_next)
        with_actor = bellman_target_standard(self.critic, r, s_next, terminal, self.actor_fn, z_next)
        with_flow = bellman_target_standard(self.critic, r, s_next, terminal, self.flow_fn, z_next)
        low = np.minimum(with_actor, with_flow)
        high = np.maximum(with_actor, with_flow)
        self.assertTrue(np.all(vabc >= low - 1e-12))
        self.assertTrue(np.all(vabc <= high + 1e-12))


class CriticUpdateTestCase(unittest.TestCase):
    def test_update_moves_toward_target(self):
        critic = _critic()
        s, a, r = _batch()[:3]
        first = critic_update(critic, s, a, r)
        for _ in range(50):
            last = critic_update(critic, s, a, r)
        self.assertLess(last, first)

    def test_targets_follow_polyak(self):
        critic = _critic()
        s, a, r = _batch()[:3]
        before = [p.copy() for p in critic.targets]
        critic_update(critic, s, a, r)
        for old, target, online in zip(before, critic.targets, critic.online):
            for o, t, n in zip(old.arrays(), target.arrays(), online.arrays()):
                npt.assert_allclose(t, 0.95 * o + 0.05 * n, rtol=1e-13, atol=1e-15)
        self.assertGreater(critic.online[0].max_abs_diff(critic.targets[0]), 0.0)

    def test_target_sync(self):
        critic = _critic()
        s, a, r = _batch()[:3]
        critic_update(critic, s, a, r)
        target_sync(critic)
        self.assertEqual(critic.online[1].max_abs_diff(critic.targets[1]), 0.0)

    def test_non_finite_target(self):
        critic = _critic()
        s, a, r = _batch()[:3]
        r[0] = np.nan
        before = critic.online[0].copy()
        with self.assertRaises(NonFiniteError) as ctx:
            critic_update(critic, s, a, r, step=12)
        self.assertEqual(ctx.exception.step, 12)
        self.assertEqual(critic.online[0].max_abs_diff(before), 0.0)
