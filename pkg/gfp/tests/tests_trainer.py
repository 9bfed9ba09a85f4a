# Copyright (c) 2025 The GFP authors
# GNU General Public License v3.0+ (see COPYING or https://www.gnu.org/licenses/gpl-3.0.txt)

import json
import os
import shutil
import tempfile
import unittest

import numpy as np
from numpy import testing as npt

from gfp.agent.actor import Actor, actor_sample, actor_update
from gfp.agent.critic import CriticEnsemble, bellman_target_standard, critic_update, q_value
from gfp.agent.flow import FlowPolicy, flow_update
from gfp.envs.dataset import sample_minibatch
from gfp.envs.oracle import oracle_solve
from gfp.envs.specs import BANDIT_BIMODAL, get_env_spec
from gfp.exceptions import ConfigError, NonFiniteError
from gfp.kernel.rng import Rng
from gfp.tests import factories
from gfp.trainer.checkpoint import read_checkpoint_state
from gfp.trainer.loop import CONFIG_FILE, INIT_STREAM, SCORES_FILE, STEP_ORDER, STREAMS, Trainer, train_run
from gfp.trainer.metrics import EVAL_COLUMNS, metrics_columns, read_metrics


class UnweightedReference(object):
    """
    Critic, actor and flow updates called one after the other on the trainer's random streams,
    every flow row weighted 1. Shares no code with Trainer.train_step.
    """

    def __init__(self, cfg, dataset):
        env = get_env_spec(cfg.env_id)
        sd, ad = env.state_dim, env.action_dim
        init = Rng(cfg.seed, INIT_STREAM)
        self.cfg = cfg
        self.dataset = dataset
        self.action_dim = ad
        self.critic = CriticEnsemble.create(
            sd, ad, cfg.hidden_dims, init, cfg.aggregation, cfg.tau, cfg.gamma, cfg.learning_rate
        )
        self.actor = Actor.create(sd, ad, cfg.hidden_dims, init, cfg.alpha, cfg.learning_rate)
        self.flow = FlowPolicy.create(
            sd, ad, cfg.hidden_dims, init, cfg.time_embed_dim, cfg.euler_steps, cfg.learning_rate
        )
        self.rngs = {name: Rng(cfg.seed, stream) for name, stream in STREAMS.items()}

    def networks(self):
        return {
            "critic1": self.critic.online[0],
            "critic2": self.critic.online[1],
            "critic1_target": self.critic.targets[0],
            "critic2_target": self.critic.targets[1],
            "actor": self.actor.params,
            "flow": self.flow.params,
        }

    def step(self):
        batch = sample_minibatch(self.dataset, self.cfg.batch_size, self.rngs["minibatch"])
        n, d = batch.size, self.action_dim

        z_next = self.rngs["bootstrap"].standard_normal((n, d))
        y = bellman_target_standard(
            self.critic, batch.r, batch.s_next, batch.terminal, lambda s, z: actor_sample(self.actor, s, z), z_next
        )
        critic_loss = critic_update(self.critic, batch.s, batch.a, y)

        z = self.rngs["actor_noise"].standard_normal((n, d))
        q_pi = q_value(self.critic, batch.s, actor_sample(self.actor, batch.s, z))
        lam = 1.0 / max(float(np.mean(np.abs(q_pi))), self.cfg.guidance.lambda_floor)
        actor_step = actor_update(self.actor, self.critic, self.flow, batch.s, z, lam)

        eps = self.rngs["flow_eps"].standard_normal((n, d))
        t = self.rngs["flow_t"].uniforms(n)
        flow_loss = flow_update(self.flow, batch.s, batch.a, np.ones(n), eps, t)
        return {"critic_loss": critic_loss, "actor_loss": actor_step.loss, "vabc_loss": flow_loss, "lambda": lam}


def assert_matches_reference(test, trainer, reference, steps):
    for _ in range(steps):
        record = trainer.train_step()
        expected = reference.step()
        test.assertEqual({key: record[key] for key in expected}, expected, record["step"])
    for name, params in reference.networks().items():
        test.assertEqual(trainer.networks()[name].max_abs_diff(params), 0.0, name)


def _guidance(mode):
    return factories.GuidanceConfigFactory(mode=mode)


class TrainStepTestCase(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.bandit = factories.dataset_for("bandit-bimodal", n=128)
        cls.line = factories.dataset_for("line-reach", n=256)

    def _run(self, trainer, steps=4):
        return [trainer.train_step() for _ in range(steps)]

    def test_deterministic(self):
        first = Trainer(factories.TrainConfigFactory(), self.bandit)
        second = Trainer(factories.TrainConfigFactory(), self.bandit)
        self.assertEqual(self._run(first, 1000), self._run(second, 1000))
        for name, params in first.networks().items():
            self.assertEqual(second.networks()[name].max_abs_diff(params), 0.0, name)

    def test_seed_changes_the_run(self):
        first = Trainer(factories.TrainConfigFactory(), self.bandit)
        second = Trainer(factories.TrainConfigFactory(seed=1), self.bandit)
        self.assertNotEqual(self._run(first, 1), self._run(second, 1))

    def test_phase_order(self):
        trainer = Trainer(factories.TrainConfigFactory(), self.bandit)
        phases = []
        trainer.hooks.append(lambda t, phase, payload: phases.append(phase))
        self._run(trainer, 2)
        self.assertEqual(tuple(phases), STEP_ORDER * 2)
        self.assertEqual(trainer.step, 2)

    def test_record_columns(self):
        cfg = factories.TrainConfigFactory()
        record = Trainer(cfg, self.bandit).train_step()
        expected = [c for c in metrics_columns(cfg.guidance_deltas) if c not in EVAL_COLUMNS]
        self.assertEqual(sorted(record), sorted(expected))
        self.assertEqual(record["step"], 1)
        self.assertTrue(all(np.isfinite(v) for v in record.values()))

    def test_terminal_targets_equal_reward(self):
        trainer = Trainer(factories.TrainConfigFactory(env_id="line-reach", batch_size=64), self.line)
        seen = []
        trainer.hooks.append(lambda t, phase, payload: seen.append(payload) if phase == "critic" else None)
        self._run(trainer, 3)
        terminal_rows = 0
        for payload in seen:
            batch = payload["batch"]
            done = batch.terminal == 1.0
            terminal_rows += int(done.sum())
            npt.assert_array_equal(payload["targets"][done], batch.r[done])
        self.assertGreater(terminal_rows, 0)

    def test_lambda_normalizes_q(self):
        trainer = Trainer(factories.TrainConfigFactory(), self.bandit)
        lams = []
        trainer.hooks.append(lambda t, phase, payload: lams.append(payload["lam"]) if phase == "actor" else None)
        records = self._run(trainer, 3)
        for record in records:
            self.assertEqual(record["lambda"], 1.0 / max(record["mean_abs_q"], 1e-6))
        self.assertEqual(lams, [record["lambda"] for record in records])

    def test_unweighted_modes(self):
        for mode in ("none", "bc-only"):
            trainer = Trainer(factories.TrainConfigFactory(guidance=_guidance(mode)), self.bandit)
            weights = []
            trainer.hooks.append(
                lambda t, phase, payload: weights.append(payload["weights"]) if phase == "flow" else None
            )
            for record in self._run(trainer, 2):
                self.assertEqual(record["g_mean"], 1.0)
                self.assertEqual(record["g_p_gt_0.75"], 1.0)
            for w in weights:
                npt.assert_array_equal(w, 1.0)

    def test_bc_only_drops_the_q_term(self):
        trainer = Trainer(factories.TrainConfigFactory(guidance=_guidance("bc-only")), self.bandit)
        critic_before = trainer.critic.online[0].copy()
        for record in self._run(trainer, 3):
            self.assertEqual(record["actor_q_term"], 0.0)
            self.assertEqual(record["actor_loss"], record["actor_bc_term"])
        self.assertGreater(trainer.critic.online[0].max_abs_diff(critic_before), 0.0)

    def test_unguided_step_matches_direct_updates(self):
        for aggregation in ("mean", "min"):
            cfg = factories.TrainConfigFactory(guidance=_guidance("none"), aggregation=aggregation)
            assert_matches_reference(self, Trainer(cfg, self.bandit), UnweightedReference(cfg, self.bandit), 5)

    def test_guidance_changes_the_flow(self):
        guided = Trainer(factories.TrainConfigFactory(guidance=_guidance("softmax")), self.bandit)
        unguided = Trainer(factories.TrainConfigFactory(guidance=_guidance("none")), self.bandit)
        self._run(guided, 2)
        self._run(unguided, 2)
        self.assertGreater(guided.flow.params.max_abs_diff(unguided.flow.params), 0.0)

    def test_vabc_target(self):
        trainer = Trainer(factories.TrainConfigFactory(env_id="line-reach", bellman_target="vabc"), self.line)
        for record in self._run(trainer, 3):
            self.assertTrue(np.isfinite(record["critic_loss"]))

    def test_polyak_copies(self):
        cfg = factories.TrainConfigFactory(bootstrap_actor="polyak", distill_target="polyak", tau=0.5)
        trainer = Trainer(cfg, self.bandit)
        self.assertIn("actor_target", trainer.networks())
        self.assertIn("flow_target", trainer.networks())
        before = trainer.actor_target.copy()
        trainer.train_step()
        for old, target, online in zip(before.arrays(), trainer.actor_target.arrays(), trainer.actor.params.arrays()):
            npt.assert_allclose(target, 0.5 * old + 0.5 * online, rtol=1e-13, atol=1e-15)

    def test_dataset_env_must_match(self):
        with self.assertRaises(ConfigError) as ctx:
            Trainer(factories.TrainConfigFactory(env_id="line-reach"), self.bandit)
        self.assertEqual(ctx.exception.field, "dataset")

    def test_evaluate(self):
        trainer = Trainer(factories.TrainConfigFactory(), self.bandit, oracle=oracle_solve(BANDIT_BIMODAL, 0.99))
        result = trainer.evaluate("vabc", episodes=4)
        self.assertEqual(result.policy, "vabc")
        self.assertEqual(result.episodes, 4)
        self.assertEqual(result, trainer.evaluate("vabc", episodes=4))
        with self.assertRaises(ConfigError):
            trainer.evaluate("critic")


class TrainRunTestCase(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.dataset = factories.dataset_for("bandit-bimodal", n=128)
        cls.oracle = oracle_solve(BANDIT_BIMODAL, 0.99)

    def setUp(self):
        self.directory = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.directory)

    def _cfg(self, name="run", **kwargs):
        run = os.path.join(self.directory, name)
        return factories.TrainConfigFactory(
            metrics=os.path.join(run, "metrics.csv"), checkpoint=os.path.join(run, "checkpoint"), **kwargs
        )

    def _train(self, cfg, **kwargs):
        return train_run(cfg, dataset=self.dataset, oracle=self.oracle, **kwargs)

    def _read(self, path):
        with open(path, "r", newline="") as fd:
            return fd.read()

    def test_outputs(self):
        cfg = self._cfg()
        result = self._train(cfg)
        self.assertEqual(result.steps, 20)
        rows = read_metrics(result.metrics)
        self.assertEqual([int(r["step"]) for r in rows], list(range(1, 21)))
        evaluated = [int(r["step"]) for r in rows if r["eval_score_actor"] != ""]
        self.assertEqual(evaluated, [10, 20])
        self.assertEqual(len(result.evaluations), 2)
        self.assertAlmostEqual(
            result.final_actor_score, np.mean([e["actor_score"] for e in result.evaluations]), delta=1e-12
        )
        self.assertNotIn("\r", self._read(result.metrics))

        run = os.path.dirname(cfg.checkpoint)
        with open(os.path.join(run, CONFIG_FILE)) as fd:
            self.assertEqual(json.load(fd)["alpha"], cfg.alpha)
        with open(os.path.join(run, SCORES_FILE)) as fd:
            self.assertEqual(json.load(fd)["steps"], 20)
        self.assertEqual(read_checkpoint_state(cfg.checkpoint)["step"], 20)
        self.assertIn("g_mean", result.last_guidance)

    def test_zero_steps(self):
        result = self._train(self._cfg(total_steps=0))
        self.assertEqual(result.steps, 0)
        self.assertIsNone(result.final_actor_score)
        self.assertEqual(read_metrics(result.metrics), [])
        self.assertEqual(read_checkpoint_state(result.checkpoint)["step"], 0)

    def test_resume_matches_a_straight_run(self):
        straight = self._train(self._cfg("straight", total_steps=20))
        self._train(self._cfg("resumed", total_steps=10))
        resumed = self._train(self._cfg("resumed", total_steps=20), resume=True)

        self.assertEqual(self._read(resumed.metrics), self._read(straight.metrics))
        self.assertEqual(resumed.evaluations, straight.evaluations)
        self.assertEqual(resumed.final_vabc_score, straight.final_vabc_score)

    def test_resume_without_checkpoint_starts_fresh(self):
        result = self._train(self._cfg(total_steps=5, eval_every=5), resume=True)
        self.assertEqual(result.steps, 5)
        self.assertEqual(len(read_metrics(result.metrics)), 5)

    def test_non_finite_aborts(self):
        broken = factories.dataset_for("bandit-bimodal", n=64)
        broken.r[:] = np.nan
        cfg = self._cfg()
        with self.assertRaises(NonFiniteError) as ctx:
            train_run(cfg, dataset=broken, oracle=self.oracle)
        self.assertEqual(ctx.exception.step, 1)
        self.assertEqual(read_checkpoint_state(cfg.checkpoint)["step"], 0)

    def test_missing_dataset(self):
        with self.assertRaises(ConfigError) as ctx:
            train_run(self._cfg(), oracle=self.oracle)
        self.assertEqual(ctx.exception.field, "dataset")
