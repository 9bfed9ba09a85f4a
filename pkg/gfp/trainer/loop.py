# Copyright (c) 2025 The GFP authors
# GNU General Public License v3.0+ (see COPYING or https://www.gnu.org/licenses/gpl-3.0.txt)
"""
The training loop: every iteration updates the critic, then the one-step actor, then the flow
policy, each with one gradient step on the same minibatch.
"""

import dataclasses
import functools
import logging
import os
import time
from typing import List, Optional

import numpy as np

from gfp.agent.actor import Actor, actor_forward, actor_sample, actor_update
from gfp.agent.critic import (
    CriticEnsemble,
    bellman_target_standard,
    bellman_target_vabc,
    critic_update,
    q_value,
    q_value_and_action_grad,
)
from gfp.agent.flow import FlowPolicy, flow_update, integrate
from gfp.agent.guidance import compute_guidance, guidance_stats, lambda_scale
from gfp.config import settings
from gfp.config.train import config_hash, to_dict
from gfp.envs.dataset import load_dataset, sample_minibatch
from gfp.envs.oracle import oracle_solve
from gfp.envs.specs import get_env_spec
from gfp.exceptions import ConfigError, NonFiniteError
from gfp.kernel.io import write_json
from gfp.kernel.optim import polyak_update
from gfp.kernel.rng import Rng
from gfp.trainer.checkpoint import checkpoint_load, checkpoint_save
from gfp.trainer.evaluation import actor_policy, evaluate_policy, flow_policy
from gfp.trainer.metrics import MetricsWriter, delta_column, metrics_columns, truncate_metrics

log = logging.getLogger(__name__)

# One stream per source of randomness, so toggling a feature never shifts another feature's draws
STREAMS = {
    "minibatch": 1,
    "bootstrap": 2,
    "actor_noise": 3,
    "flow_eps": 4,
    "flow_t": 5,
}
INIT_STREAM = 6
CONFIG_FILE = "config.json"
SCORES_FILE = "scores.json"
STEP_ORDER = ("critic", "actor", "flow")


def run_dir(cfg):
    return os.path.join(settings.BASE_DIR, "runs", config_hash(cfg)[:12])


def output_paths(cfg):
    """ (metrics csv, checkpoint directory) of a run, defaulting to the run directory """
    metrics = cfg.metrics or os.path.join(run_dir(cfg), "metrics.csv")
    checkpoint = cfg.checkpoint or os.path.join(run_dir(cfg), "checkpoint")
    return metrics, checkpoint


class StepOrderError(AssertionError):
    pass


class Trainer(object):
    def __init__(self, cfg, dataset, oracle=None):
        if dataset.env_id != cfg.env_id:
            raise ConfigError("dataset", "dataset was generated on %s, config says %s" % (dataset.env_id, cfg.env_id))
        self.cfg = cfg
        self.dataset = dataset
        self.env = get_env_spec(cfg.env_id)
        self.oracle = oracle
        sd, ad = self.env.state_dim, self.env.action_dim

        init = Rng(cfg.seed, INIT_STREAM)
        hidden = cfg.hidden_dims
        self.critic = CriticEnsemble.create(
            sd, ad, hidden, init, cfg.aggregation, cfg.tau, cfg.gamma, cfg.learning_rate
        )
        self.actor = Actor.create(sd, ad, hidden, init, cfg.alpha, cfg.learning_rate)
        self.flow = FlowPolicy.create(sd, ad, hidden, init, cfg.time_embed_dim, cfg.euler_steps, cfg.learning_rate)
        self.actor_target = self.actor.params.copy() if cfg.bootstrap_actor == "polyak" else None
        self.flow_target = self.flow.params.copy() if cfg.distill_target == "polyak" else None

        self.rngs = {name: Rng(cfg.seed, stream) for name, stream in STREAMS.items()}
        self.step = 0
        self.evaluations = []
        # called as hook(trainer, phase, payload) at each phase of a step
        self.hooks = []
        self._trace = []

    def networks(self):
        networks = {
            "critic1": self.critic.online[0],
            "critic2": self.critic.online[1],
            "critic1_target": self.critic.targets[0],
            "critic2_target": self.critic.targets[1],
            "actor": self.actor.params,
            "flow": self.flow.params,
        }
        if self.actor_target is not None:
            networks["actor_target"] = self.actor_target
        if self.flow_target is not None:
            networks["flow_target"] = self.flow_target
        return networks

    def _enter(self, phase, **payload):
        self._trace.append(phase)
        for hook in self.hooks:
            hook(self, phase, payload)

    def _check_order(self):
        if tuple(self._trace) != STEP_ORDER:
            raise StepOrderError("step %d ran %s, expected %s" % (self.step, self._trace, STEP_ORDER))
        log.debug("step %d order %s" % (self.step, "->".join(self._trace)))

    def bootstrap_policy(self):
        params = self.actor_target if self.actor_target is not None else None
        return functools.partial(actor_sample, self.actor, params=params)

    def distill_flow(self):
        if self.flow_target is None:
            return self.flow
        return self.flow.with_params(self.flow_target)

    def flow_step(self, s, a, weights, eps, t):
        return flow_update(self.flow, s, a, weights, eps, t, step=self.step + 1)

    def train_step(self):
        cfg = self.cfg
        d = self.env.action_dim
        step = self.step + 1
        self._trace = []
        batch = sample_minibatch(self.dataset, cfg.batch_size, self.rngs["minibatch"])
        size = batch.size

        # Step 1: critic
        z_next = self.rngs["bootstrap"].standard_normal((size, d))
        actor_fn = self.bootstrap_policy()
        if cfg.bellman_target == "vabc":
            flow = self.distill_flow()
            y = bellman_target_vabc(
                self.critic, batch.r, batch.s_next, batch.terminal, actor_fn,
                lambda s, z: integrate(flow, s, z), z_next,
            )
        else:
            y = bellman_target_standard(self.critic, batch.r, batch.s_next, batch.terminal, actor_fn, z_next)
        self._enter("critic", targets=y, batch=batch)
        critic_loss = critic_update(self.critic, batch.s, batch.a, y, step=step)

        # Step 2: actor, sharing one noise draw per row with the flow distillation target.
        # The proposal's forward pass and Q evaluation also feed the actor update.
        z = self.rngs["actor_noise"].standard_normal((size, d))
        use_q = cfg.guidance.mode != "bc-only"
        forward = actor_forward(self.actor, batch.s, z)
        a_pi = np.clip(forward[0], -1.0, 1.0)
        if use_q:
            critic_eval = q_value_and_action_grad(self.critic, batch.s, a_pi)
            q_pi = critic_eval[0]
        else:
            critic_eval = None
            q_pi = q_value(self.critic, batch.s, a_pi)
        mean_abs_q = float(np.mean(np.abs(q_pi)))
        lam = lambda_scale(q_pi, cfg.guidance.lambda_floor)
        self._enter("actor", lam=lam)
        actor_step = actor_update(
            self.actor, self.critic, self.distill_flow(), batch.s, z, lam,
            step=step, use_q=use_q, forward=forward, critic_eval=critic_eval,
        )

        # Step 3: value-aware flow matching, weights reuse lambda and the step 2 proposal
        q_data = q_value(self.critic, batch.s, batch.a)
        q_flow = q_value(self.critic, batch.s, actor_step.flow_actions)
        weights = compute_guidance(cfg.guidance, q_data, q_pi, q_flow, lam)
        eps = self.rngs["flow_eps"].standard_normal((size, d))
        t = self.rngs["flow_t"].uniforms(size)
        self._enter("flow", weights=weights, q_data=q_data, q_actor=q_pi, lam=lam)
        vabc_loss = self.flow_step(batch.s, batch.a, weights, eps, t)

        if self.actor_target is not None:
            polyak_update(self.actor_target, self.actor.params, cfg.tau)
        if self.flow_target is not None:
            polyak_update(self.flow_target, self.flow.params, cfg.tau)

        self._check_order()
        self.step = step
        record = {
            "step": step,
            "critic_loss": critic_loss,
            "actor_loss": actor_step.loss,
            "actor_q_term": actor_step.q_term,
            "actor_bc_term": actor_step.bc_term,
            "vabc_loss": vabc_loss,
            "lambda": lam,
            "mean_abs_q": mean_abs_q,
            "g_mean": float(np.mean(weights)),
        }
        for delta, fraction in guidance_stats(weights, cfg.guidance_deltas).items():
            record[delta_column(delta)] = fraction
        log.debug("step %d critic_loss=%.6g actor_loss=%.6g vabc_loss=%.6g" % (
            step, critic_loss, actor_step.loss, vabc_loss))
        return record

    def get_oracle(self):
        if self.oracle is None:
            self.oracle = oracle_solve(self.env, self.cfg.gamma)
        return self.oracle

    def evaluate(self, policy="actor", episodes=None, seed=None):
        episodes = self.cfg.eval_episodes if episodes is None else episodes
        seed = self.cfg.seed if seed is None else seed
        if policy == "actor":
            act_fn = actor_policy(self.actor, self.dataset)
        elif policy == "vabc":
            act_fn = flow_policy(self.flow, self.dataset)
        else:
            raise ConfigError("policy", "expected 'actor' or 'vabc', got %r" % policy)
        return evaluate_policy(act_fn, self.env, episodes, seed, self.get_oracle(), policy=policy)

    def run_evaluation(self, record):
        actor = self.evaluate("actor")
        vabc = self.evaluate("vabc")
        record["eval_score_actor"] = actor.normalized_score
        record["eval_score_vabc"] = vabc.normalized_score
        self.evaluations.append(
            {
                "step": self.step,
                "actor_return": actor.mean_return,
                "actor_score": actor.normalized_score,
                "vabc_return": vabc.mean_return,
                "vabc_score": vabc.normalized_score,
            }
        )
        log.info("step %d: critic_loss=%.6g actor_loss=%.6g vabc_loss=%.6g actor_score=%.2f vabc_score=%.2f" % (
            self.step, record["critic_loss"], record["actor_loss"], record["vabc_loss"],
            actor.normalized_score, vabc.normalized_score))

    def final_scores(self):
        """ Mean of the last final_score_window evaluations, (None, None) before any evaluation """
        window = self.evaluations[-self.cfg.final_score_window:]
        if not window:
            return None, None
        return (
            float(np.mean([e["actor_score"] for e in window])),
            float(np.mean([e["vabc_score"] for e in window])),
        )


@dataclasses.dataclass
class RunResult:
    metrics: str
    checkpoint: str
    steps: int
    final_actor_score: Optional[float]
    final_vabc_score: Optional[float]
    evaluations: List[dict]
    last_guidance: dict = dataclasses.field(default_factory=dict)

    def to_dict(self):
        return dataclasses.asdict(self)


def build_trainer(cfg, dataset=None, oracle=None):
    if dataset is None:
        if not os.path.exists(cfg.dataset):
            raise ConfigError("dataset", "%s does not exist" % cfg.dataset)
        dataset = load_dataset(cfg.dataset)
    return Trainer(cfg, dataset, oracle)


def train_run(cfg, dataset=None, resume=False, oracle=None):
    """ Runs cfg.total_steps iterations, evaluating and checkpointing every eval_every steps """
    trainer = build_trainer(cfg, dataset, oracle)
    metrics_path, checkpoint_path = output_paths(cfg)
    columns = metrics_columns(cfg.guidance_deltas)
    directory = os.path.dirname(os.path.abspath(checkpoint_path))
    os.makedirs(directory, exist_ok=True)
    write_json(os.path.join(directory, CONFIG_FILE), to_dict(cfg))

    resuming = resume and os.path.exists(checkpoint_path)
    if resuming:
        checkpoint_load(checkpoint_path, trainer)
        truncate_metrics(metrics_path, trainer.step)
    else:
        checkpoint_save(trainer, checkpoint_path)

    last_guidance = {}
    with MetricsWriter(metrics_path, columns, append=resuming) as writer:
        try:
            since, started = trainer.step, time.perf_counter()
            while trainer.step < cfg.total_steps:
                record = trainer.train_step()
                last_guidance = {k: v for k, v in record.items() if k.startswith("g_")}
                is_eval = trainer.step % cfg.eval_every == 0 or trainer.step == cfg.total_steps
                if is_eval:
                    elapsed = time.perf_counter() - started
                    log.info("steps %d-%d: %.4fs per training step" % (
                        since + 1, trainer.step, elapsed / (trainer.step - since)))
                    trainer.run_evaluation(record)
                writer.write(record)
                if is_eval:
                    writer.flush()
                    checkpoint_save(trainer, checkpoint_path)
                    since, started = trainer.step, time.perf_counter()
        except NonFiniteError:
            log.error("training aborted at step %d, last checkpoint kept at %s" % (trainer.step + 1, checkpoint_path))
            raise

    final_actor, final_vabc = trainer.final_scores()
    result = RunResult(
        metrics=metrics_path,
        checkpoint=checkpoint_path,
        steps=trainer.step,
        final_actor_score=final_actor,
        final_vabc_score=final_vabc,
        evaluations=trainer.evaluations,
        last_guidance=last_guidance,
    )
    write_json(os.path.join(directory, SCORES_FILE), result.to_dict())
    if final_actor is not None:
        log.info("final scores over the last %d evaluations: actor=%.2f vabc=%.2f" % (
            len(trainer.evaluations[-cfg.final_score_window:]), final_actor, final_vabc))
    return result
