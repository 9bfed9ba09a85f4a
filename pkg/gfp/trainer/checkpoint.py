# Copyright (c) 2025 The GFP authors
# GNU General Public License v3.0+ (see COPYING or https://www.gnu.org/licenses/gpl-3.0.txt)
"""
Checkpoints are directories holding one parameter file pair per network (and per Adam moment)
plus trainer_state.json. They are written to a sibling temporary directory and swapped in, so an
interrupted write never replaces the previous checkpoint.
"""

import logging
import os
import shutil

from gfp.config.train import config_hash, diff_fields, hashed_dict
from gfp.exceptions import CheckpointMismatchError, CheckpointMissingError
from gfp.kernel.io import load_params, read_json, save_params, write_json

log = logging.getLogger(__name__)

CHECKPOINT_FORMAT_VERSION = 1
STATE_FILE = "trainer_state.json"


def _optimizers(trainer):
    return {
        "critic1": trainer.critic.adam[0],
        "critic2": trainer.critic.adam[1],
        "actor": trainer.actor.adam,
        "flow": trainer.flow.adam,
    }


def checkpoint_save(trainer, path):
    path = os.path.abspath(path)
    tmp = path + ".tmp"
    old = path + ".old"
    for leftover in (tmp, old):
        if os.path.exists(leftover):
            shutil.rmtree(leftover)
    os.makedirs(tmp)

    networks = trainer.networks()
    for name, params in networks.items():
        save_params(params, tmp, name, step=trainer.step)
    adam = {}
    for name, state in _optimizers(trainer).items():
        save_params(state.m, tmp, "%s.adam_m" % name, step=trainer.step)
        save_params(state.v, tmp, "%s.adam_v" % name, step=trainer.step)
        adam[name] = state.hyperparameters()

    write_json(
        os.path.join(tmp, STATE_FILE),
        {
            "format_version": CHECKPOINT_FORMAT_VERSION,
            "step": trainer.step,
            "config_hash": config_hash(trainer.cfg),
            "config": hashed_dict(trainer.cfg),
            "networks": sorted(networks),
            "adam": adam,
            "rng": {name: rng.get_state() for name, rng in sorted(trainer.rngs.items())},
            "evaluations": trainer.evaluations,
        },
    )

    if os.path.exists(path):
        os.rename(path, old)
    os.rename(tmp, path)
    if os.path.exists(old):
        shutil.rmtree(old)
    log.debug("checkpoint written to %s at step %d" % (path, trainer.step))
    return path


def read_checkpoint_state(path):
    state_path = os.path.join(path, STATE_FILE)
    if not os.path.exists(state_path):
        raise CheckpointMissingError(path)
    return read_json(state_path, field=STATE_FILE)


def checkpoint_load(path, trainer):
    """ Restores a checkpoint into a trainer built from the same configuration """
    state = read_checkpoint_state(path)
    if state["config_hash"] != config_hash(trainer.cfg):
        raise CheckpointMismatchError(diff_fields(state["config"], hashed_dict(trainer.cfg)))

    networks = trainer.networks()
    if sorted(networks) != state["networks"]:
        raise CheckpointMismatchError(["networks"])
    for name, params in networks.items():
        loaded, _ = load_params(path, name)
        params.assign(loaded)
    for name, adam in _optimizers(trainer).items():
        adam.m.assign(load_params(path, "%s.adam_m" % name)[0])
        adam.v.assign(load_params(path, "%s.adam_v" % name)[0])
        hyper = state["adam"][name]
        adam.t = hyper["t"]
        adam.learning_rate = hyper["learning_rate"]
        adam.beta1 = hyper["beta1"]
        adam.beta2 = hyper["beta2"]
        adam.eps = hyper["eps"]
    for name, rng in trainer.rngs.items():
        rng.set_state(state["rng"][name])
    trainer.step = state["step"]
    trainer.evaluations = state["evaluations"]
    log.info("restored checkpoint %s at step %d" % (path, trainer.step))
    return trainer
