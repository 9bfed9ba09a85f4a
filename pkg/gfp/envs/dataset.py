# Copyright (c) 2025 The GFP authors
# GNU General Public License v3.0+ (see COPYING or https://www.gnu.org/licenses/gpl-3.0.txt)

import dataclasses
import logging
import os
from typing import Dict

import numpy as np

from gfp.envs.specs import env_reset, env_step, expert_action, get_env_spec, low_mode_action
from gfp.exceptions import DatasetFormatError, InvalidMixError
from gfp.kernel.io import read_json, write_json
from gfp.kernel.rng import Rng

log = logging.getLogger(__name__)

DATASET_FORMAT_VERSION = 1
DATASET_STREAM = 11
STD_FLOOR = 1e-8
MIX_COMPONENTS = ("expert", "noisy-expert", "random", "low-mode")
EXPERT_NOISE = 0.05
NOISY_EXPERT_NOISE = 0.3
LOW_MODE_NOISE = 0.05

FLOAT32_LE = np.dtype("<f4")
COLUMNS = ("s", "a", "r", "s_next", "terminal")


@dataclasses.dataclass
class OfflineDataset:
    env_id: str
    s: np.ndarray
    a: np.ndarray
    r: np.ndarray
    s_next: np.ndarray
    terminal: np.ndarray
    state_mean: np.ndarray
    state_std: np.ndarray
    seed: int = 0
    mix: Dict[str, float] = dataclasses.field(default_factory=dict)

    @property
    def n(self):
        return self.r.shape[0]

    @property
    def state_dim(self):
        return self.s.shape[1]

    @property
    def action_dim(self):
        return self.a.shape[1]

    def normalize(self, states):
        return (np.asarray(states, dtype=np.float64) - self.state_mean) / self.state_std

    def summary(self):
        return {
            "env_id": self.env_id,
            "n": self.n,
            "seed": self.seed,
            "mix": dict(self.mix),
            "mean_reward": float(self.r.astype(np.float64).mean()),
            "terminal_fraction": float(self.terminal.astype(np.float64).mean()),
        }


@dataclasses.dataclass
class Batch:
    s: np.ndarray
    a: np.ndarray
    r: np.ndarray
    s_next: np.ndarray
    terminal: np.ndarray
    indices: np.ndarray

    @property
    def size(self):
        return self.r.shape[0]


def parse_mix(text):
    """ Parses 'expert=0.5,low-mode=0.5' into a mix dict """
    mix = {}
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        if "=" not in item:
            raise InvalidMixError("'%s' is not a name=weight pair" % item)
        name, weight = item.split("=", 1)
        try:
            mix[name.strip()] = float(weight)
        except ValueError:
            raise InvalidMixError("weight of '%s' is not a number: %s" % (name, weight))
    return mix


def validate_mix(spec, mix):
    if not mix:
        raise InvalidMixError("the mix is empty")
    for name, weight in mix.items():
        if name not in MIX_COMPONENTS:
            raise InvalidMixError("unknown behavior '%s', expected one of: %s" % (name, ", ".join(MIX_COMPONENTS)))
        if not np.isfinite(weight) or weight < 0:
            raise InvalidMixError("weight of '%s' must be >= 0, got %r" % (name, weight))
    total = sum(mix.values())
    if abs(total - 1.0) > 1e-9:
        raise InvalidMixError("weights must sum to 1, got %r" % total)
    if mix.get("low-mode", 0.0) > 0 and spec.env_id == "line-reach":
        raise InvalidMixError("'low-mode' behavior is not available on %s" % spec.env_id)
    return {name: float(mix[name]) for name in MIX_COMPONENTS if name in mix}


def _pick_behavior(mix, u):
    cumulative = 0.0
    names = list(mix)
    for name in names:
        cumulative += mix[name]
        if u < cumulative:
            return name
    return [name for name in names if mix[name] > 0][-1]


def _behavior_action(spec, behavior, state, rng):
    d = spec.action_dim
    if behavior == "random":
        action = rng.uniforms((1, d)) * 2.0 - 1.0
    elif behavior == "low-mode":
        action = low_mode_action(spec, state) + LOW_MODE_NOISE * rng.standard_normal((1, d))
    else:
        sigma = EXPERT_NOISE if behavior == "expert" else NOISY_EXPERT_NOISE
        action = expert_action(spec, state) + sigma * rng.standard_normal((1, d))
    return np.clip(action, -1.0, 1.0)


def state_stats(states):
    states = np.asarray(states, dtype=np.float64)
    return states.mean(axis=0), np.maximum(states.std(axis=0), STD_FLOOR)


def generate_dataset(spec, n_transitions, mix, seed):
    """
    Rolls episodes, each with a behavior drawn from `mix`, until n_transitions are collected.
    Episodes stop at the first terminal transition or at the horizon.
    """
    if isinstance(spec, str):
        spec = get_env_spec(spec)
    if n_transitions < 1:
        raise DatasetFormatError("n", "must be >= 1, got %s" % n_transitions)
    mix = validate_mix(spec, mix)
    rng = Rng(seed, DATASET_STREAM)

    columns = {name: [] for name in COLUMNS}
    episodes = 0
    while len(columns["r"]) < n_transitions:
        behavior = _pick_behavior(mix, rng.uniform())
        state = env_reset(spec, rng, n=1)
        episodes += 1
        for _ in range(spec.horizon):
            action = _behavior_action(spec, behavior, state, rng)
            next_state, reward, terminal = env_step(spec, state, action)
            columns["s"].append(state[0])
            columns["a"].append(action[0])
            columns["r"].append(reward[0])
            columns["s_next"].append(next_state[0])
            columns["terminal"].append(terminal[0])
            state = next_state
            if terminal[0] or len(columns["r"]) >= n_transitions:
                break

    s = np.array(columns["s"], dtype=np.float32)
    mean, std = state_stats(s)
    log.info("generated %d transitions over %d episodes on %s" % (n_transitions, episodes, spec.env_id))
    return OfflineDataset(
        env_id=spec.env_id,
        s=s,
        a=np.array(columns["a"], dtype=np.float32),
        r=np.array(columns["r"], dtype=np.float32),
        s_next=np.array(columns["s_next"], dtype=np.float32),
        terminal=np.array(columns["terminal"], dtype=np.uint8),
        state_mean=mean,
        state_std=std,
        seed=seed,
        mix=mix,
    )


def sample_minibatch(ds, batch_size, rng):
    """ Uniform sampling with replacement, states come back normalized and as float64 """
    if ds.n < 1:
        raise DatasetFormatError("n", "cannot sample from an empty dataset")
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1, got %r" % batch_size)
    idx = rng.integers(ds.n, batch_size)
    return Batch(
        s=ds.normalize(ds.s[idx]),
        a=ds.a[idx].astype(np.float64),
        r=ds.r[idx].astype(np.float64),
        s_next=ds.normalize(ds.s_next[idx]),
        terminal=ds.terminal[idx].astype(np.float64),
        indices=idx,
    )


def _column_bytes(ds, name):
    array = getattr(ds, name)
    if name == "terminal":
        return np.ascontiguousarray(array, dtype=np.uint8).tobytes()
    return np.ascontiguousarray(array, dtype=FLOAT32_LE).tobytes()


def save_dataset(ds, path):
    os.makedirs(path, exist_ok=True)
    files = {name: "%s.bin" % name for name in COLUMNS}
    for name in COLUMNS:
        with open(os.path.join(path, files[name]), "wb") as fd:
            fd.write(_column_bytes(ds, name))
    manifest = {
        "format_version": DATASET_FORMAT_VERSION,
        "env_id": ds.env_id,
        "n": ds.n,
        "state_dim": ds.state_dim,
        "action_dim": ds.action_dim,
        "seed": ds.seed,
        "mix": ds.mix,
        "state_mean": [float(x) for x in ds.state_mean],
        "state_std": [float(x) for x in ds.state_std],
        "files": files,
    }
    write_json(os.path.join(path, "manifest.json"), manifest)
    log.debug("saved dataset of %d transitions to %s" % (ds.n, path))
    return path


def _require(manifest, field):
    if field not in manifest:
        raise DatasetFormatError(field, "missing from manifest")
    return manifest[field]


def _read_column(path, manifest, name, width, dtype):
    files = _require(manifest, "files")
    if not isinstance(files, dict):
        raise DatasetFormatError("files", "expected a mapping of column names to file names")
    filename = files.get(name)
    if not filename:
        raise DatasetFormatError("files.%s" % name, "missing from manifest")
    full = os.path.join(path, filename)
    if not os.path.exists(full):
        raise DatasetFormatError("files.%s" % name, "file %s does not exist" % full)
    with open(full, "rb") as fd:
        blob = fd.read()
    n = manifest["n"]
    expected = n * width * dtype.itemsize
    if len(blob) != expected:
        raise DatasetFormatError(
            "files.%s" % name, "expected %d bytes, got %d (file %s)" % (expected, len(blob), filename)
        )
    array = np.frombuffer(blob, dtype=dtype).copy()
    return array.reshape(n, width) if name in ("s", "a", "s_next") else array


def load_dataset(path):
    manifest_path = os.path.join(path, "manifest.json")
    if not os.path.exists(manifest_path):
        raise DatasetFormatError("manifest", "%s does not exist" % manifest_path)
    manifest = read_json(manifest_path)
    if not isinstance(manifest, dict):
        raise DatasetFormatError("manifest", "expected a JSON object")
    version = _require(manifest, "format_version")
    if version != DATASET_FORMAT_VERSION:
        raise DatasetFormatError("format_version", "unsupported value %r" % (version,))
    n = _require(manifest, "n")
    if not isinstance(n, int) or n < 1:
        raise DatasetFormatError("n", "must be an integer >= 1, got %r" % (n,))
    env_id = _require(manifest, "env_id")
    spec = get_env_spec(env_id)
    state_dim = _require(manifest, "state_dim")
    action_dim = _require(manifest, "action_dim")
    if state_dim != spec.state_dim:
        raise DatasetFormatError("state_dim", "expected %d for %s, got %r" % (spec.state_dim, env_id, state_dim))
    if action_dim != spec.action_dim:
        raise DatasetFormatError("action_dim", "expected %d for %s, got %r" % (spec.action_dim, env_id, action_dim))
    mean = np.array(_require(manifest, "state_mean"), dtype=np.float64)
    std = np.array(_require(manifest, "state_std"), dtype=np.float64)
    if mean.shape != (state_dim,):
        raise DatasetFormatError("state_mean", "expected %d entries" % state_dim)
    if std.shape != (state_dim,) or np.any(std < STD_FLOOR):
        raise DatasetFormatError("state_std", "expected %d entries >= %g" % (state_dim, STD_FLOOR))

    return OfflineDataset(
        env_id=env_id,
        s=_read_column(path, manifest, "s", state_dim, FLOAT32_LE),
        a=_read_column(path, manifest, "a", action_dim, FLOAT32_LE),
        r=_read_column(path, manifest, "r", 1, FLOAT32_LE),
        s_next=_read_column(path, manifest, "s_next", state_dim, FLOAT32_LE),
        terminal=_read_column(path, manifest, "terminal", 1, np.dtype(np.uint8)),
        state_mean=mean,
        state_std=std,
        seed=_require(manifest, "seed"),
        mix=_require(manifest, "mix"),
    )
