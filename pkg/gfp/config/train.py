# Copyright (c) 2025 The GFP authors
# GNU General Public License v3.0+ (see COPYING or https://www.gnu.org/licenses/gpl-3.0.txt)

import dataclasses
import hashlib
import json
import logging
import os
from typing import List, Optional

from gfp.exceptions import ConfigError

log = logging.getLogger(__name__)

GUIDANCE_MODES = ("softmax", "awr", "min", "none", "bc-only")
BELLMAN_TARGETS = ("standard", "vabc")
AGGREGATIONS = ("mean", "min")
TARGET_KINDS = ("current", "polyak")

# Fields that do not influence the parameter trajectory of a run
UNHASHED_FIELDS = ("total_steps", "metrics", "checkpoint")


def _kind(kind):
    return {"kind": kind}


@dataclasses.dataclass
class GuidanceConfig:
    mode: str = dataclasses.field(default="softmax", metadata=_kind("str"))
    eta: float = dataclasses.field(default=1e-3, metadata=_kind("float"))
    awr_clip: float = dataclasses.field(default=100.0, metadata=_kind("float"))
    lambda_floor: float = dataclasses.field(default=1e-6, metadata=_kind("float"))


@dataclasses.dataclass
class TrainConfig:
    env_id: str = dataclasses.field(metadata=_kind("str"))
    dataset: str = dataclasses.field(metadata=_kind("str"))
    seed: int = dataclasses.field(default=0, metadata=_kind("int"))
    total_steps: int = dataclasses.field(default=50000, metadata=_kind("int"))
    batch_size: int = dataclasses.field(default=256, metadata=_kind("int"))
    gamma: float = dataclasses.field(default=0.99, metadata=_kind("float"))
    alpha: float = dataclasses.field(default=1.0, metadata=_kind("float"))
    guidance: GuidanceConfig = dataclasses.field(default_factory=GuidanceConfig, metadata=_kind("guidance"))
    bellman_target: str = dataclasses.field(default="standard", metadata=_kind("str"))
    aggregation: str = dataclasses.field(default="mean", metadata=_kind("str"))
    tau: float = dataclasses.field(default=0.005, metadata=_kind("float"))
    learning_rate: float = dataclasses.field(default=3e-4, metadata=_kind("float"))
    euler_steps: int = dataclasses.field(default=10, metadata=_kind("int"))
    hidden_dims: List[int] = dataclasses.field(default_factory=lambda: [256, 256], metadata=_kind("int_list"))
    time_embed_dim: int = dataclasses.field(default=64, metadata=_kind("int"))
    eval_every: int = dataclasses.field(default=5000, metadata=_kind("int"))
    eval_episodes: int = dataclasses.field(default=100, metadata=_kind("int"))
    guidance_deltas: List[float] = dataclasses.field(
        default_factory=lambda: [0.01, 0.1, 0.25, 0.5, 0.75], metadata=_kind("float_list")
    )
    final_score_window: int = dataclasses.field(default=3, metadata=_kind("int"))
    bootstrap_actor: str = dataclasses.field(default="current", metadata=_kind("str"))
    distill_target: str = dataclasses.field(default="current", metadata=_kind("str"))
    metrics: Optional[str] = dataclasses.field(default=None, metadata=_kind("optional_str"))
    checkpoint: Optional[str] = dataclasses.field(default=None, metadata=_kind("optional_str"))


def _is_number(value):
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _coerce(value, kind, name):
    if kind == "str":
        if not isinstance(value, str):
            raise ConfigError(name, "expected a string, got %r" % (value,))
        return value
    if kind == "optional_str":
        if value is not None and not isinstance(value, str):
            raise ConfigError(name, "expected a string or null, got %r" % (value,))
        return value
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(name, "expected an integer, got %r" % (value,))
        return value
    if kind == "float":
        if not _is_number(value):
            raise ConfigError(name, "expected a number, got %r" % (value,))
        return float(value)
    if kind == "int_list":
        if not isinstance(value, list) or not all(isinstance(v, int) and not isinstance(v, bool) for v in value):
            raise ConfigError(name, "expected a list of integers, got %r" % (value,))
        return list(value)
    if kind == "float_list":
        if not isinstance(value, list) or not all(_is_number(v) for v in value):
            raise ConfigError(name, "expected a list of numbers, got %r" % (value,))
        return [float(v) for v in value]
    if kind == "guidance":
        if not isinstance(value, dict):
            raise ConfigError(name, "expected an object, got %r" % (value,))
        return _build(GuidanceConfig, value, prefix=name + ".")
    raise ValueError("Unsupported field kind: %s" % kind)


def _build(cls, data, prefix=""):
    known = {f.name: f for f in dataclasses.fields(cls)}
    for key in data:
        if key not in known:
            raise ConfigError(prefix + key, "unknown field")
    kwargs = {}
    for name, field in known.items():
        if name in data:
            kwargs[name] = _coerce(data[name], field.metadata["kind"], prefix + name)
        elif field.default is dataclasses.MISSING and field.default_factory is dataclasses.MISSING:
            raise ConfigError(prefix + name, "required field is missing")
    return cls(**kwargs)


def validate(cfg):
    """ Checks the semantic constraints of a TrainConfig, raises ConfigError naming the offending field """
    positive_ints = ("batch_size", "euler_steps", "eval_every", "eval_episodes", "final_score_window")
    for name in positive_ints:
        if getattr(cfg, name) < 1:
            raise ConfigError(name, "must be >= 1")
    if cfg.total_steps < 0:
        raise ConfigError("total_steps", "must be >= 0")
    if not 0.0 < cfg.gamma < 1.0:
        raise ConfigError("gamma", "must be in (0, 1)")
    if cfg.alpha < 0.0:
        raise ConfigError("alpha", "must be >= 0")
    if not 0.0 < cfg.tau <= 1.0:
        raise ConfigError("tau", "must be in (0, 1]")
    if cfg.learning_rate <= 0.0:
        raise ConfigError("learning_rate", "must be > 0")
    if not cfg.hidden_dims or any(d < 1 for d in cfg.hidden_dims):
        raise ConfigError("hidden_dims", "must be a non-empty list of positive integers")
    if cfg.time_embed_dim < 2 or cfg.time_embed_dim % 2:
        raise ConfigError("time_embed_dim", "must be an even integer >= 2")
    if cfg.bellman_target not in BELLMAN_TARGETS:
        raise ConfigError("bellman_target", "must be one of %s" % ", ".join(BELLMAN_TARGETS))
    if cfg.aggregation not in AGGREGATIONS:
        raise ConfigError("aggregation", "must be one of %s" % ", ".join(AGGREGATIONS))
    for name in ("bootstrap_actor", "distill_target"):
        if getattr(cfg, name) not in TARGET_KINDS:
            raise ConfigError(name, "must be one of %s" % ", ".join(TARGET_KINDS))
    if not cfg.guidance_deltas or sorted(cfg.guidance_deltas) != cfg.guidance_deltas:
        raise ConfigError("guidance_deltas", "must be a non-empty ascending list")
    guidance = cfg.guidance
    if guidance.mode not in GUIDANCE_MODES:
        raise ConfigError("guidance.mode", "must be one of %s" % ", ".join(GUIDANCE_MODES))
    if guidance.eta <= 0.0:
        raise ConfigError("guidance.eta", "must be > 0")
    if guidance.awr_clip < 1.0:
        raise ConfigError("guidance.awr_clip", "must be >= 1")
    if guidance.lambda_floor <= 0.0:
        raise ConfigError("guidance.lambda_floor", "must be > 0")
    return cfg


def from_dict(data):
    if not isinstance(data, dict):
        raise ConfigError("<root>", "expected a JSON object")
    return validate(_build(TrainConfig, data))


def to_dict(cfg):
    return dataclasses.asdict(cfg)


def parse_override(text):
    """ Parses a 'dotted.key=value' override, the value is read as JSON and falls back to a plain string """
    if "=" not in text:
        raise ConfigError(text, "overrides must look like key=value")
    key, raw = text.split("=", 1)
    key = key.strip()
    if not key:
        raise ConfigError(text, "override key is empty")
    try:
        value = json.loads(raw)
    except ValueError:
        value = raw
    return key, value


def apply_overrides(data, overrides):
    data = json.loads(json.dumps(data))
    for override in overrides:
        key, value = parse_override(override)
        node = data
        parts = key.split(".")
        for part in parts[:-1]:
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise ConfigError(key, "'%s' is not an object" % part)
            node = child
        node[parts[-1]] = value
        log.debug("config override %s=%r" % (key, value))
    return data


def load_config(path, overrides=()):
    try:
        with open(path, "r") as fd:
            data = json.load(fd)
    except FileNotFoundError:
        raise ConfigError("config", "file not found: %s" % path)
    except ValueError as e:
        raise ConfigError("config", "%s is not valid JSON: %s" % (path, e))
    cfg = from_dict(apply_overrides(data, overrides))
    # Relative dataset paths are relative to the config file
    if not os.path.isabs(cfg.dataset):
        cfg.dataset = os.path.normpath(os.path.join(os.path.dirname(os.path.abspath(path)), cfg.dataset))
    return cfg


def _flatten(data, prefix=""):
    flat = {}
    for key, value in data.items():
        if isinstance(value, dict):
            flat.update(_flatten(value, prefix + key + "."))
        else:
            flat[prefix + key] = value
    return flat


def hashed_dict(cfg):
    data = to_dict(cfg)
    for name in UNHASHED_FIELDS:
        data.pop(name, None)
    return data


def config_hash(cfg):
    canonical = json.dumps(hashed_dict(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def diff_fields(a, b):
    """ Returns the sorted dotted names of the fields that differ between two hashed config dicts """
    flat_a, flat_b = _flatten(a), _flatten(b)
    return sorted(k for k in set(flat_a) | set(flat_b) if flat_a.get(k) != flat_b.get(k))
