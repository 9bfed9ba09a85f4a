# Copyright (c) 2025 The GFP authors
# GNU General Public License v3.0+ (see COPYING or https://www.gnu.org/licenses/gpl-3.0.txt)
"""
Hyperparameter sweeps over the guidance temperature eta and the distillation coefficient alpha.
Each point is an independent, single-threaded training run so points can go to a process pool.
"""

import dataclasses
import itertools
import logging
import os
from typing import List

from gfp.config.train import apply_overrides, from_dict
from gfp.exceptions import ConfigError, GfpError
from gfp.trainer.metrics import delta_column

log = logging.getLogger(__name__)

AXES = ("eta", "alpha", "both", "around")
DEFAULT_FACTORS = (0.1, 1.0, 10.0)


@dataclasses.dataclass
class SweepSpec:
    base_config: dict
    axis: str
    eta_values: List[float] = dataclasses.field(default_factory=list)
    alpha_values: List[float] = dataclasses.field(default_factory=list)
    seeds: List[int] = dataclasses.field(default_factory=lambda: [0])
    factors: List[float] = dataclasses.field(default_factory=lambda: list(DEFAULT_FACTORS))

    def validate(self):
        if self.axis not in AXES:
            raise ConfigError("axis", "must be one of %s" % ", ".join(AXES))
        if not self.seeds:
            raise ConfigError("seeds", "at least one seed is required")
        needed = {"eta": ["eta_values"], "alpha": ["alpha_values"], "both": ["eta_values", "alpha_values"]}
        for name in needed.get(self.axis, ["factors"]):
            values = getattr(self, name)
            if not values:
                raise ConfigError(name, "must not be empty for axis '%s'" % self.axis)
            if any(v <= 0 for v in values):
                raise ConfigError(name, "values must be positive")
        return self


def sweep_points(spec):
    """ Returns (eta, alpha, seed) triples; a None means the base config's value """
    spec.validate()
    if spec.axis == "eta":
        grid = [(eta, None) for eta in spec.eta_values]
    elif spec.axis == "alpha":
        grid = [(None, alpha) for alpha in spec.alpha_values]
    elif spec.axis == "both":
        grid = list(itertools.product(spec.eta_values, spec.alpha_values))
    else:
        base = from_dict(spec.base_config)
        grid = [
            (base.guidance.eta * eta_factor, base.alpha * alpha_factor)
            for alpha_factor, eta_factor in itertools.product(spec.factors, spec.factors)
        ]
    return [(eta, alpha, seed) for (eta, alpha), seed in itertools.product(grid, spec.seeds)]


def point_name(eta, alpha, seed):
    parts = []
    if eta is not None:
        parts.append("eta%g" % eta)
    if alpha is not None:
        parts.append("alpha%g" % alpha)
    parts.append("seed%d" % seed)
    return "_".join(parts)


def point_config(base_config, eta, alpha, seed, out_dir):
    overrides = ["seed=%d" % seed]
    if eta is not None:
        overrides.append("guidance.eta=%r" % float(eta))
    if alpha is not None:
        overrides.append("alpha=%r" % float(alpha))
    run = os.path.join(out_dir, point_name(eta, alpha, seed))
    overrides.append("metrics=%s" % os.path.join(run, "metrics.csv"))
    overrides.append("checkpoint=%s" % os.path.join(run, "checkpoint"))
    return from_dict(apply_overrides(base_config, overrides))


def run_point(base_config, eta, alpha, seed, out_dir, deltas):
    """ Trains one sweep point, failures become a row with a 'failed' status """
    # imported here so the worker processes pay for it, not the parent
    from gfp.trainer.loop import train_run

    cfg = point_config(base_config, eta, alpha, seed, out_dir)
    row = {
        "eta": cfg.guidance.eta,
        "alpha": cfg.alpha,
        "seed": seed,
        "status": "ok",
        "actor_score": None,
        "vabc_score": None,
        "g_mean": None,
    }
    for delta in deltas:
        row[delta_column(delta)] = None
    try:
        result = train_run(cfg)
    except GfpError as e:
        log.error("sweep point %s failed: %s" % (point_name(eta, alpha, seed), e))
        row["status"] = "failed: %s" % e
        return row
    row["actor_score"] = result.final_actor_score
    row["vabc_score"] = result.final_vabc_score
    row.update(result.last_guidance)
    return row


def sweep_columns(deltas):
    return ["eta", "alpha", "seed", "status", "actor_score", "vabc_score", "g_mean"] + [
        delta_column(d) for d in deltas
    ]


def sort_rows(rows):
    return sorted(rows, key=lambda row: (row["eta"], row["alpha"], row["seed"]))
