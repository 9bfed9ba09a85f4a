# Copyright (c) 2025 The GFP authors
# GNU General Public License v3.0+ (see COPYING or https://www.gnu.org/licenses/gpl-3.0.txt)
"""
Value-aware weights for the flow-matching loss.

Each weight compares the critic's value of the dataset action with the value of the actor's
proposal at the same state, scaled by the batch normalizer lambda and the temperature eta.
"""

import math

import numpy as np
from scipy.special import expit

DEFAULT_DELTAS = (0.01, 0.1, 0.25, 0.5, 0.75)


def lambda_scale(q_values, lambda_floor=1e-6):
    q = np.asarray(q_values, dtype=np.float64)
    if q.size == 0:
        raise ValueError("lambda_scale needs at least one Q value")
    return 1.0 / max(float(np.mean(np.abs(q))), lambda_floor)


def guidance_softmax(q_data, q_actor, lam, eta):
    """ Two-way softmax between the dataset action and the actor proposal, in logistic form """
    return expit(lam * (np.asarray(q_data, dtype=np.float64) - q_actor) / eta)


def guidance_awr(q_data, q_actor, lam, eta, awr_clip=100.0):
    arg = lam * (np.asarray(q_data, dtype=np.float64) - q_actor) / eta
    # bounded before exp, anything above log(awr_clip) ends up clipped anyway
    return np.minimum(np.exp(np.minimum(arg, math.log(awr_clip) + 1.0)), awr_clip)


def guidance_min(q_data, q_actor, q_flow, lam, eta):
    return guidance_softmax(q_data, np.minimum(q_actor, q_flow), lam, eta)


def compute_guidance(guidance, q_data, q_actor, q_flow, lam):
    """ Per-row weights for the configured mode, all ones for 'none' and 'bc-only' """
    mode = guidance.mode
    if mode == "softmax":
        return guidance_softmax(q_data, q_actor, lam, guidance.eta)
    if mode == "awr":
        return guidance_awr(q_data, q_actor, lam, guidance.eta, guidance.awr_clip)
    if mode == "min":
        return guidance_min(q_data, q_actor, q_flow, lam, guidance.eta)
    if mode in ("none", "bc-only"):
        return np.ones(np.shape(q_data)[0])
    raise ValueError("Unsupported guidance mode: %s" % mode)


def guidance_stats(g_values, deltas=DEFAULT_DELTAS):
    """ Fraction of rows whose weight exceeds each threshold """
    g = np.asarray(g_values, dtype=np.float64)
    return {delta: float(np.mean(g > delta)) for delta in deltas}
