# Copyright (c) 2025 The GFP authors
# GNU General Public License v3.0+ (see COPYING or https://www.gnu.org/licenses/gpl-3.0.txt)

import logging

import numpy as np

from gfp.exceptions import NonFiniteError, ShapeError
from gfp.kernel.nn import check_compatible

log = logging.getLogger(__name__)


class AdamState(object):
    def __init__(self, m, v, t=0, learning_rate=3e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        self.m = m
        self.v = v
        self.t = t
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps

    @classmethod
    def create(cls, params, learning_rate=3e-4):
        return cls(params.zeros_like(), params.zeros_like(), learning_rate=learning_rate)

    def hyperparameters(self):
        return {
            "t": self.t,
            "learning_rate": self.learning_rate,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "eps": self.eps,
        }


def adam_step(params, grads, state, where="adam_step"):
    """ Bias-corrected Adam update applied in place to params and state """
    check_compatible(params, grads, where)
    check_compatible(params, state.m, where)
    for name, g in grads.named_arrays():
        if not np.all(np.isfinite(g)):
            raise NonFiniteError(where, step=state.t, detail="gradient %s" % name)

    state.t += 1
    correction1 = 1.0 - state.beta1 ** state.t
    correction2 = 1.0 - state.beta2 ** state.t
    for p, g, m, v in zip(params.arrays(), grads.arrays(), state.m.arrays(), state.v.arrays()):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * np.square(g)
        p -= state.learning_rate * (m / correction1) / (np.sqrt(v / correction2) + state.eps)
    params.bump()
    return params, state


def polyak_update(target, online, tau):
    """ target <- (1 - tau) * target + tau * online, in place """
    if not 0.0 <= tau <= 1.0:
        raise ValueError("Polyak coefficient must be in [0, 1], got %r" % tau)
    if target.spec != online.spec:
        raise ShapeError("polyak_update", target.spec, online.spec)
    for t, o in zip(target.arrays(), online.arrays()):
        if tau == 1.0:
            t[...] = o
        else:
            t *= 1.0 - tau
            t += tau * o
    target.bump()
    return target
