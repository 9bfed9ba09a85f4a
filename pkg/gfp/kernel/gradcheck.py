# Copyright (c) 2025 The GFP authors
# GNU General Public License v3.0+ (see COPYING or https://www.gnu.org/licenses/gpl-3.0.txt)

import dataclasses
import logging
from typing import Dict

import numpy as np

log = logging.getLogger(__name__)

# Gradients smaller than this are compared on an absolute scale of GRAD_FLOOR: with
# h = 1e-6 * (1 + |p|) the rounding noise of a central difference is around 1e-9.
GRAD_FLOOR = 1e-4


def relative_error(analytic, numeric, floor=GRAD_FLOOR):
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


@dataclasses.dataclass
class GradCheckReport:
    name: str
    tolerance: float
    errors: Dict[str, float]

    @property
    def max_error(self):
        return max(self.errors.values()) if self.errors else 0.0

    @property
    def passed(self):
        return self.max_error < self.tolerance

    def per_layer(self):
        layers = {}
        for array_name, error in self.errors.items():
            layer = array_name.split(".")[0]
            layers[layer] = max(layers.get(layer, 0.0), error)
        return layers


def corrupt_gradients(grads):
    """ Doubles the largest-magnitude entry of the first weight gradient """
    weight = grads.layers[0]["weight"]
    index = np.unravel_index(np.argmax(np.abs(weight)), weight.shape)
    weight[index] *= 2.0
    return grads


def grad_check(net_builder, tolerance, name="network", corrupt=False):
    """
    Compares analytic gradients against central differences for every parameter.

    net_builder() returns (params, objective) where objective() evaluates the loss on the current
    values of params and returns (loss, grads). Parameters are perturbed in place and restored.
    """
    params, objective = net_builder()
    _, grads = objective()
    if corrupt:
        grads = corrupt_gradients(grads)

    errors = {}
    for (array_name, array), analytic in zip(params.named_arrays(), grads.arrays()):
        worst = 0.0
        for index in np.ndindex(array.shape):
            original = array[index]
            h = 1e-6 * (1.0 + abs(original))
            array[index] = original + h
            plus = array[index]
            loss_plus = objective()[0]
            array[index] = original - h
            minus = array[index]
            loss_minus = objective()[0]
            array[index] = original
            numeric = (loss_plus - loss_minus) / (plus - minus)
            worst = max(worst, relative_error(analytic[index], numeric))
        errors[array_name] = worst
    params.bump()

    report = GradCheckReport(name=name, tolerance=tolerance, errors=errors)
    log.debug("gradient check %s: max relative error %.3e (tolerance %.1e)" % (name, report.max_error, tolerance))
    return report
