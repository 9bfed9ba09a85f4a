# Copyright (c) 2025 The GFP authors
# GNU General Public License v3.0+ (see COPYING or https://www.gnu.org/licenses/gpl-3.0.txt)

import unittest

import numpy as np
from numpy import testing as npt

from gfp.exceptions import NonFiniteError, ShapeError
from gfp.kernel.nn import MlpSpec, ParamSet
from gfp.kernel.optim import AdamState, adam_step, polyak_update
from gfp.tests import factories


def _filled(params, value):
    filled = params.zeros_like()
    for array in filled.arrays():
        array[...] = value
    return filled


class AdamTestCase(unittest.TestCase):
    def test_first_step_moves_by_learning_rate(self):
        params = ParamSet.zeros(MlpSpec(1, (2,), 1))
        state = AdamState.create(params, learning_rate=3e-4)
        adam_step(params, _filled(params, 1.0), state)
        self.assertEqual(state.t, 1)
        for array in params.arrays():
            npt.assert_allclose(array, -3e-4, atol=1e-9)

    def test_step_follows_gradient_sign(self):
        params = ParamSet.zeros(MlpSpec(1, (2,), 1))
        state = AdamState.create(params)
        adam_step(params, _filled(params, -5.0), state)
        for array in params.arrays():
            self.assertTrue(np.all(array > 0.0))

    def test_non_finite_gradient_aborts(self):
        params = factories.params_for(factories.MlpSpecFactory())
        before = params.copy()
        state = AdamState.create(params)
        grads = params.zeros_like()
        grads.layers[1]["bias"][0] = np.nan
        with self.assertRaises(NonFiniteError) as ctx:
            adam_step(params, grads, state, where="unit")
        self.assertIn("layer1.bias", str(ctx.exception))
        self.assertEqual(state.t, 0)
        self.assertEqual(params.max_abs_diff(before), 0.0)

    def test_version_bumped(self):
        params = factories.params_for(factories.MlpSpecFactory())
        version = params.version
        adam_step(params, params.zeros_like(), AdamState.create(params))
        self.assertEqual(params.version, version + 1)

    def test_mismatched_gradients(self):
        params = factories.params_for(factories.MlpSpecFactory())
        other = ParamSet.zeros(factories.MlpSpecFactory(output_dim=1))
        with self.assertRaises(ShapeError):
            adam_step(params, other, AdamState.create(params))

    def test_hyperparameters(self):
        params = ParamSet.zeros(MlpSpec(1, (2,), 1))
        hyper = AdamState.create(params, learning_rate=1e-3).hyperparameters()
        self.assertEqual(hyper, {"t": 0, "learning_rate": 1e-3, "beta1": 0.9, "beta2": 0.999, "eps": 1e-8})


class PolyakTestCase(unittest.TestCase):
    def setUp(self):
        spec = factories.MlpSpecFactory(use_layer_norm=True)
        self.online = factories.params_for(spec, seed=1)
        self.target = factories.params_for(spec, seed=2)

    def test_update_is_affine(self):
        tau = 0.1
        twice = self.target.copy()
        polyak_update(twice, self.online, tau)
        polyak_update(twice, self.online, tau)
        once = self.target.copy()
        polyak_update(once, self.online, 1.0 - (1.0 - tau) ** 2)
        for a, b in zip(twice.arrays(), once.arrays()):
            npt.assert_allclose(a, b, rtol=1e-12, atol=1e-12)

    def test_tau_one_copies(self):
        polyak_update(self.target, self.online, 1.0)
        self.assertEqual(self.target.max_abs_diff(self.online), 0.0)

    def test_online_untouched(self):
        online = self.online.copy()
        polyak_update(self.target, self.online, 0.5)
        self.assertEqual(self.online.max_abs_diff(online), 0.0)

    def test_invalid_tau(self):
        with self.assertRaises(ValueError):
            polyak_update(self.target, self.online, 1.5)
