# Copyright (c) 2025 The GFP authors
# GNU General Public License v3.0+ (see COPYING or https://www.gnu.org/licenses/gpl-3.0.txt)

import unittest

import numpy as np
from hypothesis import given, settings, strategies as st
from numpy import testing as npt

from gfp.agent.guidance import (
    compute_guidance,
    guidance_awr,
    guidance_min,
    guidance_softmax,
    guidance_stats,
    lambda_scale,
)
from gfp.tests import factories

q_values = st.floats(min_value=-5.0, max_value=5.0)
lambdas = st.floats(min_value=0.1, max_value=2.0)
# log-uniform over [1e-6, 10], the low end saturates the logistic for most inputs
etas = st.floats(min_value=-6.0, max_value=1.0).map(lambda exponent: 10.0 ** exponent)
# beyond this logit the logistic is no longer strictly inside (0, 1) in float64, nor strictly increasing
UNSATURATED = 20.0
properties = settings(max_examples=10000, deadline=None)


def _logit(q_data, q_actor, lam, eta):
    return lam * (q_data - q_actor) / eta


class GuidanceValuesTestCase(unittest.TestCase):
    def test_softmax_reference(self):
        self.assertAlmostEqual(float(guidance_softmax(1.0, 0.0, 1.0, 1.0)), 0.731059, delta=1e-6)

    def test_awr_reference(self):
        self.assertAlmostEqual(float(guidance_awr(-0.5, 0.0, 1.0, 1.0)), 0.606531, delta=1e-6)

    def test_awr_clipped(self):
        self.assertEqual(float(guidance_awr(10.0, 0.0, 1.0, 1e-3, awr_clip=100.0)), 100.0)
        self.assertEqual(float(guidance_awr(1.0, 0.0, 1.0, 1.0, awr_clip=2.0)), 2.0)

    def test_min_reference(self):
        self.assertAlmostEqual(float(guidance_min(1.0, 0.5, 0.0, 1.0, 1.0)), 0.731059, delta=1e-6)

    def test_small_temperature_does_not_overflow(self):
        g = guidance_softmax(np.array([1.0, -1.0]), 0.0, 1.0, 1e-9)
        npt.assert_array_equal(g, [1.0, 0.0])

    def test_lambda_scale(self):
        self.assertEqual(lambda_scale(np.array([1.0, -1.0, 1.0])), 1.0)
        self.assertEqual(lambda_scale(np.array([2.0, -6.0])), 0.25)
        self.assertAlmostEqual(lambda_scale(np.zeros(4)), 1e6, delta=1e-6)
        self.assertAlmostEqual(lambda_scale(np.zeros(4), lambda_floor=1e-2), 100.0, delta=1e-9)
        with self.assertRaises(ValueError):
            lambda_scale(np.array([]))

    def test_stats(self):
        stats = guidance_stats(np.array([0.0, 0.2, 0.6, 0.9]), deltas=(0.1, 0.5, 0.75))
        self.assertEqual(stats, {0.1: 0.75, 0.5: 0.5, 0.75: 0.25})


class ComputeGuidanceTestCase(unittest.TestCase):
    def setUp(self):
        self.q_data = np.array([1.0, 0.0, -1.0])
        self.q_actor = np.array([0.0, 0.0, 0.0])
        self.q_flow = np.array([-1.0, 1.0, 0.0])

    def test_modes(self):
        for mode, expected in (
            ("softmax", guidance_softmax(self.q_data, self.q_actor, 2.0, 0.5)),
            ("awr", guidance_awr(self.q_data, self.q_actor, 2.0, 0.5)),
            ("min", guidance_min(self.q_data, self.q_actor, self.q_flow, 2.0, 0.5)),
        ):
            cfg = factories.GuidanceConfigFactory(mode=mode, eta=0.5)
            npt.assert_array_equal(compute_guidance(cfg, self.q_data, self.q_actor, self.q_flow, 2.0), expected)

    def test_unweighted_modes(self):
        for mode in ("none", "bc-only"):
            cfg = factories.GuidanceConfigFactory(mode=mode)
            g = compute_guidance(cfg, self.q_data, self.q_actor, self.q_flow, 2.0)
            npt.assert_array_equal(g, np.ones(3))

    def test_unknown_mode(self):
        with self.assertRaises(ValueError):
            compute_guidance(factories.GuidanceConfigFactory(mode="greedy"), self.q_data, self.q_actor, None, 1.0)


class GuidancePropertiesTestCase(unittest.TestCase):
    @properties
    @given(q_values, q_values, lambdas, etas)
    def test_softmax_in_unit_interval(self, q_data, q_actor, lam, eta):
        g = float(guidance_softmax(q_data, q_actor, lam, eta))
        self.assertGreaterEqual(g, 0.0)
        self.assertLessEqual(g, 1.0)
        if abs(_logit(q_data, q_actor, lam, eta)) <= UNSATURATED:
            self.assertGreater(g, 0.0)
            self.assertLess(g, 1.0)

    @properties
    @given(q_values, lambdas, etas)
    def test_half_on_ties(self, q, lam, eta):
        self.assertEqual(float(guidance_softmax(q, q, lam, eta)), 0.5)

    @properties
    @given(q_values, q_values, lambdas, etas, st.floats(min_value=-100.0, max_value=100.0))
    def test_shift_invariance(self, q_data, q_actor, lam, eta, shift):
        shifted = float(guidance_softmax(q_data + shift, q_actor + shift, lam, eta))
        # the shifted difference is exact up to a few ulps of |shift|, the logistic slope is at most 1/4
        delta = 1e-12 + lam * 1e-13 / eta
        self.assertAlmostEqual(shifted, float(guidance_softmax(q_data, q_actor, lam, eta)), delta=delta)

    @properties
    @given(q_values, q_values, lambdas, etas, st.floats(min_value=0.01, max_value=1.0))
    def test_increasing_in_data_value(self, q_data, q_actor, lam, eta, step):
        lower = float(guidance_softmax(q_data, q_actor, lam, eta))
        higher = float(guidance_softmax(q_data + step, q_actor, lam, eta))
        self.assertGreaterEqual(higher, lower)
        logits = (_logit(q_data, q_actor, lam, eta), _logit(q_data + step, q_actor, lam, eta))
        if max(abs(logit) for logit in logits) <= UNSATURATED:
            self.assertGreater(higher, lower)

    @properties
    @given(q_values, q_values, lambdas)
    def test_high_temperature_limit(self, q_data, q_actor, lam):
        eta = 1e9 * lam * abs(q_data - q_actor) + 1.0
        self.assertLess(abs(float(guidance_softmax(q_data, q_actor, lam, eta)) - 0.5), 1e-6)

    @properties
    @given(q_values, q_values, lambdas, st.floats(min_value=-6.0, max_value=-5.0).map(lambda e: 10.0 ** e))
    def test_low_temperature_is_binary(self, q_data, q_actor, lam, eta):
        g = float(guidance_softmax(q_data, q_actor, lam, eta))
        if q_data - q_actor >= 1e-3:
            self.assertGreater(g, 1.0 - 1e-4)
        elif q_actor - q_data >= 1e-3:
            self.assertLess(g, 1e-4)

    @properties
    @given(q_values, q_values, q_values, lambdas, etas)
    def test_min_never_lowers_the_weight(self, q_data, q_actor, q_flow, lam, eta):
        g_min = float(guidance_min(q_data, q_actor, q_flow, lam, eta))
        g_softmax = float(guidance_softmax(q_data, q_actor, lam, eta))
        if q_flow < q_actor:
            self.assertGreaterEqual(g_min, g_softmax)
        else:
            self.assertEqual(g_min, g_softmax)

    @properties
    @given(q_values, q_values, lambdas, etas)
    def test_awr_bounded(self, q_data, q_actor, lam, eta):
        g = float(guidance_awr(q_data, q_actor, lam, eta, awr_clip=100.0))
        self.assertGreaterEqual(g, 0.0)
        self.assertLessEqual(g, 100.0)
        if _logit(q_data, q_actor, lam, eta) > -UNSATURATED:
            self.assertGreater(g, 0.0)
