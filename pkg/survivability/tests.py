"""
Survivability App - Tests

Test cases for the Monte-Carlo estimator, Chernoff bounds and the
Lipschitz tracker.
"""

import math
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from core.exceptions import BudgetExceededError, InvalidArgumentError
from imaging.domain import Mask
from imaging.services import ImagingService
from oracle.domain import QueryLedger
from oracle.fixtures import PLAIN, VERTICAL_BAR, object_grid, prototypes
from oracle.services import OracleService
from oracle.testing import ConstantOracle
from transforms.domain import TransformDistribution
from transforms.services import TransformService
from .domain import ABOVE, BELOW, EXACT, PARTIAL, LipschitzRecorder, LipschitzTrace
from .services import SurvivabilityService


class EstimatorTests(SimpleTestCase):
    """Test cases for SurvivabilityService.estimate."""

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        protos = prototypes()
        cls.x = protos[PLAIN]
        cls.x_tar = protos[VERTICAL_BAR]
        cls.object = object_grid()
        cls.full = Mask.full(cls.object)
        cls.delta = ImagingService.plane_difference(cls.x, cls.x_tar, 32, 32)
        cls.dist = TransformDistribution.preset('gtsrb')

    def _estimate(self, oracle, n=20, **kwargs):
        return SurvivabilityService.estimate(
            self.x, self.full, self.delta, VERTICAL_BAR, self.dist, n,
            oracle, QueryLedger(), seed=kwargs.pop('seed', 3), **kwargs,
        )

    def test_always_adversarial_is_one(self):
        """Test that an oracle always answering y_adv gives 1.0."""
        est = self._estimate(ConstantOracle(VERTICAL_BAR))
        self.assertEqual(est.value, 1.0)
        self.assertEqual(est.queries_spent, 20)

    def test_never_adversarial_is_zero(self):
        """Test that an oracle never answering y_adv gives 0.0."""
        self.assertEqual(self._estimate(ConstantOracle(PLAIN)).value, 0.0)

    def test_matches_plain_loop(self):
        """Test equality with an independent loop over the same transforms."""
        oracle = OracleService.builtin()
        adversarial = ImagingService.apply_perturbation(self.x, self.full, self.delta)
        for n in (1, 50, 100):
            est = self._estimate(oracle, n=n, seed=17)
            hits = 0
            for params in TransformService.sample_sequence(self.dist, 17, n, self.object):
                view = TransformService.apply(params, adversarial, self.object)
                hits += oracle.predict(view) == VERTICAL_BAR
            self.assertEqual(est.value, hits / n)
            self.assertEqual(est.hits, hits)

    def test_parallel_equals_serial(self):
        """Test that worker threads do not change the estimate."""
        oracle = OracleService.builtin()
        serial = self._estimate(oracle, n=40, workers=1)
        parallel = self._estimate(oracle, n=40, workers=4)
        self.assertEqual(serial, parallel)

    def test_ledger_billed_per_transform(self):
        """Test that the estimate spends exactly n queries in its phase."""
        ledger = QueryLedger()
        SurvivabilityService.estimate(
            self.x, self.full, self.delta, VERTICAL_BAR, self.dist, 25,
            ConstantOracle(0), ledger, seed=0, phase='probe',
        )
        self.assertEqual(ledger.per_phase, {'probe': 25})

    def test_budget_exhaustion_carries_partial(self):
        """Test that running out of budget attaches the partial estimate."""
        ledger = QueryLedger(budget=10)
        with self.assertRaises(BudgetExceededError) as ctx:
            SurvivabilityService.estimate(
                self.x, self.full, self.delta, VERTICAL_BAR, self.dist, 20,
                ConstantOracle(VERTICAL_BAR), ledger, seed=0,
            )
        partial = ctx.exception.partial
        self.assertEqual(partial.queries_spent, 10)
        self.assertEqual(partial.decision, PARTIAL)
        self.assertEqual(partial.value, 1.0)

    def test_early_exit_agrees_with_full_estimate(self):
        """Test that early-exit decisions match the full-n estimate."""
        oracle = OracleService.builtin()
        rng = np.random.default_rng(5)
        for trial in range(6):
            bits = self.object & (rng.random((32, 32)) < rng.uniform(0.2, 0.9))
            m = Mask(bits, self.object)
            full = SurvivabilityService.estimate(
                self.x, m, self.delta, VERTICAL_BAR, self.dist, 30, oracle, QueryLedger(), seed=trial,
            )
            for threshold in (0.2, 0.5, 0.8):
                early = SurvivabilityService.estimate(
                    self.x, m, self.delta, VERTICAL_BAR, self.dist, 30, oracle, QueryLedger(),
                    seed=trial, threshold=threshold,
                )
                self.assertLessEqual(early.queries_spent, 30)
                if early.decision == ABOVE:
                    self.assertGreaterEqual(full.value, threshold)
                elif early.decision == BELOW:
                    self.assertLess(full.value, threshold)
                else:
                    self.assertEqual(early.decision, EXACT)
                    self.assertEqual(early.value, full.value)

    def test_zero_transforms_rejected(self):
        """Test that n = 0 is rejected."""
        with self.assertRaises(InvalidArgumentError):
            self._estimate(ConstantOracle(0), n=0)


class ChernoffBoundTests(SimpleTestCase):
    """Test cases for the sampling-error bounds."""

    def test_matches_direct_evaluation(self):
        """Test the published form against direct evaluation."""
        for n, q, eps in [(10, 0.5, 0.5), (100, 0.9, 0.1), (1000, 0.3, 0.05)]:
            expected = min(1.0, 2 * math.exp(-n * q ** 3 / (3 * eps ** 2)))
            got = SurvivabilityService.chernoff_bound(n, q, eps)
            self.assertLessEqual(abs(got - expected), 1e-12 * max(expected, 1e-300))

    def test_derived_form(self):
        """Test the relative-error form 2 exp(-n q zeta^2 / 3) with zeta = eps / q."""
        n, q, eps = 500, 0.8, 0.1
        zeta = eps / q
        expected = 2 * math.exp(-n * q * zeta ** 2 / 3)
        self.assertAlmostEqual(SurvivabilityService.chernoff_bound_derived(n, q, eps), expected, places=12)

    def test_monotone_in_n(self):
        """Test that the bound never increases with more samples."""
        values = [SurvivabilityService.chernoff_bound(n, 0.7, 0.2) for n in range(0, 500, 25)]
        self.assertEqual(values, sorted(values, reverse=True))

    def test_monotone_in_inverse_eps(self):
        """Test that the bound never increases as eps shrinks."""
        values = [SurvivabilityService.chernoff_bound(100, 0.7, eps) for eps in (1.0, 0.5, 0.2, 0.1)]
        self.assertEqual(values, sorted(values, reverse=True))

    def test_huge_eps_clamps_to_one(self):
        """Test the clamp when the raw bound approaches 2."""
        self.assertEqual(SurvivabilityService.chernoff_bound(10, 0.5, 1e9), 1.0)

    def test_invalid_arguments(self):
        """Test that non-positive eps and q outside (0, 1] are rejected."""
        with self.assertRaises(InvalidArgumentError):
            SurvivabilityService.chernoff_bound(10, 0.5, 0.0)
        with self.assertRaises(InvalidArgumentError):
            SurvivabilityService.chernoff_bound(10, 0.0, 0.1)


class LipschitzTests(SimpleTestCase):
    """Test cases for the Lipschitz tracker."""

    def test_equal_survivability_is_zero(self):
        """Test that no change in S records ratio 0."""
        trace = SurvivabilityService.lipschitz_record(LipschitzTrace(), 0.4, 0.4, [1.0, 0.0])
        self.assertEqual(trace.samples, (0.0,))

    def test_ratio_arithmetic(self):
        """Test |dS| = 0.1 over a step of norm 2."""
        trace = SurvivabilityService.lipschitz_record(LipschitzTrace(), 0.6, 0.7, [0.0, 2.0])
        self.assertAlmostEqual(trace.samples[0], 0.05)

    def test_max_matches_rescan(self):
        """Test that the running max equals a brute-force rescan."""
        rng = np.random.default_rng(1)
        trace = LipschitzTrace()
        for _ in range(50):
            trace = SurvivabilityService.lipschitz_record(
                trace, rng.random(), rng.random(), rng.normal(size=4),
            )
        self.assertEqual(trace.max, max(trace.samples))

    def test_recorder_grows_in_place(self):
        """Test that a recorder is appended to in place and frozen into an equal trace."""
        recorder = LipschitzRecorder()
        for s_new in (0.5, 0.8, 0.6):
            returned = SurvivabilityService.lipschitz_record(recorder, s_new, 0.5, [0.0, 2.0])
            self.assertIs(returned, recorder)
        self.assertEqual(len(recorder), 3)
        frozen = recorder.freeze()
        self.assertIsInstance(frozen, LipschitzTrace)
        self.assertEqual(frozen.samples, recorder.samples)
        self.assertAlmostEqual(frozen.max, 0.15)
        self.assertAlmostEqual(recorder.max, 0.15)

    def test_frozen_trace_left_untouched(self):
        """Test that recording onto a frozen trace leaves the original unchanged."""
        original = LipschitzTrace((0.1,))
        updated = SurvivabilityService.lipschitz_record(original, 0.6, 0.7, [0.0, 2.0])
        self.assertEqual(original.samples, (0.1,))
        self.assertEqual(len(updated), 2)

    def test_zero_step_rejected(self):
        """Test that a zero-norm step is rejected."""
        with self.assertRaises(InvalidArgumentError):
            SurvivabilityService.lipschitz_record(LipschitzTrace(), 0.1, 0.2, [0.0])

    def test_histogram_covers_every_sample(self):
        """Test that the 0.005-wide histogram counts every ratio."""
        trace = LipschitzTrace((0.0, 0.004, 0.005, 0.012, 0.05))
        counts, edges = SurvivabilityService.lipschitz_histogram(trace)
        self.assertEqual(int(counts.sum()), 5)
        self.assertAlmostEqual(edges[1] - edges[0], 0.005)
        self.assertGreaterEqual(edges[-1], 0.05)
        with tempfile.TemporaryDirectory() as tmp:
            path = SurvivabilityService.save_lipschitz_histogram(trace, Path(tmp) / 'lip.png')
            self.assertTrue(path.exists())
