"""
Boost App - Tests

Test cases for the RGF gradient estimate, line search and the boosting
loop.
"""

import tempfile

import numpy as np
from django.test import SimpleTestCase

from imaging.domain import Image, Mask, Perturbation
from imaging.services import ImagingService
from oracle.domain import QueryLedger
from oracle.fixtures import PLAIN, VERTICAL_BAR, object_grid, prototypes
from oracle.services import OracleService
from oracle.testing import ConstantOracle, ThresholdScoreOracle
from survivability.domain import LipschitzTrace, SurvivabilityEstimate
from survivability.services import SurvivabilityService
from transforms.domain import TransformDistribution
from .domain import BoostConfig
from .services import BoostService

IDENTITY = TransformDistribution.preset('identity')
GAMMA_ONLY = TransformDistribution.preset('identity', gamma_max=1.5)


def _surrogate():
    """4x4 gray scene, full mask and a linear-score oracle balanced at delta = 0."""
    x = Image.constant(4, 4, 0.5)
    m = Mask.full(np.ones((4, 4), dtype=bool))
    weights = np.linspace(0.5, 2.5, 16).reshape(4, 4, 1)
    oracle = ThresholdScoreOracle(weights, tau=0.5 * weights.mean())
    return x, m, weights, oracle


class GradientTests(SimpleTestCase):
    """Test cases for BoostService.rgf_gradient."""

    def test_constant_oracle_gives_zero_gradient(self):
        """Test that zero finite differences give an exactly zero gradient."""
        x, m, _, _ = _surrogate()
        grad = BoostService.rgf_gradient(
            x, m, Perturbation.zeros(4, 4), 1, IDENTITY, BoostConfig(n=5, q=4),
            ConstantOracle(1), QueryLedger(), seed=0,
        )
        self.assertFalse(grad.g.any())

    def test_empty_mask_gives_zero_gradient(self):
        """Test that an empty mask has no support and spends no probes."""
        x, _, _, oracle = _surrogate()
        m = Mask.empty(np.ones((4, 4), dtype=bool))
        ledger = QueryLedger()
        base = SurvivabilityEstimate(0.5, 5, 0, 5, 2)
        grad = BoostService.rgf_gradient(
            x, m, Perturbation.zeros(4, 4), 1, GAMMA_ONLY, BoostConfig(n=5, q=4),
            oracle, ledger, seed=0, base=base,
        )
        self.assertFalse(grad.g.any())
        self.assertEqual(ledger.total, 0)

    def test_queries_per_estimate(self):
        """Test that one gradient costs (q + 1) * n queries."""
        x, m, _, oracle = _surrogate()
        ledger = QueryLedger()
        BoostService.rgf_gradient(
            x, m, Perturbation.zeros(4, 4), 1, GAMMA_ONLY, BoostConfig(n=6, q=3),
            oracle, ledger, seed=4,
        )
        self.assertEqual(ledger.per_phase, {'boost': 24})

    def test_directions_are_unit_and_masked(self):
        """Test that directions have unit norm and vanish outside the mask."""
        obj = np.ones((4, 4), dtype=bool)
        bits = np.zeros((4, 4), dtype=bool)
        bits[1:3, 1:3] = True
        for u in BoostService.directions(Mask(bits, obj), 3, 5, seed=9):
            self.assertAlmostEqual(float(np.linalg.norm(u)), 1.0)
            self.assertFalse(u[~bits].any())

    def test_lipschitz_samples_recorded(self):
        """Test that every probe adds one finite Lipschitz ratio."""
        x, m, _, oracle = _surrogate()
        grad = BoostService.rgf_gradient(
            x, m, Perturbation.zeros(4, 4), 1, GAMMA_ONLY, BoostConfig(n=10, q=5, beta=0.5),
            oracle, QueryLedger(), seed=1,
        )
        self.assertEqual(len(grad.trace), 5)
        self.assertTrue(np.isfinite(grad.trace.max))

    def test_gradient_aligns_with_analytic_direction(self):
        """Test mean cosine similarity > 0.2 against the surrogate's score gradient."""
        x, m, weights, oracle = _surrogate()
        cfg = BoostConfig(n=30, q=10, beta=0.5, workers=1)
        cosines = []
        for seed in range(200):
            g = BoostService.rgf_gradient(
                x, m, Perturbation.zeros(4, 4), 1, GAMMA_ONLY, cfg, oracle, QueryLedger(), seed=seed,
            ).g
            norm = np.linalg.norm(g)
            cosines.append(float((g * weights).sum() / (norm * np.linalg.norm(weights))) if norm else 0.0)
        self.assertGreater(np.mean(cosines), 0.2)


class LineSearchTests(SimpleTestCase):
    """Test cases for the backtracking step."""

    def setUp(self):
        self.x = Image.constant(2, 2, 0.0)
        self.m = Mask.full(np.ones((2, 2), dtype=bool))
        self.d = Perturbation.zeros(2, 2)
        self.g = np.ones((2, 2, 1))
        # adversarial iff the pixel value stays at or below 0.3
        self.oracle = ThresholdScoreOracle(-np.ones((2, 2, 1)), tau=-0.3)
        self.cfg = BoostConfig(n=4, eta=1.0, k_max=8)

    def _search(self, base_value, oracle=None):
        ledger = QueryLedger()
        base = SurvivabilityEstimate(base_value, 4, 0, 4, int(base_value * 4))
        outcome = BoostService.line_search_step(
            self.x, self.x, self.m, self.d, self.g, base, 1, IDENTITY, self.cfg,
            oracle or self.oracle, ledger, seed=0,
        )
        return outcome, ledger

    def test_first_trial_accepted(self):
        """Test that an immediately acceptable step is eta and costs n queries."""
        outcome, ledger = self._search(0.0)
        self.assertEqual(outcome.step, 1.0)
        self.assertEqual(ledger.total, 4)

    def test_staircase_accepts_third_trial(self):
        """Test that improvement at the third trial gives eta / 4."""
        outcome, ledger = self._search(0.5)
        self.assertEqual(outcome.step, 0.25)
        self.assertEqual(outcome.trials, 3)
        self.assertEqual(ledger.total, 12)

    def test_fallback_to_smallest_step(self):
        """Test that without improvement eta / 2^8 is taken after k_max + 1 trials."""
        outcome, ledger = self._search(1.0, oracle=ConstantOracle(0))
        self.assertEqual(outcome.step, 1.0 / 2 ** 8)
        self.assertFalse(outcome.improved)
        self.assertEqual(ledger.total, 9 * 4)


class BoostLoopTests(SimpleTestCase):
    """Test cases for BoostService.boost."""

    def setUp(self):
        self.x, self.m, self.weights, self.oracle = _surrogate()
        self.d0 = Perturbation.zeros(4, 4)

    def test_budget_below_one_gradient_returns_d0(self):
        """Test that only the baseline is estimated when no iteration fits."""
        cfg = BoostConfig(n=10, q=10, budget=50)
        ledger = QueryLedger()
        result = BoostService.boost(self.x, self.m, self.d0, 1, GAMMA_ONLY, cfg, self.oracle, ledger)
        self.assertEqual(result.iterations, 0)
        self.assertFalse(result.delta.delta.any())
        self.assertEqual(ledger.total, 10)

    def test_budget_below_one_estimate_skips(self):
        """Test that the caller's estimate comes back untouched with no budget."""
        initial = SurvivabilityEstimate(0.4, 10, 0, 10, 4)
        result = BoostService.boost(
            self.x, self.m, self.d0, 1, GAMMA_ONLY, BoostConfig(n=10, budget=5),
            self.oracle, QueryLedger(), initial=initial,
        )
        self.assertIs(result.estimate, initial)
        self.assertEqual(result.stopped, 'no-budget')

    def test_budget_below_one_estimate_without_initial(self):
        """Test that a skipped run without a caller estimate reports None and spends nothing."""
        ledger = QueryLedger()
        result = BoostService.boost(
            self.x, self.m, self.d0, 1, GAMMA_ONLY, BoostConfig(n=10, budget=9), self.oracle, ledger,
        )
        self.assertIsNone(result.estimate)
        self.assertEqual(result.stopped, 'no-budget')
        self.assertEqual(ledger.total, 0)
        self.assertFalse(result.delta.delta.any())

    def test_query_accounting(self):
        """Test that spending equals n + iterations * (q + 1) * n within budget."""
        cfg = BoostConfig(n=5, q=3, beta=0.5, eta=0.5, budget=5 + 3 * 4 * 5 + 7)
        ledger = QueryLedger()
        result = BoostService.boost(self.x, self.m, self.d0, 1, GAMMA_ONLY, cfg, self.oracle, ledger)
        self.assertEqual(result.iterations, 3)
        self.assertEqual(result.queries_spent, 5 + 3 * 4 * 5)
        self.assertEqual(ledger.phase_total('boost'), result.queries_spent)
        self.assertLessEqual(ledger.total, cfg.budget)
        self.assertIsInstance(result.lipschitz, LipschitzTrace)
        self.assertEqual(len(result.lipschitz), 3 * 3)

    def test_best_so_far_non_decreasing(self):
        """Test that the best survivability never drops across iterations."""
        cfg = BoostConfig(n=10, q=4, beta=0.5, eta=0.5, budget=600)
        result = BoostService.boost(self.x, self.m, self.d0, 1, GAMMA_ONLY, cfg, self.oracle, QueryLedger())
        best = [record['best'] for record in result.history]
        self.assertEqual(best, sorted(best))
        self.assertGreaterEqual(result.estimate.value, best[0] if best else 0.0)

    def test_delta_gated_by_mask(self):
        """Test that the returned perturbation is exactly zero outside the mask."""
        obj = np.ones((4, 4), dtype=bool)
        bits = np.zeros((4, 4), dtype=bool)
        bits[:2] = True
        m = Mask(bits, obj)
        cfg = BoostConfig(n=5, q=3, beta=0.5, eta=2.0, budget=200)
        result = BoostService.boost(self.x, m, self.d0, 1, GAMMA_ONLY, cfg, self.oracle, QueryLedger())
        self.assertFalse(result.delta.delta[~bits].any())
        feasible = self.x.data + result.delta.delta
        self.assertGreaterEqual(feasible.min(), 0.0)
        self.assertLessEqual(feasible.max(), 1.0)

    def test_cold_start_flagged(self):
        """Test that zero initial survivability is flagged."""
        cfg = BoostConfig(n=5, q=2, budget=40)
        result = BoostService.boost(self.x, self.m, self.d0, 1, GAMMA_ONLY, cfg, ConstantOracle(0), QueryLedger())
        self.assertTrue(result.cold_start)

    def test_template_scenario_never_loses(self):
        """Test that boosting the built-in scenario ends at least at its start."""
        protos = prototypes()
        x, x_tar = protos[PLAIN], protos[VERTICAL_BAR]
        obj = object_grid()
        bits = np.zeros_like(obj)
        bits[6:26, 13:19] = True
        m = Mask(bits & obj, obj)
        d0 = ImagingService.plane_difference(x, x_tar, 32, 32).gated(m)
        cfg = BoostConfig(n=20, q=4, budget=20 * (1 + 2 * 5))
        dist = TransformDistribution.preset('gtsrb')
        result = BoostService.boost(x, m, d0, VERTICAL_BAR, dist, cfg, OracleService.builtin(), QueryLedger())
        initial = SurvivabilityService.estimate(
            x, m, d0, VERTICAL_BAR, dist, 20, OracleService.builtin(), QueryLedger(),
            BoostService.iteration_seed(0, 0),
        )
        self.assertGreaterEqual(result.estimate.value, initial.value)
        self.assertEqual(result.iterations, 2)

    def test_resume_matches_uninterrupted_run(self):
        """Test that resuming from a checkpoint replays the uninterrupted run exactly."""
        short = BoostConfig(n=5, q=3, beta=0.5, eta=0.5, budget=5 + 2 * 20)
        long = BoostConfig(n=5, q=3, beta=0.5, eta=0.5, budget=5 + 5 * 20)
        fresh = BoostService.boost(self.x, self.m, self.d0, 1, GAMMA_ONLY, long, self.oracle, QueryLedger())
        with tempfile.TemporaryDirectory() as tmp:
            BoostService.boost(self.x, self.m, self.d0, 1, GAMMA_ONLY, short, self.oracle, QueryLedger(),
                               checkpoint_dir=tmp)
            resumed = BoostService.boost(self.x, self.m, self.d0, 1, GAMMA_ONLY, long, self.oracle,
                                         QueryLedger(), checkpoint_dir=tmp, resume=True)
        self.assertEqual(resumed.iterations, fresh.iterations)
        self.assertEqual(resumed.history, fresh.history)
        np.testing.assert_array_equal(resumed.delta.delta, fresh.delta.delta)

    def test_prefix_replay_across_budgets(self):
        """Test that a larger budget replays the smaller budget's iterations."""
        small = BoostService.boost(self.x, self.m, self.d0, 1, GAMMA_ONLY,
                                   BoostConfig(n=5, q=3, eta=0.5, budget=45), self.oracle, QueryLedger())
        large = BoostService.boost(self.x, self.m, self.d0, 1, GAMMA_ONLY,
                                   BoostConfig(n=5, q=3, eta=0.5, budget=125), self.oracle, QueryLedger())
        self.assertEqual(large.history[:len(small.history)], small.history)
