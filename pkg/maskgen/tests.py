"""
Maskgen App - Tests

Test cases for heatmap estimation, coarse and fine reduction, using
oracles with known decision rules.
"""

import math

import numpy as np
from django.test import SimpleTestCase

from core.exceptions import BudgetExceededError
from imaging.domain import Image, Mask
from imaging.services import ImagingService
from oracle.domain import QueryLedger
from oracle.testing import BlockOracle, ConstantOracle, WeightedSupportOracle
from survivability.domain import ABOVE, EXACT
from survivability.services import SurvivabilityService
from transforms.domain import TransformDistribution
from .domain import COARSE_ONLY, FINE_ONLY, VICTIM, MaskGenConfig
from .services import MaskGenService

Y_ADV = 1
IDENTITY = TransformDistribution.preset('identity')


def _scene(size):
    """Victim 0.2 and target 0.8, far apart under the 0.05 closeness tolerance."""
    return Image.constant(size, size, 0.2, channels=3), Image.constant(size, size, 0.8, channels=3)


def _patch_pixels(grid, *indices):
    bits = np.zeros(grid.object.shape, dtype=bool)
    for i in indices:
        bits |= grid[i].pixels
    return bits


class HeatmapTests(SimpleTestCase):
    """Test cases for MaskGenService.heatmap."""

    def setUp(self):
        self.x, self.x_tar = _scene(8)
        self.object = np.ones((8, 8), dtype=bool)
        self.grid = ImagingService.build_patch_grid(self.object, 4, 2)
        self.cfg = MaskGenConfig(n=20, workers=1)

    def test_always_adversarial_has_no_impact(self):
        """Test that every s_rho is 1 and every impact 0 for a constant y_adv oracle."""
        hm = MaskGenService.heatmap(
            self.x, self.x_tar, Y_ADV, self.grid, IDENTITY, self.cfg,
            ConstantOracle(Y_ADV), QueryLedger(), seed=0,
        )
        self.assertTrue(all(s == 1.0 for _, s in hm.per_patch))
        self.assertTrue(all(impact == 0.0 for _, impact in hm.impacts()))

    def test_query_count(self):
        """Test that 9 patches at n=20 cost 180 + 20 queries."""
        ledger = QueryLedger()
        MaskGenService.heatmap(
            self.x, self.x_tar, Y_ADV, self.grid, IDENTITY, self.cfg,
            ConstantOracle(Y_ADV), ledger, seed=0,
        )
        self.assertEqual(len(self.grid), 9)
        self.assertEqual(ledger.per_phase, {'heatmap': 200})

    def test_block_oracle_impacts(self):
        """Test impact 1 exactly for patches covering the decisive block, 0 elsewhere."""
        block = np.zeros((8, 8), dtype=bool)
        block[0:2, 0:2] = True
        oracle = BlockOracle(block, self.x_tar, Y_ADV)
        hm = MaskGenService.heatmap(
            self.x, self.x_tar, Y_ADV, self.grid, IDENTITY, self.cfg, oracle, QueryLedger(), seed=0,
        )
        for patch in self.grid:
            expected = 1.0 if (patch.pixels & block).any() else 0.0
            self.assertEqual(hm.impact(patch.index), expected)
        self.assertEqual(hm.order()[-1], 0)

    def test_parallel_matches_serial(self):
        """Test that patch-level threads give the same heatmap."""
        block = np.zeros((8, 8), dtype=bool)
        block[3:5, 3:5] = True
        oracle = BlockOracle(block, self.x_tar, Y_ADV)
        dist = TransformDistribution(rot_y_max=0, focal_f=1, distance_max=1, crop_percent_max=0,
                                     gamma_max=1, blur_kernels=(1, 3))
        serial = MaskGenService.heatmap(
            self.x, self.x_tar, Y_ADV, self.grid, dist, MaskGenConfig(n=8, workers=1),
            oracle, QueryLedger(), seed=2,
        )
        parallel = MaskGenService.heatmap(
            self.x, self.x_tar, Y_ADV, self.grid, dist, MaskGenConfig(n=8, workers=4),
            oracle, QueryLedger(), seed=2,
        )
        self.assertEqual(serial.per_patch, parallel.per_patch)

    def test_budget_exhaustion_returns_partial_heatmap(self):
        """Test that a partial heatmap travels with the budget error."""
        ledger = QueryLedger(budget=20 * 4)
        with self.assertRaises(BudgetExceededError) as ctx:
            MaskGenService.heatmap(
                self.x, self.x_tar, Y_ADV, self.grid, IDENTITY, self.cfg,
                ConstantOracle(Y_ADV), ledger, seed=0,
            )
        partial = ctx.exception.partial
        self.assertEqual(len(partial.per_patch), 3)
        self.assertFalse(partial.complete)

    def test_victim_relative_variant(self):
        """Test that the victim-relative heatmap measures gain from single patches."""
        block = np.zeros((8, 8), dtype=bool)
        block[0:2, 0:2] = True
        oracle = BlockOracle(block, self.x_tar, Y_ADV)
        hm = MaskGenService.heatmap(
            self.x, self.x_tar, Y_ADV, self.grid, IDENTITY, self.cfg, oracle, QueryLedger(),
            seed=0, relative_to=VICTIM,
        )
        self.assertEqual(hm.baseline, 0.0)
        self.assertEqual(hm.impact(0), 1.0)
        self.assertEqual(hm.impact(4), 0.0)

    def test_heatmap_grid_normalized(self):
        """Test that the pixel heatmap peaks at 1 over the decisive block."""
        block = np.zeros((8, 8), dtype=bool)
        block[0:2, 0:2] = True
        hm = MaskGenService.heatmap(
            self.x, self.x_tar, Y_ADV, self.grid, IDENTITY, self.cfg,
            BlockOracle(block, self.x_tar, Y_ADV), QueryLedger(), seed=0,
        )
        values = MaskGenService.heatmap_grid(hm, self.grid)
        self.assertEqual(values.max(), 1.0)
        self.assertEqual(values[0, 0], 1.0)
        self.assertEqual(values[7, 7], 0.0)


class CoarseReduceTests(SimpleTestCase):
    """Test cases for the binary-search reduction."""

    def _run(self, oracle, grid, x, x_tar, cfg, ledger=None):
        ledger = ledger or QueryLedger()
        hm = MaskGenService.heatmap(x, x_tar, Y_ADV, grid, IDENTITY, cfg, oracle, ledger, seed=0)
        return hm, MaskGenService.coarse_reduce(
            hm, grid, x, x_tar, Y_ADV, IDENTITY, cfg, oracle, ledger, seed=0,
        )

    def test_unreachable_keeps_all_patches(self):
        """Test that the full union is returned when s_hi is never reached."""
        x, x_tar = _scene(8)
        grid = ImagingService.build_patch_grid(np.ones((8, 8), bool), 4, 4)
        _, outcome = self._run(ConstantOracle(0), grid, x, x_tar, MaskGenConfig(n=2))
        self.assertFalse(outcome.reached_s_hi)
        self.assertEqual(outcome.pivot, 1)
        self.assertEqual(outcome.mask.size(), 64)

    def test_single_decisive_patch(self):
        """Test that the pivot lands on the last patch when it alone suffices."""
        x, x_tar = _scene(8)
        grid = ImagingService.build_patch_grid(np.ones((8, 8), bool), 4, 2)
        block = np.zeros((8, 8), dtype=bool)
        block[0:2, 0:2] = True
        _, outcome = self._run(BlockOracle(block, x_tar, Y_ADV), grid, x, x_tar, MaskGenConfig(n=2))
        self.assertEqual(outcome.pivot, len(grid))
        np.testing.assert_array_equal(outcome.mask.bits, grid[0].pixels)

    def test_matches_linear_scan_on_monotone_oracles(self):
        """Test agreement with an exhaustive pivot scan over 100 seeded instances."""
        rng = np.random.default_rng(2024)
        cfg = MaskGenConfig(n=1, s_lo=0.5, s_hi=0.9, workers=1)
        for _ in range(100):
            size = int(rng.choice([4, 6, 8]))
            patch = int(rng.choice([1, 2, 3]))
            x, x_tar = _scene(size)
            obj = np.ones((size, size), dtype=bool)
            grid = ImagingService.build_patch_grid(obj, patch, patch)
            self.assertLessEqual(len(grid), 64)
            weights = rng.random((size, size))
            tau = rng.uniform(0.0, weights.sum())
            oracle = WeightedSupportOracle(weights, x_tar, Y_ADV, tau)
            ledger = QueryLedger()
            hm, outcome = self._run(oracle, grid, x, x_tar, cfg, ledger)
            coarse_queries = ledger.phase_total('coarse')

            d_tar = MaskGenService.target_delta(x, x_tar, obj)
            scan_pivot = 1
            for pivot in range(1, len(grid) + 1):
                m = MaskGenService.suffix_union(hm, grid, pivot)
                est = SurvivabilityService.estimate(
                    x, m, d_tar, Y_ADV, IDENTITY, 1, oracle, QueryLedger(), seed=0,
                )
                if est.value >= cfg.s_hi:
                    scan_pivot = pivot
            self.assertEqual(outcome.pivot, scan_pivot)
            self.assertLessEqual(coarse_queries, math.ceil(math.log2(len(grid))) + 1 if len(grid) > 1 else 1)


class ObjectiveTests(SimpleTestCase):
    """Test cases for J."""

    def setUp(self):
        self.object = np.ones((4, 4), dtype=bool)

    def test_below_s_lo_is_infinite(self):
        """Test that survivability under s_lo is infinitely bad."""
        cfg = MaskGenConfig(s_lo=0.7)
        self.assertEqual(MaskGenService.objective_j(Mask.full(self.object), 0.69, cfg), math.inf)

    def test_empty_mask_full_survivability_is_zero(self):
        """Test that both terms vanish for an empty, fully survivable mask."""
        self.assertEqual(MaskGenService.objective_j(Mask.empty(self.object), 1.0, MaskGenConfig()), 0.0)

    def test_zero_weight_reduces_to_one_minus_s(self):
        """Test that lambda1 = 0 leaves only 1 - S."""
        cfg = MaskGenConfig(lambda1=0.0, s_lo=0.0)
        self.assertAlmostEqual(MaskGenService.objective_j(Mask.full(self.object), 0.8, cfg), 0.2)


class FineReduceTests(SimpleTestCase):
    """Test cases for the greedy pass."""

    def setUp(self):
        self.x, self.x_tar = _scene(8)
        self.object = np.ones((8, 8), dtype=bool)
        self.grid = ImagingService.build_patch_grid(self.object, 4, 4)

    def _fine(self, oracle, cfg, m0=None):
        ledger = QueryLedger()
        hm = MaskGenService.heatmap(
            self.x, self.x_tar, Y_ADV, self.grid, IDENTITY, cfg, oracle, ledger, seed=0,
        )
        outcome = MaskGenService.fine_reduce(
            m0 or Mask.full(self.object), hm, self.grid, self.x, self.x_tar, Y_ADV,
            IDENTITY, cfg, oracle, ledger, seed=0, s0=hm.baseline_estimate,
        )
        return outcome, ledger

    def test_redundant_patch_removed(self):
        """Test that an irrelevant patch is dropped and J falls by lambda1 * 16 / 64."""
        block = ~_patch_pixels(self.grid, 3)
        cfg = MaskGenConfig(n=2)
        outcome, _ = self._fine(BlockOracle(block, self.x_tar, Y_ADV), cfg)
        self.assertEqual(outcome.accepted, (3,))
        self.assertAlmostEqual(outcome.j_trace[0] - outcome.j_trace[1], 0.25 * 16 / 64)
        np.testing.assert_array_equal(outcome.mask.bits, block)

    def test_zero_weight_accepts_nothing_without_gain(self):
        """Test that with lambda1 = 0 no removal is accepted unless S rises."""
        block = ~_patch_pixels(self.grid, 3)
        cfg = MaskGenConfig(n=2, lambda1=0.0)
        outcome, _ = self._fine(BlockOracle(block, self.x_tar, Y_ADV), cfg)
        self.assertEqual(outcome.accepted, ())
        self.assertEqual(outcome.mask.size(), 64)

    def test_query_bound(self):
        """Test that fine spends at most n queries per patch."""
        cfg = MaskGenConfig(n=3)
        _, ledger = self._fine(ConstantOracle(Y_ADV), cfg)
        self.assertLessEqual(ledger.phase_total('fine'), 3 * len(self.grid))

    def test_soundness_over_seeded_instances(self):
        """Test strictly decreasing J and S >= s_lo over 100 seeded instances."""
        rng = np.random.default_rng(7)
        dist = TransformDistribution(rot_y_max=0, focal_f=1, distance_max=1, crop_percent_max=0,
                                     gamma_max=1, blur_kernels=(1, 3))
        grid = ImagingService.build_patch_grid(self.object, 2, 2)
        for trial in range(100):
            weights = rng.random((8, 8))
            oracle = WeightedSupportOracle(weights, self.x_tar, Y_ADV, rng.uniform(0.1, 0.6) * weights.sum())
            cfg = MaskGenConfig(n=4, s_lo=0.5, s_hi=0.75, lambda1=float(rng.uniform(0, 1)), workers=1)
            ledger = QueryLedger()
            hm = MaskGenService.heatmap(self.x, self.x_tar, Y_ADV, grid, dist, cfg, oracle, ledger, seed=trial)
            outcome = MaskGenService.fine_reduce(
                Mask.full(self.object), hm, grid, self.x, self.x_tar, Y_ADV, dist, cfg,
                oracle, ledger, seed=trial, s0=hm.baseline_estimate,
            )
            trace = outcome.j_trace
            self.assertTrue(all(b < a for a, b in zip(trace, trace[1:])))
            if hm.baseline >= cfg.s_lo:
                self.assertGreaterEqual(outcome.estimate.value, cfg.s_lo)


class GenerateMaskTests(SimpleTestCase):
    """Test cases for the three-stage composition."""

    def setUp(self):
        self.x, self.x_tar = _scene(8)
        self.object = np.ones((8, 8), dtype=bool)

    def test_sufficient_pair_is_kept(self):
        """Test that a known sufficient 2-patch set survives and nothing else is added."""
        grid = ImagingService.build_patch_grid(self.object, 4, 4)
        sufficient = _patch_pixels(grid, 0, 3)
        ledger = QueryLedger()
        result = MaskGenService.generate_mask(
            self.x, self.x_tar, Y_ADV, self.object, IDENTITY, MaskGenConfig(n=2, patch_size=4, stride=4),
            BlockOracle(sufficient, self.x_tar, Y_ADV), ledger, seed=0,
        )
        np.testing.assert_array_equal(result.mask.bits, sufficient)
        self.assertEqual(result.estimate.value, 1.0)
        self.assertEqual(sum(result.queries.values()), ledger.total)
        self.assertEqual(
            ledger.total,
            ledger.phase_total('heatmap') + ledger.phase_total('coarse') + ledger.phase_total('fine'),
        )

    def test_early_exit_completion_billed_to_coarse(self):
        """Test that completing an early-exit coarse estimate is billed to coarse, not fine."""
        grid = ImagingService.build_patch_grid(self.object, 4, 4)
        sufficient = _patch_pixels(grid, 0, 3)
        ledger = QueryLedger()
        result = MaskGenService.generate_mask(
            self.x, self.x_tar, Y_ADV, self.object, IDENTITY,
            MaskGenConfig(n=10, patch_size=4, stride=4, early_exit=True, workers=1),
            BlockOracle(sufficient, self.x_tar, Y_ADV), ledger, seed=0,
        )
        np.testing.assert_array_equal(result.mask.bits, sufficient)
        self.assertEqual(result.coarse.estimate.decision, ABOVE)
        self.assertEqual(result.estimate.decision, EXACT)
        # pivot 3 stops after 9 hits, pivot 4 after 2 misses, then 10 to complete
        self.assertEqual(ledger.phase_total('coarse'), 9 + 2 + 10)
        # only patches 0 and 3 are still in the mask
        self.assertEqual(ledger.phase_total('fine'), 2 * 10)
        self.assertLessEqual(ledger.phase_total('fine'), 10 * len(grid))

    def test_single_patch_grid(self):
        """Test a degenerate one-patch grid."""
        obj = np.zeros((8, 8), dtype=bool)
        obj[:4, :4] = True
        result = MaskGenService.generate_mask(
            self.x, self.x_tar, Y_ADV, obj, IDENTITY, MaskGenConfig(n=2, patch_size=4, stride=4),
            ConstantOracle(Y_ADV), QueryLedger(), seed=0,
        )
        self.assertIn(result.mask.size(), (0, 16))
        self.assertFalse(np.any(result.mask.bits & ~obj))

    def test_query_bounds(self):
        """Test heatmap, coarse and fine query counts for 9, 64 and 225 patches."""
        rng = np.random.default_rng(11)
        for size, patch, stride, expected in ((8, 4, 2, 9), (16, 2, 2, 64), (32, 4, 2, 225)):
            x, x_tar = _scene(size)
            obj = np.ones((size, size), dtype=bool)
            weights = rng.random((size, size))
            oracle = WeightedSupportOracle(weights, x_tar, Y_ADV, 0.3 * weights.sum())
            cfg = MaskGenConfig(n=2, patch_size=patch, stride=stride, workers=1)
            ledger = QueryLedger()
            result = MaskGenService.generate_mask(x, x_tar, Y_ADV, obj, IDENTITY, cfg, oracle, ledger, seed=1)
            count = len(result.grid)
            self.assertEqual(count, expected)
            self.assertEqual(ledger.phase_total('heatmap'), 2 * (count + 1))
            self.assertLessEqual(ledger.phase_total('coarse'), 2 * (math.ceil(math.log2(count)) + 1))
            self.assertLessEqual(ledger.phase_total('fine'), 2 * count)

    def test_modes(self):
        """Test that coarse-only skips fine and fine-only skips coarse."""
        grid_args = dict(n=2, patch_size=4, stride=4)
        oracle = ConstantOracle(Y_ADV)
        coarse = MaskGenService.generate_mask(
            self.x, self.x_tar, Y_ADV, self.object, IDENTITY,
            MaskGenConfig(mode=COARSE_ONLY, **grid_args), oracle, QueryLedger(), seed=0,
        )
        self.assertIsNone(coarse.fine)
        self.assertNotIn('fine', coarse.queries)
        fine = MaskGenService.generate_mask(
            self.x, self.x_tar, Y_ADV, self.object, IDENTITY,
            MaskGenConfig(mode=FINE_ONLY, **grid_args), oracle, QueryLedger(), seed=0,
        )
        self.assertIsNone(fine.coarse)
        self.assertNotIn('coarse', fine.queries)
