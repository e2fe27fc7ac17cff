"""
Baseline App - Tests

Test cases for boundary search, the boundary-distance attack, the
thresholded wrapper and the threshold schedule.
"""

import csv
import json
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from core.exceptions import InitializationFailureError
from imaging.domain import Image, Mask
from oracle.domain import QueryLedger
from oracle.services import OracleService
from oracle.testing import CappedOracle, ConstantOracle, HalfspaceOracle
from transforms.domain import TransformDistribution
from .domain import COMPLETE, UNREACHABLE, UNSURVIVABLE_LABEL, OptAttackConfig, WrappedOracle
from .services import EFFICIENCY_COLUMNS, BaselineService

IDENTITY = TransformDistribution.preset('identity')


def _gray(value=0.5):
    return Image.constant(4, 4, value)


def _full_mask():
    return Mask.full(np.ones((4, 4), dtype=bool))


class BoundaryDistanceTests(SimpleTestCase):
    """Test cases for BaselineService.boundary_distance."""

    def setUp(self):
        self.x = _gray()
        self.phi = np.ones((4, 4, 1))
        # adversarial iff the scale along phi reaches 0.37
        self.oracle = HalfspaceOracle(self.x, self.phi, 0.37)

    def test_recovers_planted_threshold(self):
        """Test that the planted scale is recovered within tol."""
        lam = BaselineService.boundary_distance(self.x, self.phi, 1, self.oracle, QueryLedger(), tol=1e-3)
        self.assertGreaterEqual(lam, 0.37 - 1e-9)
        self.assertLessEqual(lam, 0.37 + 1e-3)

    def test_bracket_ends(self):
        """Test that the lower end is not adversarial and the upper end is."""
        bracket = BaselineService.bracket(self.x, self.phi, 1, self.oracle, QueryLedger(), tol=1e-3)
        unit = self.phi / np.linalg.norm(self.phi)
        self.assertEqual(self.oracle.predict(Image(self.x.data + bracket.upper * unit)), 1)
        self.assertEqual(self.oracle.predict(Image(self.x.data + bracket.lower * unit)), 0)
        self.assertLessEqual(bracket.upper - bracket.lower, 1e-3)

    def test_coarse_tolerance_bounds_error(self):
        """Test that a wider tolerance still brackets within tol."""
        lam = BaselineService.boundary_distance(self.x, self.phi, 1, self.oracle, QueryLedger(), tol=0.1)
        self.assertGreaterEqual(lam, 0.37 - 1e-9)
        self.assertLessEqual(lam, 0.47)

    def test_already_adversarial(self):
        """Test that an adversarial x has distance 0 after one query."""
        ledger = QueryLedger()
        lam = BaselineService.boundary_distance(self.x, self.phi, 1, ConstantOracle(1), ledger)
        self.assertEqual(lam, 0.0)
        self.assertEqual(ledger.total, 1)

    def test_never_adversarial(self):
        """Test that a direction that never flips fails initialization."""
        ledger = QueryLedger()
        with self.assertRaises(InitializationFailureError):
            BaselineService.boundary_distance(self.x, self.phi, 1, ConstantOracle(0), ledger)
        # origin, initial guess and ten doublings
        self.assertEqual(ledger.total, 12)

    def test_starts_from_adversarial_guess(self):
        """Test that an adversarial initial guess is refined downward."""
        lam = BaselineService.boundary_distance(
            self.x, self.phi, 1, self.oracle, QueryLedger(), tol=1e-3, initial=1.5,
        )
        self.assertAlmostEqual(lam, 0.37, delta=1e-3)


class OptAttackTests(SimpleTestCase):
    """Test cases for BaselineService.opt_attack on a halfspace."""

    def setUp(self):
        self.x = _gray()
        normal = np.ones((4, 4, 1))
        self.distance = 0.2
        self.oracle = HalfspaceOracle(self.x, normal, self.distance)
        unit = normal / 4.0
        checker = np.indices((4, 4)).sum(axis=0) % 2
        ortho = np.where(checker, 0.25, -0.25)[:, :, np.newaxis]
        # start 45 degrees away from the optimal direction
        self.x_tar = Image(self.x.data + 0.4 * (unit + ortho))

    def test_converges_to_plane_distance(self):
        """Test that the final distance is within 5% of the point-to-plane distance."""
        cfg = OptAttackConfig(tol=1e-4, budget=20000, workers=1)
        result = BaselineService.opt_attack(self.x, self.x_tar, 1, self.oracle, cfg, QueryLedger())
        self.assertLessEqual(result.state.g_val, 1.05 * self.distance)
        self.assertGreaterEqual(result.state.g_val, self.distance - 1e-9)
        self.assertEqual(self.oracle.predict(result.adversarial), 1)

    def test_accepted_distances_decrease(self):
        """Test that g strictly decreases across accepted epochs."""
        cfg = OptAttackConfig(tol=1e-4, budget=3000, workers=1)
        result = BaselineService.opt_attack(self.x, self.x_tar, 1, self.oracle, cfg, QueryLedger())
        history = list(result.history)
        self.assertTrue(all(b < a for a, b in zip(history, history[1:])))

    def test_zero_budget_returns_initial_boundary(self):
        """Test that budget 0 returns the boundary point along x_tar - x."""
        cfg = OptAttackConfig(tol=1e-4, budget=0)
        result = BaselineService.opt_attack(self.x, self.x_tar, 1, self.oracle, cfg, QueryLedger())
        self.assertEqual(result.epochs, 0)
        # 45 degrees off the normal: distance / cos 45
        self.assertAlmostEqual(result.state.g_val, self.distance * np.sqrt(2), delta=1e-4)

    def test_support_projection(self):
        """Test that the attack stays on the support."""
        support = np.zeros((4, 4), dtype=bool)
        support[:, :2] = True
        cfg = OptAttackConfig(tol=1e-3, budget=1000, workers=1)
        result = BaselineService.opt_attack(
            self.x, self.x_tar, 1, self.oracle, cfg, QueryLedger(), support=support,
        )
        self.assertFalse(result.state.phi[~support].any())

    def test_empty_direction_fails(self):
        """Test that x_tar = x gives no initial direction."""
        with self.assertRaises(InitializationFailureError):
            BaselineService.opt_attack(self.x, self.x, 1, self.oracle, OptAttackConfig(), QueryLedger())


class WrappedOracleTests(SimpleTestCase):
    """Test cases for the survivability-thresholded wrapper."""

    def setUp(self):
        self.obj = np.ones((4, 4), dtype=bool)

    def test_inner_queries_per_call(self):
        """Test that one outer query burns exactly n inner queries."""
        wrapped = WrappedOracle(ConstantOracle(3), IDENTITY, 7, 0.5, self.obj)
        ledger = QueryLedger()
        label = OracleService.query(wrapped, _gray(), ledger, 'outer')
        self.assertEqual(label, 3)
        self.assertEqual(ledger.per_phase, {'wrapped': 7})
        self.assertEqual(ledger.outer, {'outer': 1})

    def test_threshold(self):
        """Test that insufficient survivability maps to the sentinel label."""
        inner = CappedOracle(y_adv=1, other=0, hits=11, period=20)
        passing = WrappedOracle(inner, IDENTITY, 20, 0.55, self.obj)
        self.assertEqual(passing.predict(_gray()), 1)
        failing = passing.rewrapped(0.6)
        self.assertEqual(failing.predict(_gray()), UNSURVIVABLE_LABEL)

    def test_target_wins_against_larger_label(self):
        """Test that the target label passes on its own share when another label has more votes."""
        inner = CappedOracle(y_adv=7, other=3, hits=9, period=20)
        wrapped = WrappedOracle(inner, IDENTITY, 20, 0.4, self.obj, target=7)
        self.assertEqual(wrapped.predict(_gray()), 7)
        untargeted = WrappedOracle(CappedOracle(y_adv=7, other=3, hits=9, period=20), IDENTITY, 20, 0.4, self.obj)
        self.assertEqual(untargeted.predict(_gray()), 3)
        self.assertEqual(wrapped.rewrapped(0.5).predict(_gray()), 3)
        self.assertEqual(wrapped.rewrapped(0.6).predict(_gray()), UNSURVIVABLE_LABEL)

    def test_deterministic(self):
        """Test that the wrapper answers identically for identical input."""
        dist = TransformDistribution.preset('gtsrb')
        obj = np.zeros((32, 32), dtype=bool)
        obj[4:28, 4:28] = True
        wrapped = WrappedOracle(OracleService.builtin(), dist, 10, 0.5, obj, seed=3)
        img = Image.constant(32, 32, 0.5, channels=3)
        self.assertEqual(wrapped.predict(img), wrapped.predict(img))


class ThresholdScheduleTests(SimpleTestCase):
    """Test cases for BaselineService.threshold_schedule_run."""

    def setUp(self):
        self.x = _gray(0.4)
        self.x_tar = _gray(0.6)
        self.cfg = OptAttackConfig(n=20, budget=50000, workers=1)

    def test_climbs_to_full_survivability(self):
        """Test that an always-adversarial oracle climbs to 100 and completes."""
        report = BaselineService.threshold_schedule_run(
            self.x, self.x_tar, 1, _full_mask(), IDENTITY, 40, self.cfg, ConstantOracle(1), QueryLedger(),
        )
        self.assertEqual(report.status, COMPLETE)
        self.assertEqual(report.thresholds(), list(range(40, 101, 5)))
        self.assertEqual(report.final_threshold, 100)
        self.assertEqual(report.final_robustness, 1.0)

    def test_schedule_epochs(self):
        """Test that thresholds rise by 5 every 5 epochs."""
        report = BaselineService.threshold_schedule_run(
            self.x, self.x_tar, 1, _full_mask(), IDENTITY, 40, self.cfg, ConstantOracle(1), QueryLedger(),
        )
        self.assertEqual(
            [(level['threshold'], level['first_epoch']) for level in report.levels[:3]],
            [(40, 0), (45, 5), (50, 10)],
        )

    def test_capped_oracle_unreachable(self):
        """Test that a survivability ceiling at 55% stops the schedule at the 60% raise."""
        report = BaselineService.threshold_schedule_run(
            self.x, self.x_tar, 1, _full_mask(), IDENTITY, 40, self.cfg, CappedOracle(), QueryLedger(),
        )
        self.assertEqual(report.status, UNREACHABLE)
        self.assertEqual(report.failed_threshold, 60)
        self.assertEqual(report.thresholds(), [40, 45, 50, 55])
        self.assertEqual(report.final_robustness, 0.55)

    def test_minority_target_counts_as_adversarial(self):
        """Test that a 45% target share clears the 40% and 45% levels despite a 55% rival label."""
        report = BaselineService.threshold_schedule_run(
            self.x, self.x_tar, 1, _full_mask(), IDENTITY, 40, self.cfg,
            CappedOracle(y_adv=1, other=3, hits=9, period=20), QueryLedger(),
        )
        self.assertEqual(report.status, UNREACHABLE)
        self.assertEqual(report.thresholds(), [40, 45])
        self.assertEqual(report.failed_threshold, 50)
        self.assertEqual(report.final_robustness, 0.45)

    def test_unreachable_at_start(self):
        """Test that a start above the ceiling cannot initialize."""
        report = BaselineService.threshold_schedule_run(
            self.x, self.x_tar, 1, _full_mask(), IDENTITY, 80, self.cfg, CappedOracle(), QueryLedger(),
        )
        self.assertEqual(report.status, UNREACHABLE)
        self.assertEqual(report.levels, ())

    def test_invalid_start(self):
        """Test that a start outside 0..100 is rejected."""
        with self.assertRaises(ValueError):
            BaselineService.threshold_schedule_run(
                self.x, self.x_tar, 1, _full_mask(), IDENTITY, 120, self.cfg, ConstantOracle(1), QueryLedger(),
            )


class EfficiencyTableTests(SimpleTestCase):
    """Test cases for the efficiency comparison export."""

    def test_csv_and_json(self):
        """Test that rows land in both files with the four columns."""
        report = BaselineService.threshold_schedule_run(
            _gray(0.4), _gray(0.6), 1, _full_mask(), IDENTITY, 90,
            OptAttackConfig(n=5, workers=1), ConstantOracle(1), QueryLedger(),
        )
        rows = BaselineService.efficiency_rows(
            [report], {'algorithm': 'patch-attack', 'initial_threshold': None,
                       'final_robustness': 0.9, 'queries': 1234},
        )
        with tempfile.TemporaryDirectory() as tmp:
            BaselineService.write_efficiency_table(rows, tmp)
            with open(Path(tmp) / 'efficiency.csv', newline='') as f:
                table = list(csv.reader(f))
            data = json.loads((Path(tmp) / 'efficiency.json').read_text())
        self.assertEqual(tuple(table[0]), EFFICIENCY_COLUMNS)
        self.assertEqual(len(table), 3)
        self.assertEqual(data[1]['queries'], 1234)
        self.assertEqual(data[0]['initial_threshold'], 90)
