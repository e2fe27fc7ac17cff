"""
Pipeline App - Tests

Test cases for run configuration, whole-attack orchestration, sweeps,
ablations, persistence, the run registry and the management commands.
"""

import math
import os
import shutil
import tempfile
import unittest
from io import StringIO
from pathlib import Path

import numpy as np
from django.conf import settings
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, TestCase

from baseline.domain import OptAttackConfig
from boost.domain import BoostConfig
from core.exceptions import ConfigurationError, InvalidArgumentError
from imaging.domain import Image
from imaging.services import ImagingService
from maskgen.domain import COARSE_ONLY, FINE_ONLY, FULL, MaskGenConfig
from oracle.domain import QueryLedger
from oracle.testing import CRASH, BlockOracle, ConstantOracle, stub_command
from oracle.services import OracleService
from transforms.domain import TransformDistribution
from . import reports
from .config import load_config, parse_config
from .domain import BORDER, COMPLETE, NO_BOOST_GAIN, PARTIAL, AttackInstance, Round
from .fixtures import desk_instance
from .models import AttackRun
from .services import DEFAULT_BUDGETS, PipelineService, RunRegistryService, border_region, derive_seeds

Y_ADV = 1
IDENTITY = TransformDistribution.preset('identity')
NO_BOOST = BoostConfig(n=2, budget=0)


def _instance(size=8):
    """Victim 0.2 and target 0.8 over the whole frame."""
    return AttackInstance(
        victim=Image.constant(size, size, 0.2, channels=3),
        target_example=Image.constant(size, size, 0.8, channels=3),
        target_label=Y_ADV,
        object=np.ones((size, size), dtype=bool),
    )


def _sufficient_pair(size=8):
    """Patches 0 and 3 of the 4x4 grid: the only pixels the block oracle checks."""
    grid = ImagingService.build_patch_grid(np.ones((size, size), dtype=bool), 4, 4)
    return grid[0].pixels | grid[3].pixels


class TempDirMixin:
    def setUp(self):
        super().setUp()
        self.tmp = Path(tempfile.mkdtemp())
        self.addCleanup(shutil.rmtree, self.tmp, ignore_errors=True)


class RunConfigTests(TempDirMixin, SimpleTestCase):
    """Test cases for YAML run configuration."""

    def test_defaults_hash_is_stable(self):
        """Test that the default configuration hashes identically twice."""
        self.assertEqual(parse_config({}).config_hash(), parse_config(None).config_hash())
        self.assertEqual(len(parse_config({}).config_hash()), 64)

    def test_any_change_changes_the_hash(self):
        """Test that one differing value gives a different hash."""
        base = parse_config({})
        changed = parse_config({'boost': {'q': 11}})
        self.assertNotEqual(base.config_hash(), changed.config_hash())

    def test_unknown_keys_rejected(self):
        """Test unknown sections and keys."""
        for data in ({'extra': {}}, {'boost': {'learning_rate': 1}}, {'run': {'sed': 1}},
                     {'transforms': {'rotation': 5}}):
            with self.assertRaises(ConfigurationError):
                parse_config(data)

    def test_invalid_values_are_configuration_errors(self):
        """Test that module validation surfaces as a configuration error."""
        with self.assertRaises(ConfigurationError):
            parse_config({'maskgen': {'s_lo': 0.95, 's_hi': 0.9}})
        with self.assertRaises(ConfigurationError):
            parse_config({'transforms': {'preset': 'cifar'}})

    def test_overrides(self):
        """Test that --budget reaches boost and baseline and --seed the run section."""
        cfg = parse_config({}).with_overrides(seed=9, budget=1234, oracle='http://h/classify')
        self.assertEqual(cfg.seed, 9)
        self.assertEqual(cfg.boost.budget, 1234)
        self.assertEqual(cfg.baseline.budget, 1234)
        self.assertEqual(cfg.run['oracle'], 'http://h/classify')

    def test_settings_fill_unset_run_values(self):
        """Test that seed and held-out n fall back to settings."""
        cfg = parse_config({})
        self.assertEqual(cfg.seed, settings.PATCH_ATTACK_DEFAULT_SEED)
        self.assertEqual(cfg.heldout_n, settings.PATCH_ATTACK_HELDOUT_TRANSFORMS)

    def test_load_yaml(self):
        """Test loading a YAML document from disk."""
        path = self.tmp / 'run.yaml'
        path.write_text('transforms:\n  preset: identity\nboost:\n  budget: 100\nrun:\n  seed: 4\n')
        cfg = load_config(path)
        self.assertEqual(cfg.preset, 'identity')
        self.assertEqual(cfg.boost.budget, 100)
        self.assertEqual(cfg.seed, 4)

    def test_missing_and_malformed_files(self):
        """Test that unreadable configurations are configuration errors."""
        with self.assertRaises(ConfigurationError):
            load_config(self.tmp / 'absent.yaml')
        path = self.tmp / 'bad.yaml'
        path.write_text('boost: [1, 2\n')
        with self.assertRaises(ConfigurationError):
            load_config(path)

    def test_shipped_configs_load(self):
        """Test that every configuration under configs/ parses."""
        paths = sorted((Path(settings.BASE_DIR) / 'configs').glob('*.yaml'))
        self.assertTrue(paths)
        for path in paths:
            load_config(path)


class HelperTests(SimpleTestCase):
    """Test cases for border regions, rounds and seed derivation."""

    def test_border_region_of_full_frame(self):
        """Test that width 1 on a 6x6 frame leaves the 20-pixel ring."""
        ring = border_region(np.ones((6, 6), dtype=bool), 1)
        self.assertEqual(int(ring.sum()), 20)
        self.assertFalse(ring[1:5, 1:5].any())

    def test_border_region_stays_inside_object(self):
        """Test that the border never leaves the object and covers thin objects whole."""
        obj = np.zeros((10, 10), dtype=bool)
        obj[2:8, 3:5] = True
        ring = border_region(obj, 3)
        self.assertFalse(np.any(ring & ~obj))
        np.testing.assert_array_equal(ring, obj)

    def test_round_parsing(self):
        """Test patch-size and border round syntax."""
        self.assertEqual(Round.parse('8'), Round(8))
        self.assertEqual(Round.parse('border'), Round(policy=BORDER, border_width=2))
        self.assertEqual(Round.parse('border:5').border_width, 5)
        with self.assertRaises(InvalidArgumentError):
            Round.parse('huge')

    def test_derived_seeds(self):
        """Test that seeds are reproducible and differ across rounds."""
        self.assertEqual(derive_seeds(3, 1), derive_seeds(3, 1))
        self.assertNotEqual(derive_seeds(3, 0)['boost'], derive_seeds(3, 1)['boost'])
        self.assertNotEqual(derive_seeds(3, 0)['maskgen'], derive_seeds(4, 0)['maskgen'])


class RunAttackTests(TempDirMixin, SimpleTestCase):
    """Test cases for mask generation followed by boosting."""

    def setUp(self):
        super().setUp()
        self.instance = _instance()
        self.sufficient = _sufficient_pair()
        self.mcfg = MaskGenConfig(n=2, patch_size=4, stride=4, workers=1)

    def _attack(self, bcfg=NO_BOOST, **kwargs):
        oracle = BlockOracle(self.sufficient, self.instance.target_example, Y_ADV)
        return PipelineService.run_attack(
            self.instance, self.mcfg, bcfg, IDENTITY, oracle, seed=5, heldout_n=5, **kwargs,
        )

    def test_without_boost_budget_the_post_mask_image_is_the_result(self):
        """Test that a zero boost budget returns x + M * (x_tar - x) on the generated mask."""
        report = self._attack()
        np.testing.assert_array_equal(report.mask.bits, self.sufficient)
        expected = np.where(self.sufficient[:, :, np.newaxis], 0.6, 0.0) * np.ones((1, 1, 3))
        np.testing.assert_allclose(report.perturbation.delta, expected, atol=1e-12)
        self.assertEqual(report.status, COMPLETE)
        self.assertEqual(report.boost['stopped'], 'no-budget')
        self.assertEqual(report.heldout, 1.0)
        self.assertEqual(report.survivability['post_mask_heldout'], 1.0)
        self.assertIn(NO_BOOST_GAIN, report.flags)
        self.assertEqual(report.mask_to_object_ratio, 0.5)

    def test_ledgers_are_separate_and_exact(self):
        """Test attack and held-out accounting."""
        report = self._attack()
        self.assertEqual(report.ledger['total'], sum(report.ledger['per_phase'].values()))
        self.assertNotIn('boost', report.ledger['per_phase'])
        self.assertEqual(report.evaluation['total'], 10)
        self.assertEqual(report.evaluation['per_phase'], {'heldout': 10})

    def test_boost_queries_billed(self):
        """Test that a boost budget of two iterations is spent and reported."""
        report = self._attack(BoostConfig(n=2, q=1, budget=10, beta=0.1, eta=0.1))
        self.assertEqual(report.boost['iterations'], 2)
        self.assertEqual(report.ledger['per_phase']['boost'], 10)
        self.assertEqual(len(report.boost['history']), 2)

    def test_ledger_cap_gives_partial_report(self):
        """Test that exhausting the run's hard cap yields a partial report."""
        report = self._attack(ledger=QueryLedger(3))
        self.assertEqual(report.status, PARTIAL)
        self.assertEqual(report.ledger['total'], 3)
        self.assertEqual(report.mask.size(), 0)
        self.assertEqual(report.rounds[0]['stopped'], 'ledger-budget')

    def test_run_directory(self):
        """Test the files of one run directory and the report round trip."""
        report = self._attack(out_dir=self.tmp, config_hash='abc')
        for name in ('report.json', 'state.npz', 'adversarial.png', 'post_mask.png', 'mask.png',
                     'heatmap.png', 'heatmap.json', 'lipschitz.png', 'trace.ndjson', 'transforms.ndjson'):
            self.assertTrue((self.tmp / name).is_file(), name)
        loaded = reports.load_report(self.tmp)
        self.assertEqual(reports.dumps(loaded.to_dict()), reports.dumps(report.to_dict()))
        self.assertEqual(loaded.config_hash, 'abc')
        stages = {record['stage'] for record in reports.read_trace(self.tmp / 'trace.ndjson')}
        self.assertTrue({'heatmap', 'coarse', 'fine', 'maskgen', 'ledger'} <= stages)

    def test_statistics_recomputable_from_persisted_state(self):
        """Test that ratio and perturbation norm follow from state.npz alone."""
        report = self._attack(out_dir=self.tmp)
        with np.load(self.tmp / 'state.npz') as arrays:
            self.assertEqual(arrays['mask'].sum() / arrays['object'].sum(), report.mask_to_object_ratio)
            self.assertAlmostEqual(float(np.linalg.norm(arrays['perturbation'])), report.perturbation.norm())

    def test_deterministic(self):
        """Test that the same seed gives identical reports and traces."""
        bcfg = BoostConfig(n=2, q=1, budget=10, beta=0.1, eta=0.1)
        first, second = self.tmp / 'a', self.tmp / 'b'
        a = self._attack(bcfg, out_dir=first)
        b = self._attack(bcfg, out_dir=second)
        strip = lambda r: reports.dumps({**r.to_dict(), 'wall_clock': None})  # noqa: E731
        self.assertEqual(strip(a), strip(b))
        self.assertEqual((first / 'trace.ndjson').read_bytes(), (second / 'trace.ndjson').read_bytes())


class RunIterativeTests(SimpleTestCase):
    """Test cases for alternating schedules."""

    def test_single_round_equals_run_attack(self):
        """Test that one generate round is the plain attack."""
        instance, sufficient = _instance(), _sufficient_pair()
        mcfg = MaskGenConfig(n=2, patch_size=4, stride=4, workers=1)
        oracle = BlockOracle(sufficient, instance.target_example, Y_ADV)
        attack = PipelineService.run_attack(instance, mcfg, NO_BOOST, IDENTITY, oracle, seed=1, heldout_n=3)
        iterative = PipelineService.run_iterative(
            instance, [Round(4)], mcfg, NO_BOOST, IDENTITY, oracle, seed=1, heldout_n=3,
        )
        np.testing.assert_array_equal(attack.mask.bits, iterative.mask.bits)
        self.assertEqual(attack.ledger, iterative.ledger)

    def test_pinned_round_skips_mask_generation(self):
        """Test that a border round spends no mask-generation queries."""
        report = PipelineService.run_iterative(
            _instance(), [Round(policy=BORDER, border_width=2)], MaskGenConfig(n=2), NO_BOOST,
            IDENTITY, ConstantOracle(Y_ADV), heldout_n=2,
        )
        self.assertEqual(report.ledger['total'], 0)
        self.assertEqual(report.mask.size(), 64 - 16)
        self.assertIsNone(report.rounds[0]['mask_estimate'])

    def test_border_schedule_stays_on_the_border(self):
        """Test that generate rounds then a border round never leave the decisive ring."""
        instance = _instance(16)
        ring = border_region(instance.object, 4)
        oracle = BlockOracle(ring, instance.target_example, Y_ADV)
        rounds = [Round(4), Round(2), Round(policy=BORDER, border_width=4)]
        report = PipelineService.run_iterative(
            instance, rounds, MaskGenConfig(n=1, workers=1), NO_BOOST, IDENTITY, oracle, heldout_n=2,
        )
        self.assertEqual(len(report.rounds), 3)
        self.assertFalse(np.any(report.mask.bits & ~ring))
        self.assertEqual(report.rounds[2]['policy'], BORDER)
        self.assertEqual(report.rounds[2]['mask_pixels'], int(ring.sum()))
        self.assertEqual(report.heldout, 1.0)

    def test_empty_schedule_rejected(self):
        """Test that at least one round is required."""
        with self.assertRaises(InvalidArgumentError):
            PipelineService.run_iterative(_instance(), [], MaskGenConfig(), NO_BOOST, IDENTITY, ConstantOracle(1))


class BudgetSweepTests(TempDirMixin, SimpleTestCase):
    """Test cases for the boost budget sweep."""

    def setUp(self):
        super().setUp()
        self.instance = _instance()
        self.mcfg = MaskGenConfig(n=2, patch_size=4, stride=4, workers=1)
        self.bcfg = BoostConfig(n=2, q=1, beta=0.1, eta=0.1)
        self.oracle = BlockOracle(_sufficient_pair(), self.instance.target_example, Y_ADV)

    def test_rows_and_prefix_histories(self):
        """Test one row per budget and that smaller budgets replay a prefix of larger ones."""
        rows, results = PipelineService.run_budget_sweep(
            self.instance, [0, 10, 22], self.mcfg, self.bcfg, IDENTITY, self.oracle,
            seed=2, out_dir=self.tmp, heldout_n=2,
        )
        self.assertEqual([row['budget'] for row in rows], [0, 10, 22])
        self.assertEqual([row['iterations'] for row in rows], [0, 2, 5])
        short, long = results[1].boost['history'], results[2].boost['history']
        self.assertEqual(long[:len(short)], short)
        for name in ('sweep.csv', 'sweep.json', 'sweep.png', 'budget-10/report.json'):
            self.assertTrue((self.tmp / name).is_file(), name)
        header = (self.tmp / 'sweep.csv').read_text().splitlines()[0]
        self.assertEqual(header, 'budget,heldout_survivability,queries,iterations')

    def test_unsorted_budgets_rejected(self):
        """Test that budgets must ascend."""
        with self.assertRaises(InvalidArgumentError):
            PipelineService.run_budget_sweep(self.instance, [10, 0], self.mcfg, self.bcfg, IDENTITY, self.oracle)

    def test_parallel_sweep_needs_an_oracle_spec(self):
        """Test that process-parallel sweeps rebuild their oracle from a spec."""
        with self.assertRaises(InvalidArgumentError):
            PipelineService.run_budget_sweep(
                self.instance, [0], self.mcfg, self.bcfg, IDENTITY, self.oracle, processes=2,
            )

    def test_default_budgets(self):
        """Test the default sweep of eight budgets from 25k to 200k."""
        self.assertEqual(len(DEFAULT_BUDGETS), 8)
        self.assertEqual((DEFAULT_BUDGETS[0], DEFAULT_BUDGETS[-1]), (25000, 200000))


class AblationTests(TempDirMixin, SimpleTestCase):
    """Test cases for the reduction-strategy ablation."""

    def test_redundant_patch_oracle(self):
        """Test that fine-only pays for every redundant patch while coarse-only stops at the pivot."""
        instance = _instance()
        grid = ImagingService.build_patch_grid(instance.object, 2, 2)
        decisive = grid[0].pixels | grid[5].pixels | grid[10].pixels
        oracle = BlockOracle(decisive, instance.target_example, Y_ADV)
        rows, results = PipelineService.run_ablation(
            instance, MaskGenConfig(n=2, patch_size=2, stride=2, workers=1), IDENTITY, oracle,
            out_dir=self.tmp,
        )
        self.assertEqual([row['mode'] for row in rows], [FULL, COARSE_ONLY, FINE_ONLY])
        by_mode = {row['mode']: row for row in rows}
        for mode, (result, ledger) in results.items():
            self.assertEqual(by_mode[mode]['queries'], ledger.total)
            self.assertEqual(by_mode[mode]['survivability'], 1.0)
            np.testing.assert_array_equal(result.mask.bits, decisive)
        # heatmap 17n, coarse 4n, fine 3n (full) or 16n (fine-only)
        self.assertEqual(by_mode[FULL]['queries'], 24 * 2)
        self.assertEqual(by_mode[COARSE_ONLY]['queries'], 21 * 2)
        self.assertEqual(by_mode[FINE_ONLY]['queries'], 33 * 2)
        self.assertGreater(by_mode[FINE_ONLY]['queries'], by_mode[FULL]['queries'])
        self.assertGreaterEqual(by_mode[COARSE_ONLY]['pixel_count'], by_mode[FULL]['pixel_count'])
        self.assertNotIn('coarse', results[FINE_ONLY][1].per_phase)
        self.assertNotIn('fine', results[COARSE_ONLY][1].per_phase)
        header = (self.tmp / 'ablation.csv').read_text().splitlines()[0]
        self.assertEqual(header, 'mode,survivability,pixel_count,queries,runtime_seconds')
        self.assertTrue((self.tmp / 'ablation.json').is_file())


class BaselineDriverTests(TempDirMixin, SimpleTestCase):
    """Test cases for the baseline driver."""

    def test_schedule_rows_and_table(self):
        """Test one efficiency row per start threshold plus the attack's row."""
        rows, schedule = PipelineService.run_baseline(
            _instance(4), [90], OptAttackConfig(n=5, workers=1), IDENTITY, ConstantOracle(Y_ADV),
            attack_row={'algorithm': 'mask-and-boost', 'initial_threshold': None,
                        'final_robustness': 0.9, 'queries': 100},
            out_dir=self.tmp,
        )
        self.assertEqual(len(rows), 2)
        self.assertEqual(rows[0]['initial_threshold'], 90)
        self.assertEqual(rows[1]['algorithm'], 'mask-and-boost')
        self.assertEqual(schedule[0].final_robustness, 1.0)
        self.assertTrue((self.tmp / 'efficiency.csv').is_file())
        self.assertTrue((self.tmp / 'schedule.ndjson').is_file())


class RunRegistryTests(TestCase):
    """Test cases for the run registry."""

    def test_record_from_report(self):
        """Test that a report fills status, queries and held-out figures."""
        instance = _instance()
        report = PipelineService.run_attack(
            instance, MaskGenConfig(n=2, patch_size=4, stride=4, workers=1), NO_BOOST, IDENTITY,
            BlockOracle(_sufficient_pair(), instance.target_example, Y_ADV), heldout_n=2, config_hash='f' * 64,
        )
        run = RunRegistryService.record('attack', report, run_dir='/tmp/run', seed=3)
        self.assertEqual(run.status, COMPLETE)
        self.assertEqual(run.total_queries, report.ledger['total'])
        self.assertEqual(run.heldout_survivability, 1.0)
        self.assertEqual(run.mask_ratio, 0.5)
        self.assertEqual(run.config_hash, 'f' * 64)
        self.assertEqual(RunRegistryService.recent(), [run])

    def test_record_without_report(self):
        """Test registry rows for commands that do not attack."""
        run = RunRegistryService.record('heatmap', status=COMPLETE, queries=17)
        self.assertIsNone(run.heldout_survivability)
        self.assertEqual(str(run), 'heatmap complete (17 queries)')


class CommandTests(TempDirMixin, TestCase):
    """Test cases for the management commands and their exit codes."""

    def setUp(self):
        super().setUp()
        self.config = self.tmp / 'small.yaml'
        self.config.write_text(
            'transforms:\n  preset: identity\n'
            'maskgen:\n  n: 2\n  patch_size: 8\n  workers: 1\n'
            'boost:\n  n: 2\n  q: 1\n  budget: 8\n'
            'run:\n  heldout_n: 3\n'
        )

    def _call(self, name, *args):
        call_command(name, '--config', str(self.config), '--out', str(self.tmp / name), *args, stdout=StringIO())

    def test_attack_writes_report_and_registry_row(self):
        """Test a successful attack run on the desk instance."""
        self._call('attack', '--seed', '3')
        report = reports.load_report(self.tmp / 'attack')
        self.assertEqual(report.status, COMPLETE)
        run = AttackRun.objects.get()
        self.assertEqual((run.command, run.seed), ('attack', 3))
        self.assertEqual(run.config_hash, report.config_hash)

    def test_ablate_and_heatmap(self):
        """Test the ablation and heatmap commands."""
        self._call('ablate', '--modes', 'full,fine-only')
        self._call('heatmap')
        self.assertTrue((self.tmp / 'ablate' / 'ablation.csv').is_file())
        self.assertTrue((self.tmp / 'heatmap' / 'heatmap.json').is_file())
        self.assertEqual(AttackRun.objects.count(), 2)

    def test_partial_run_exits_2(self):
        """Test that a hard query cap gives exit code 2 with a partial report on disk."""
        self.config.write_text(self.config.read_text() + '  max_queries: 5\n')
        with self.assertRaises(CommandError) as cm:
            self._call('attack')
        self.assertEqual(cm.exception.returncode, 2)
        self.assertEqual(reports.load_report(self.tmp / 'attack').status, PARTIAL)

    def test_oracle_failure_exits_4(self):
        """Test that a crashing process oracle gives exit code 4."""
        with self.assertRaises(CommandError) as cm:
            self._call('attack', '--oracle', 'proc:' + stub_command(CRASH))
        self.assertEqual(cm.exception.returncode, 4)

    def test_configuration_error_exits_1(self):
        """Test that a missing configuration is a plain failure."""
        self.config = self.tmp / 'absent.yaml'
        with self.assertRaises(CommandError) as cm:
            self._call('attack')
        self.assertEqual(cm.exception.returncode, 1)


class DeskInstanceTests(TempDirMixin, SimpleTestCase):
    """Test cases on the built-in desk instance."""

    def test_structure_at_reduced_budget(self):
        """Test report invariants with GTSRB transforms at a small budget."""
        instance = desk_instance()
        report = PipelineService.run_attack(
            instance, MaskGenConfig(n=4, patch_size=8, workers=1), BoostConfig(n=4, q=2, budget=48),
            TransformDistribution.preset('gtsrb'), OracleService.builtin(), seed=0, heldout_n=8,
        )
        self.assertEqual(report.status, COMPLETE)
        self.assertFalse(np.any(report.mask.bits & ~instance.plane_object()))
        self.assertTrue(0.0 <= report.mask_to_object_ratio <= 1.0)
        self.assertEqual(report.ledger['total'], sum(report.ledger['per_phase'].values()))
        self.assertEqual(report.evaluation['total'], 16)
        self.assertLessEqual(report.ledger['per_phase'].get('boost', 0), 48)
        self.assertTrue(math.isfinite(report.boost['lipschitz_max']))
        self.assertGreaterEqual(report.boost['lipschitz_max'], 0.0)

    @unittest.skipUnless(os.environ.get('PATCH_ATTACK_SLOW_TESTS'), 'set PATCH_ATTACK_SLOW_TESTS to run')
    def test_calibrated_desk_attack(self):
        """Test held-out survivability and mask size at full budget, twice for determinism."""
        cfg = load_config(Path(settings.BASE_DIR) / 'configs' / 'desk.yaml')
        runs = []
        for name in ('first', 'second'):
            runs.append(PipelineService.run_attack(
                desk_instance(), cfg.maskgen, cfg.boost, cfg.transforms, OracleService.builtin(),
                seed=cfg.seed, heldout_n=1000, out_dir=self.tmp / name, config_hash=cfg.config_hash(),
            ))
        report = runs[0]
        self.assertGreaterEqual(report.heldout, 0.80)
        self.assertLessEqual(report.mask_to_object_ratio, 0.30)
        self.assertTrue(math.isfinite(report.boost['lipschitz_max']))
        strip = lambda r: reports.dumps({**r.to_dict(), 'wall_clock': None})  # noqa: E731
        self.assertEqual(strip(runs[0]), strip(runs[1]))
