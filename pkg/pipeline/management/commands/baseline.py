"""
Management Command: baseline

Thresholded-wrapper baseline driven by the threshold schedule from each
start threshold, with the efficiency comparison table.
"""

from dataclasses import replace

from baseline.domain import OUT_OF_BUDGET
from imaging import files
from imaging.domain import Mask
from pipeline.cli import AttackCommand, parse_list
from pipeline.reports import load_report
from pipeline.services import PipelineService, RunRegistryService

DEFAULT_START_THRESHOLDS = (40, 50, 60, 70, 80, 90, 100)


class Command(AttackCommand):
    help = 'Runs the threshold-schedule baseline'
    name = 'baseline'

    def add_command_arguments(self, parser):
        parser.add_argument('--thresholds', help='Comma-separated start thresholds in percent')
        parser.add_argument('--mask', help='Mask PNG on the perturbation plane (default: whole object)')
        parser.add_argument('--attack-report', help='Run directory of an attack to add to the table')

    def run(self, cfg, oracle, out_dir, options):
        instance = self.instance(cfg)
        starts = (
            parse_list(options.get('thresholds'))
            or parse_list(cfg.run['start_thresholds'])
            or list(DEFAULT_START_THRESHOLDS)
        )
        mask = None
        if options.get('mask'):
            mask = Mask(files.load_grid(options['mask']), instance.plane_object())
        attack_row = None
        if options.get('attack_report'):
            report = load_report(options['attack_report'])
            attack_row = {
                'algorithm': 'mask-and-boost',
                'initial_threshold': None,
                'final_robustness': report.heldout,
                'queries': report.ledger['total'],
            }

        rows, reports = PipelineService.run_baseline(
            instance, starts, replace(cfg.baseline, seed=cfg.seed), cfg.transforms, oracle,
            mask=mask, attack_row=attack_row, out_dir=out_dir,
        )
        for r in reports:
            RunRegistryService.record(
                self.name, run_dir=out_dir, seed=cfg.seed, config_hash=cfg.config_hash(),
                status=r.status, queries=r.queries,
            )
            self.stdout.write(
                f'start {r.start_threshold}%: {r.status} at {r.final_threshold}%, '
                f'robustness {r.final_robustness:.3f}, {r.queries} queries'
            )
        return 2 if any(r.status == OUT_OF_BUDGET for r in reports) else 0
