"""
Management Command: iterative

Alternating mask generation and boosting over a schedule of rounds,
e.g. ``--rounds 8,4,border:2``.
"""

from pipeline.cli import AttackCommand, parse_schedule
from pipeline.domain import DEFAULT_SCHEDULE, PARTIAL
from pipeline.services import PipelineService, RunRegistryService


class Command(AttackCommand):
    help = 'Runs an iterative mask/boost schedule'
    name = 'iterative'

    def add_command_arguments(self, parser):
        parser.add_argument('--rounds', help='Comma-separated rounds: patch sizes or border[:WIDTH]')
        parser.add_argument('--resume', action='store_true', help='Resume boosting from checkpoints in --out')

    def run(self, cfg, oracle, out_dir, options):
        rounds = (
            parse_schedule(options.get('rounds'))
            or parse_schedule(cfg.run['schedule'])
            or list(DEFAULT_SCHEDULE)
        )
        report = PipelineService.run_iterative(
            self.instance(cfg), rounds, cfg.maskgen, cfg.boost, cfg.transforms, oracle,
            seed=cfg.seed, ledger=self.ledger(cfg), out_dir=out_dir,
            config_hash=cfg.config_hash(), heldout_n=cfg.heldout_n, resume=options.get('resume', False),
        )
        RunRegistryService.record(self.name, report, run_dir=out_dir, seed=cfg.seed)
        self.stdout.write(
            f'{len(report.rounds)} round(s): held-out survivability {report.heldout:.3f}, '
            f'mask ratio {report.mask_to_object_ratio:.3f}'
        )
        return 2 if report.status == PARTIAL else 0
