"""
Management Command: attack

Mask generation followed by boosting on one attack instance, with
held-out evaluation and a full run directory.
"""

from pipeline.cli import AttackCommand
from pipeline.domain import PARTIAL
from pipeline.services import PipelineService, RunRegistryService


class Command(AttackCommand):
    help = 'Runs mask generation and boosting against the configured oracle'
    name = 'attack'

    def add_command_arguments(self, parser):
        parser.add_argument('--resume', action='store_true', help='Resume boosting from checkpoints in --out')

    def run(self, cfg, oracle, out_dir, options):
        report = PipelineService.run_attack(
            self.instance(cfg), cfg.maskgen, cfg.boost, cfg.transforms, oracle,
            seed=cfg.seed, ledger=self.ledger(cfg), out_dir=out_dir,
            config_hash=cfg.config_hash(), heldout_n=cfg.heldout_n, resume=options.get('resume', False),
        )
        RunRegistryService.record(self.name, report, run_dir=out_dir, seed=cfg.seed)
        self.stdout.write(
            f'Held-out survivability {report.heldout:.3f}, '
            f'mask ratio {report.mask_to_object_ratio:.3f}, {report.ledger["total"]} queries'
        )
        return 2 if report.status == PARTIAL else 0
