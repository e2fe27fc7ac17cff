"""
Management Command: heatmap

Per-patch survivability heatmap only, written as heatmap.png and
heatmap.json.
"""

from maskgen.domain import TARGET, VICTIM
from pipeline.cli import AttackCommand
from pipeline.domain import COMPLETE
from pipeline.services import PipelineService, RunRegistryService


class Command(AttackCommand):
    help = 'Estimates the per-patch survivability heatmap'
    name = 'heatmap'

    def add_command_arguments(self, parser):
        parser.add_argument(
            '--relative-to', choices=[TARGET, VICTIM], default=TARGET,
            help='Remove one patch from the full target mask, or add one patch to the victim',
        )

    def run(self, cfg, oracle, out_dir, options):
        ledger = self.ledger(cfg)
        heatmap, grid = PipelineService.run_heatmap(
            self.instance(cfg), cfg.maskgen, cfg.transforms, oracle, seed=cfg.seed,
            relative_to=options.get('relative_to') or TARGET, out_dir=out_dir, ledger=ledger,
        )
        RunRegistryService.record(
            self.name, run_dir=out_dir, seed=cfg.seed, config_hash=cfg.config_hash(),
            status=COMPLETE, queries=ledger.total,
        )
        self.stdout.write(f'{len(grid)} patches, baseline survivability {heatmap.baseline:.3f}')
        return 0
