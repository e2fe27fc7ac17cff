"""
Management Command: ablate

Mask generation in full, coarse-only and fine-only modes on the same
instance, written as ablation.csv and ablation.json.
"""

from maskgen.domain import MODES
from pipeline.cli import AttackCommand, parse_list
from pipeline.domain import COMPLETE
from pipeline.services import PipelineService, RunRegistryService


class Command(AttackCommand):
    help = 'Compares mask reduction strategies'
    name = 'ablate'

    def add_command_arguments(self, parser):
        parser.add_argument('--modes', help=f'Comma-separated subset of {", ".join(MODES)}')

    def run(self, cfg, oracle, out_dir, options):
        modes = parse_list(options.get('modes'), cast=str) or parse_list(cfg.run['modes'], cast=str) or list(MODES)
        rows, _ = PipelineService.run_ablation(
            self.instance(cfg), cfg.maskgen, cfg.transforms, oracle, seed=cfg.seed,
            modes=modes, out_dir=out_dir,
        )
        RunRegistryService.record(
            self.name, run_dir=out_dir, seed=cfg.seed, config_hash=cfg.config_hash(),
            status=COMPLETE, queries=sum(row['queries'] for row in rows),
        )
        for row in rows:
            self.stdout.write(
                f'{row["mode"]}: {row["pixel_count"]} px, S={row["survivability"]:.3f}, {row["queries"]} queries'
            )
        return 0
