"""
Management Command: sweep

Independent attacks across boost budgets, one subdirectory per budget,
plus sweep.csv, sweep.json and sweep.png.
"""

from pipeline.cli import AttackCommand, parse_list
from pipeline.domain import COMPLETE, PARTIAL
from pipeline.services import DEFAULT_BUDGETS, PipelineService, RunRegistryService


class Command(AttackCommand):
    help = 'Sweeps the boost query budget'
    name = 'sweep'

    def add_command_arguments(self, parser):
        parser.add_argument('--budgets', help='Comma-separated ascending boost budgets')
        parser.add_argument('--processes', type=int, default=1, help='Budgets run in parallel processes')

    def run(self, cfg, oracle, out_dir, options):
        budgets = parse_list(options.get('budgets')) or parse_list(cfg.run['budgets']) or list(DEFAULT_BUDGETS)
        rows, reports = PipelineService.run_budget_sweep(
            self.instance(cfg), budgets, cfg.maskgen, cfg.boost, cfg.transforms, oracle,
            seed=cfg.seed, out_dir=out_dir, heldout_n=cfg.heldout_n, config_hash=cfg.config_hash(),
            processes=options.get('processes') or 1, oracle_spec=cfg.run['oracle'],
        )
        partial = any(r.status == PARTIAL for r in reports)
        RunRegistryService.record(
            self.name, run_dir=out_dir, seed=cfg.seed, config_hash=cfg.config_hash(),
            status=PARTIAL if partial else COMPLETE, queries=sum(row['queries'] for row in rows),
        )
        for row in rows:
            self.stdout.write(f'budget {row["budget"]}: held-out {row["heldout_survivability"]:.3f}')
        return 2 if partial else 0
