"""
Pipeline App - Command Base

Common flags, configuration loading, oracle lifetime and exit codes for
the attack management commands.

Exit codes: 0 success, 2 budget exhausted (partial results written),
3 initialization failure, 4 oracle IO failure, 1 anything else.
"""

import logging
from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from core.exceptions import BudgetExceededError, PatchAttackError
from oracle.domain import QueryLedger
from oracle.services import OracleService
from .config import load_config
from .domain import Round
from .fixtures import load_instance

logger = logging.getLogger('patch_attack')


def parse_list(text, cast=int):
    """'a,b,c' into a list; None stays None."""
    if text is None:
        return None
    if isinstance(text, (list, tuple)):
        return [cast(v) for v in text]
    return [cast(v) for v in str(text).split(',') if v.strip()]


def parse_schedule(value):
    if value is None:
        return None
    return [Round.parse(v) for v in parse_list(value, cast=str)]


class AttackCommand(BaseCommand):
    """
    Base for commands that run against an oracle.

    Subclasses implement ``run(cfg, oracle, out_dir, options)`` and
    return an exit code (0 or 2).
    """

    name = None

    def add_arguments(self, parser):
        parser.add_argument('--config', help='YAML run configuration')
        parser.add_argument('--seed', type=int, help='Master seed (overrides run.seed)')
        parser.add_argument('--budget', type=int, help='Boost query budget (and baseline descent budget)')
        parser.add_argument('--oracle', help='builtin, proc:COMMAND or http:URL')
        parser.add_argument('--out', help='Run directory (default under PATCH_ATTACK_RESULTS_DIR)')
        parser.add_argument('--cache', action='store_true', help='Memoize oracle answers by image digest')
        self.add_command_arguments(parser)

    def add_command_arguments(self, parser):
        pass

    def handle(self, *args, **options):
        try:
            cfg = load_config(options.get('config')).with_overrides(
                seed=options.get('seed'), budget=options.get('budget'), oracle=options.get('oracle'),
            )
            out_dir = self.out_dir(cfg, options.get('out'))
            oracle = OracleService.build_oracle(
                cfg.run['oracle'], cache=bool(options.get('cache') or cfg.run['cache']),
            )
            try:
                code = self.run(cfg, oracle, out_dir, options)
            finally:
                oracle.close()
        except BudgetExceededError as e:
            logger.error(f'{self.name}: {e}')
            raise CommandError(f'Query budget exhausted: {e}', returncode=e.exit_code) from e
        except PatchAttackError as e:
            logger.error(f'{self.name}: {e}')
            raise CommandError(str(e), returncode=e.exit_code) from e

        if code:
            raise CommandError(
                f'{self.name} stopped on the query budget; partial results in {out_dir}',
                returncode=code,
            )
        self.stdout.write(self.style.SUCCESS(f'{self.name} finished: {out_dir}'))

    def run(self, cfg, oracle, out_dir, options):
        raise NotImplementedError

    def out_dir(self, cfg, out=None):
        if out:
            return Path(out)
        return Path(settings.PATCH_ATTACK_RESULTS_DIR) / f'{self.name}-{cfg.config_hash()[:12]}-seed{cfg.seed}'

    def instance(self, cfg):
        return load_instance(cfg.run['instance'])

    def ledger(self, cfg):
        """Attack ledger, hard-capped by run.max_queries when set."""
        return QueryLedger(cfg.run['max_queries'])
