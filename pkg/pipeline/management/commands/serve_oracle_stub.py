"""
Management Command: serve_oracle_stub

Test oracle speaking the wire protocol, either over stdin/stdout (for
``--oracle proc:...``) or as the POST /classify view over HTTP.
"""

import sys

from django.conf import settings
from django.core.management import call_command
from django.core.management.base import BaseCommand

from oracle.services import OracleService


class Command(BaseCommand):
    help = 'Serves the built-in classifier over the oracle wire protocol'

    def add_arguments(self, parser):
        parser.add_argument('addrport', nargs='?', default='127.0.0.1:8765', help='HTTP address:port')
        parser.add_argument('--stdio', action='store_true', help='Answer requests on stdin/stdout instead of HTTP')
        parser.add_argument('--label', type=int, help='Always answer this label')

    def handle(self, *args, **options):
        if options.get('label') is not None:
            settings.ORACLE_STUB_LABEL = options['label']

        if options.get('stdio'):
            def write(line):
                sys.stdout.write(line)
                sys.stdout.flush()

            answered = OracleService.serve_lines(sys.stdin, write)
            self.stderr.write(f'Oracle stub answered {answered} request(s)')
            return

        self.stdout.write(f'Oracle stub on http://{options["addrport"]}/classify')
        call_command('runserver', options['addrport'], use_reloader=False)
