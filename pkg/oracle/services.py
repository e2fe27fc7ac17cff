"""
Oracle App - Services

Single entry point for every oracle query, plus oracle construction from
the --oracle flag.
"""

import json
import logging

from django.conf import settings

from core.exceptions import InvalidArgumentError, OracleIOError, ProtocolError
from .clients import ExternalProcessOracle, HttpOracle
from .domain import CachingOracle, TemplateClassifier
from .fixtures import prototypes
from .protocol import decode_request, encode_response

logger = logging.getLogger('patch_attack')


class OracleService:
    """
    Service class for oracle queries.

    All toolkit code queries through OracleService.query so the ledger
    sees every call.
    """

    @staticmethod
    def query(oracle, img, ledger, phase):
        """
        Top-1 label of img, billing exactly one query to ``phase``.

        Virtual oracles bill their own inner queries; cache hits are free.
        """
        if oracle.virtual:
            ledger.record_outer(phase)
            return oracle.predict_billed(img, ledger)

        if isinstance(oracle, CachingOracle):
            cached = oracle.lookup(img)
            if cached is not None:
                ledger.record_cache_hit()
                return cached

        ledger.reserve(phase)
        try:
            return int(oracle.predict(img))
        except OracleIOError as e:
            logger.error(f'Oracle query failed in phase "{phase}": {e}')
            raise

    @staticmethod
    def builtin():
        """Template classifier over the built-in sign prototypes."""
        return TemplateClassifier(prototypes())

    @staticmethod
    def build_oracle(spec, cache=False, timeout=None):
        """
        Build an oracle from ``builtin``, ``proc:COMMAND`` or ``http:URL``.
        """
        if spec == 'builtin':
            oracle = OracleService.builtin()
        elif spec.startswith('proc:'):
            command = spec[len('proc:'):].strip()
            if not command:
                raise InvalidArgumentError('proc: oracle needs a command')
            oracle = ExternalProcessOracle(command, timeout=timeout)
        elif spec.startswith('http:'):
            rest = spec[len('http:'):]
            # both http:http://host/classify and http://host/classify work
            url = 'http:' + rest if rest.startswith('//') else rest
            if not url:
                raise InvalidArgumentError('http: oracle needs a URL')
            oracle = HttpOracle(url, timeout=timeout)
        else:
            raise InvalidArgumentError(
                f'Unknown oracle "{spec}". Use builtin, proc:COMMAND or http:URL'
            )
        logger.info(f'Oracle ready: {spec} (concurrent_safe={oracle.concurrent_safe})')
        return CachingOracle(oracle) if cache else oracle

    @staticmethod
    def stub_label(img, classifier=None):
        """Label served by the oracle stub: a fixed label if configured, else the builtin classifier."""
        if settings.ORACLE_STUB_LABEL >= 0:
            return settings.ORACLE_STUB_LABEL
        return (classifier or OracleService.builtin()).predict(img)

    @staticmethod
    def serve_lines(lines, write, classifier=None):
        """
        Answer line-protocol requests in order; returns how many were labelled.

        A malformed request gets an error line so stdio clients stay in step.
        """
        classifier = classifier or OracleService.builtin()
        answered = 0
        for line in lines:
            if not line.strip():
                continue
            try:
                request_id, img = decode_request(line)
            except ProtocolError as e:
                logger.warning(f'Rejected oracle request: {e}')
                write(json.dumps({'error': str(e)}) + '\n')
                continue
            write(encode_response(request_id, OracleService.stub_label(img, classifier)))
            answered += 1
        return answered
