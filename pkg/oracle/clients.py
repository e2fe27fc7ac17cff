"""
Oracle App - Backend Clients

Clients for black-box classifiers reached over a child process's stdio
or over HTTP. Both speak the protocol in oracle.protocol.
"""

import itertools
import logging
import queue
import shlex
import subprocess
import threading

import requests
from django.conf import settings

from core.exceptions import OracleIOError, ProtocolError
from .domain import HardLabelOracle
from .protocol import decode_response, encode_request

logger = logging.getLogger('patch_attack')

_EOF = object()


class ExternalProcessOracle(HardLabelOracle):
    """
    Long-lived child process answering one request line per image.

    Serial only: responses are matched to requests by order.
    """

    concurrent_safe = False

    def __init__(self, command, timeout=None):
        self.command = command
        self.timeout = timeout if timeout is not None else settings.ORACLE_TIMEOUT_SECONDS
        self.requests_sent = 0
        self._ids = itertools.count()
        self._lines = queue.Queue()
        try:
            self._process = subprocess.Popen(
                shlex.split(command),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
                text=True,
                encoding='utf-8',
                bufsize=1,
            )
        except OSError as e:
            raise OracleIOError(f'Could not launch oracle command "{command}": {e}')
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()
        logger.info(f'Started oracle process {self._process.pid}: {command}')

    def _pump(self):
        for line in self._process.stdout:
            self._lines.put(line)
        self._lines.put(_EOF)

    def predict(self, img):
        request_id = next(self._ids)
        if self._process.poll() is not None:
            raise OracleIOError(
                f'Oracle process exited with code {self._process.returncode}'
            )
        try:
            self._process.stdin.write(encode_request(request_id, img))
            self._process.stdin.flush()
        except (BrokenPipeError, OSError) as e:
            raise OracleIOError(f'Oracle process stdin closed: {e}')
        self.requests_sent += 1

        try:
            line = self._lines.get(timeout=self.timeout)
        except queue.Empty:
            self._process.kill()
            self._process.wait()
            raise OracleIOError(f'Oracle process timed out after {self.timeout}s')
        if line is _EOF:
            raise OracleIOError(f'Oracle process closed its output (code {self._process.poll()})')
        return decode_response(line, expected_id=request_id)

    def close(self):
        if self._process.poll() is None:
            try:
                self._process.stdin.close()
                self._process.wait(timeout=5)
            except (OSError, subprocess.TimeoutExpired):
                self._process.kill()
                self._process.wait()


class HttpOracle(HardLabelOracle):
    """
    POST one request per image to a /classify endpoint.

    Connection failures are retried; protocol errors are not.
    """

    concurrent_safe = True

    def __init__(self, url, token=None, timeout=None, retries=None):
        self.url = url
        self.timeout = timeout if timeout is not None else settings.ORACLE_TIMEOUT_SECONDS
        self.retries = retries if retries is not None else settings.ORACLE_HTTP_RETRIES
        self._ids = itertools.count()
        self._id_lock = threading.Lock()
        self._session = requests.Session()
        token = token if token is not None else settings.ORACLE_HTTP_TOKEN
        if token:
            self._session.headers['Authorization'] = f'Bearer {token}'
        self._session.headers['Content-Type'] = 'application/json'

    def predict(self, img):
        with self._id_lock:
            request_id = next(self._ids)
        body = encode_request(request_id, img)

        for attempt in range(1, self.retries + 1):
            try:
                response = self._session.post(self.url, data=body.encode('utf-8'), timeout=self.timeout)
                response.raise_for_status()
                return decode_response(response.text, expected_id=request_id)
            except ProtocolError:
                raise
            except (requests.ConnectionError, requests.Timeout) as e:
                logger.warning(
                    f'Oracle request attempt {attempt}/{self.retries} to {self.url} failed: {e}'
                )
                if attempt == self.retries:
                    logger.error(f'Oracle unreachable after {self.retries} attempts: {self.url}')
                    raise OracleIOError(f'Oracle at {self.url} unreachable: {e}')
            except requests.RequestException as e:
                logger.error(f'Oracle request to {self.url} failed: {e}')
                raise OracleIOError(f'Oracle request failed: {e}')
        raise OracleIOError(f'Oracle at {self.url} unreachable')

    def close(self):
        self._session.close()
