"""
Oracle App - Tests

Test cases for the template classifier, query ledger, wire protocol and
backend clients.
"""

from concurrent.futures import ThreadPoolExecutor
from unittest.mock import MagicMock, patch

import requests
from django.test import SimpleTestCase, override_settings

from core.exceptions import BudgetExceededError, InvalidArgumentError, OracleIOError, ProtocolError
from imaging.domain import Image
from .clients import ExternalProcessOracle, HttpOracle
from .domain import CachingOracle, QueryLedger, StringLabelAdapter, TemplateClassifier, levenshtein
from .fixtures import prototypes
from .protocol import decode_request, decode_response, encode_request, encode_response
from .services import OracleService
from .testing import CRASH, ECHO_SEVEN, GARBAGE, PARITY, SILENT, ConstantOracle, stub_command


class TemplateClassifierTests(SimpleTestCase):
    """Test cases for the nearest-prototype classifier."""

    def setUp(self):
        self.classifier = TemplateClassifier({
            0: Image.constant(4, 4, 0.0),
            1: Image.constant(4, 4, 1.0),
        })

    def test_nearest_prototype_wins(self):
        """Test that an all-0.9 image is labeled 1."""
        self.assertEqual(self.classifier.predict(Image.constant(4, 4, 0.9)), 1)

    def test_prototype_labels_itself(self):
        """Test that each prototype is classified as its own label."""
        self.assertEqual(self.classifier.predict(Image.constant(4, 4, 0.0)), 0)
        self.assertEqual(self.classifier.predict(Image.constant(4, 4, 1.0)), 1)

    def test_tie_goes_to_lowest_label(self):
        """Test that an equidistant query gets the lowest label."""
        self.assertEqual(self.classifier.predict(Image.constant(4, 4, 0.5)), 0)

    def test_query_resized_to_prototype_resolution(self):
        """Test that a larger query is resized before comparison."""
        self.assertEqual(self.classifier.predict(Image.constant(16, 16, 0.8)), 1)

    def test_builtin_prototypes_self_classify(self):
        """Test that the built-in classifier recognizes its own prototypes."""
        builtin = OracleService.builtin()
        for label, img in prototypes().items():
            self.assertEqual(builtin.predict(img), label)

    def test_channel_mismatch_rejected(self):
        """Test that a grayscale query is rejected by RGB prototypes."""
        builtin = OracleService.builtin()
        with self.assertRaises(InvalidArgumentError):
            builtin.predict(Image.constant(32, 32, 0.5))


class QueryLedgerTests(SimpleTestCase):
    """Test cases for query accounting."""

    def test_query_counts_one_per_call(self):
        """Test that each query increments exactly one phase."""
        ledger = QueryLedger()
        oracle = ConstantOracle(3)
        img = Image.constant(2, 2, 0.5)
        for _ in range(5):
            OracleService.query(oracle, img, ledger, 'heatmap')
        OracleService.query(oracle, img, ledger, 'boost')
        self.assertEqual(ledger.total, 6)
        self.assertEqual(ledger.per_phase, {'heatmap': 5, 'boost': 1})
        self.assertEqual(oracle.calls, 6)

    def test_budget_checked_before_dispatch(self):
        """Test that the query over budget never reaches the backend."""
        ledger = QueryLedger(budget=2)
        oracle = ConstantOracle(1)
        img = Image.constant(2, 2, 0.5)
        OracleService.query(oracle, img, ledger, 'a')
        OracleService.query(oracle, img, ledger, 'a')
        with self.assertRaises(BudgetExceededError) as ctx:
            OracleService.query(oracle, img, ledger, 'a')
        self.assertEqual(ctx.exception.spent, 2)
        self.assertEqual(oracle.calls, 2)
        self.assertEqual(ledger.total, 2)

    def test_concurrent_reservations_are_exact(self):
        """Test that concurrent increments are never lost."""
        ledger = QueryLedger()
        with ThreadPoolExecutor(max_workers=8) as pool:
            list(pool.map(lambda i: ledger.reserve(f'p{i % 3}'), range(3000)))
        self.assertEqual(ledger.total, 3000)
        self.assertEqual(sum(ledger.per_phase.values()), 3000)

    def test_since_snapshot(self):
        """Test that per-phase deltas are reported from a snapshot."""
        ledger = QueryLedger()
        ledger.reserve('heatmap')
        snap = ledger.snapshot()
        ledger.reserve('coarse')
        ledger.reserve('coarse')
        self.assertEqual(ledger.since(snap), {'coarse': 2})

    def test_negative_budget_rejected(self):
        """Test that a negative budget is rejected."""
        with self.assertRaises(InvalidArgumentError):
            QueryLedger(budget=-1)


class CachingOracleTests(SimpleTestCase):
    """Test cases for the digest-keyed cache."""

    def test_repeated_query_hits_cache(self):
        """Test that an identical image is answered from cache without billing."""
        inner = ConstantOracle(4)
        oracle = CachingOracle(inner)
        ledger = QueryLedger()
        img = Image.constant(3, 3, 0.2)
        for _ in range(3):
            self.assertEqual(OracleService.query(oracle, img, ledger, 'x'), 4)
        self.assertEqual(ledger.total, 1)
        self.assertEqual(ledger.cache_hits, 2)
        self.assertEqual(inner.calls, 1)


class StringLabelTests(SimpleTestCase):
    """Test cases for string-label backends."""

    def test_strings_map_to_stable_integers(self):
        """Test that distinct strings get distinct stable labels."""
        readings = iter(['ABC123', 'XYZ', 'ABC123', ''])
        adapter = StringLabelAdapter(lambda img: next(readings))
        img = Image.constant(2, 2, 0.5)
        labels = [adapter.predict(img) for _ in range(4)]
        self.assertEqual(labels, [0, 1, 0, StringLabelAdapter.NO_DETECTION_LABEL])

    def test_levenshtein(self):
        """Test edit distances on known pairs."""
        self.assertEqual(levenshtein('kitten', 'sitting'), 3)
        self.assertEqual(levenshtein('', 'abc'), 3)
        self.assertEqual(levenshtein('plate', 'plate'), 0)


class ProtocolTests(SimpleTestCase):
    """Test cases for the line protocol."""

    def test_request_is_one_lf_terminated_line(self):
        """Test request framing."""
        line = encode_request(5, Image.constant(2, 2, 0.5))
        self.assertTrue(line.endswith('\n'))
        self.assertEqual(line.count('\n'), 1)
        request_id, img = decode_request(line)
        self.assertEqual(request_id, 5)
        self.assertEqual((img.width, img.height), (2, 2))

    def test_response_decoding(self):
        """Test that a well-formed response yields its label."""
        self.assertEqual(decode_response(encode_response(9, 3), expected_id=9), 3)

    def test_extra_fields_discarded(self):
        """Test that confidence fields are ignored."""
        self.assertEqual(decode_response('{"id": 1, "label": 2, "confidence": 0.9}'), 2)

    def test_non_integer_label_rejected(self):
        """Test that string or boolean labels are protocol errors."""
        for line in ('{"id": 1, "label": "7"}', '{"id": 1, "label": true}', 'abc'):
            with self.assertRaises(ProtocolError):
                decode_response(line)

    def test_mismatched_id_rejected(self):
        """Test that a response for another request is rejected."""
        with self.assertRaises(ProtocolError):
            decode_response('{"id": 2, "label": 0}', expected_id=1)


class ExternalProcessOracleTests(SimpleTestCase):
    """Test cases for stdio backends."""

    def setUp(self):
        self.img = Image.constant(4, 4, 0.3)

    def test_echo_server_labels_everything_seven(self):
        """Test the protocol against a constant-label server."""
        oracle = ExternalProcessOracle(stub_command(ECHO_SEVEN), timeout=10)
        try:
            self.assertEqual([oracle.predict(self.img) for _ in range(3)], [7, 7, 7])
        finally:
            oracle.close()

    def test_parity_server_counts_match_ledger(self):
        """Test that the ledger count equals the backend's request count."""
        oracle = ExternalProcessOracle(stub_command(PARITY), timeout=10)
        ledger = QueryLedger()
        try:
            labels = [OracleService.query(oracle, self.img, ledger, 'count') for _ in range(5)]
        finally:
            oracle.close()
        self.assertEqual(labels, [1, 0, 1, 0, 1])
        self.assertEqual(ledger.total, oracle.requests_sent)
        self.assertEqual(ledger.total, 5)

    def test_garbage_reply_is_protocol_error(self):
        """Test that a non-JSON reply raises a protocol error."""
        oracle = ExternalProcessOracle(stub_command(GARBAGE), timeout=10)
        try:
            with self.assertRaises(ProtocolError):
                oracle.predict(self.img)
        finally:
            oracle.close()

    def test_silent_server_times_out(self):
        """Test that a backend that never answers raises an oracle IO error."""
        oracle = ExternalProcessOracle(stub_command(SILENT), timeout=0.5)
        try:
            with self.assertRaises(OracleIOError):
                oracle.predict(self.img)
        finally:
            oracle.close()

    def test_crashing_server_is_oracle_io_error(self):
        """Test that a child that exits mid-request raises an oracle IO error."""
        oracle = ExternalProcessOracle(stub_command(CRASH), timeout=10)
        try:
            with self.assertRaises(OracleIOError):
                oracle.predict(self.img)
        finally:
            oracle.close()

    def test_missing_command_is_oracle_io_error(self):
        """Test that an unlaunchable command raises an oracle IO error."""
        with self.assertRaises(OracleIOError):
            ExternalProcessOracle('/nonexistent/oracle-binary')


class HttpOracleTests(SimpleTestCase):
    """Test cases for the HTTP backend."""

    def setUp(self):
        self.img = Image.constant(4, 4, 0.3)

    @patch('oracle.clients.requests.Session.post')
    def test_label_returned_and_token_sent(self, mock_post):
        """Test a successful request with bearer-token passthrough."""
        mock_post.return_value = MagicMock(text='{"id": 0, "label": 12}')
        oracle = HttpOracle('http://oracle.test/classify', token='secret', timeout=1, retries=3)
        self.assertEqual(oracle.predict(self.img), 12)
        self.assertEqual(oracle._session.headers['Authorization'], 'Bearer secret')

    @patch('oracle.clients.requests.Session.post')
    def test_connection_errors_retried_then_fail(self, mock_post):
        """Test that connection failures are retried and then surface as IO errors."""
        mock_post.side_effect = requests.ConnectionError('refused')
        oracle = HttpOracle('http://oracle.test/classify', token='', timeout=1, retries=3)
        with self.assertRaises(OracleIOError):
            oracle.predict(self.img)
        self.assertEqual(mock_post.call_count, 3)

    @patch('oracle.clients.requests.Session.post')
    def test_transient_failure_recovers(self, mock_post):
        """Test that a retry after one failure succeeds."""
        mock_post.side_effect = [
            requests.ConnectionError('reset'),
            MagicMock(text='{"id": 0, "label": 4}'),
        ]
        oracle = HttpOracle('http://oracle.test/classify', token='', timeout=1, retries=3)
        self.assertEqual(oracle.predict(self.img), 4)


class BuildOracleTests(SimpleTestCase):
    """Test cases for --oracle parsing."""

    def test_builtin(self):
        """Test that builtin yields the template classifier."""
        self.assertIsInstance(OracleService.build_oracle('builtin'), TemplateClassifier)

    def test_http_forms(self):
        """Test both accepted http: spellings."""
        self.assertEqual(OracleService.build_oracle('http:http://h/classify').url, 'http://h/classify')
        self.assertEqual(OracleService.build_oracle('http://h/classify').url, 'http://h/classify')

    def test_unknown_scheme_rejected(self):
        """Test that an unknown oracle spec is rejected."""
        with self.assertRaises(InvalidArgumentError):
            OracleService.build_oracle('grpc:host')


class ClassifyViewTests(SimpleTestCase):
    """Test cases for the HTTP oracle stub."""

    def test_classify_builtin(self):
        """Test that the stub classifies a prototype correctly."""
        body = encode_request(3, prototypes()[2])
        response = self.client.post('/classify', data=body, content_type='application/json')
        self.assertEqual(response.status_code, 200)
        self.assertEqual(response.json(), {'id': 3, 'label': 2})

    @override_settings(ORACLE_STUB_LABEL=7)
    def test_fixed_label(self):
        """Test that a configured stub label overrides the classifier."""
        body = encode_request(1, Image.constant(4, 4, 0.1))
        response = self.client.post('/classify', data=body, content_type='application/json')
        self.assertEqual(response.json()['label'], 7)

    def test_malformed_request_rejected(self):
        """Test that a malformed request gets a 400."""
        response = self.client.post('/classify', data='nope', content_type='application/json')
        self.assertEqual(response.status_code, 400)

    def test_get_not_allowed(self):
        """Test that only POST is served."""
        self.assertEqual(self.client.get('/classify').status_code, 405)


class ServeLinesTests(SimpleTestCase):
    """Test cases for the stdio stub loop."""

    def test_answers_in_request_order(self):
        """Test that each request gets its own labelled response line."""
        protos = prototypes()
        lines = [encode_request(i, protos[label]) for i, label in enumerate((2, 0, 1))]
        out = []
        answered = OracleService.serve_lines(lines, out.append)
        self.assertEqual(answered, 3)
        self.assertEqual([decode_response(line, expected_id=i) for i, line in enumerate(out)], [2, 0, 1])

    @override_settings(ORACLE_STUB_LABEL=4)
    def test_malformed_line_gets_error_reply(self):
        """Test that a bad request is answered with an error line and not counted."""
        out = []
        answered = OracleService.serve_lines(['nope\n', '\n', encode_request(8, Image.constant(4, 4, 0.1))], out.append)
        self.assertEqual(answered, 1)
        self.assertEqual(len(out), 2)
        self.assertIn('error', out[0])
        self.assertEqual(decode_response(out[1], expected_id=8), 4)
