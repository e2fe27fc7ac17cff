"""
Oracle App - Constructed Oracles

Oracles with known decision rules, shared by the test suites of several
apps. Every oracle counts the calls it actually served in ``calls``.
"""

import shlex
import sys
import threading

import numpy as np

from .domain import HardLabelOracle


class CountingOracle(HardLabelOracle):
    """Base class: thread-safe served-request counter."""

    concurrent_safe = True

    def __init__(self):
        self.calls = 0
        self._count_lock = threading.Lock()

    def predict(self, img):
        with self._count_lock:
            self.calls += 1
            call = self.calls
        return self.decide(img, call)

    def decide(self, img, call):
        raise NotImplementedError


class ConstantOracle(CountingOracle):
    """Always answers the same label."""

    def __init__(self, label):
        super().__init__()
        self.label = label

    def decide(self, img, call):
        return self.label


class ParityOracle(CountingOracle):
    """Alternates labels by request parity (first request is odd)."""

    concurrent_safe = False

    def __init__(self, odd_label=1, even_label=0):
        super().__init__()
        self.odd_label = odd_label
        self.even_label = even_label

    def decide(self, img, call):
        return self.odd_label if call % 2 else self.even_label


class BlockOracle(CountingOracle):
    """
    y_adv iff every pixel of ``block`` carries the target content.

    block is a boolean grid at the query resolution.
    """

    def __init__(self, block, target, y_adv, other=0, tol=0.05):
        super().__init__()
        self.block = np.asarray(block, dtype=bool)
        self.target = np.asarray(target.data)
        self.y_adv = y_adv
        self.other = other
        self.tol = tol

    def decide(self, img, call):
        diff = np.abs(img.data - self.target).max(axis=2)
        return self.y_adv if np.all(diff[self.block] <= self.tol) else self.other


class WeightedSupportOracle(CountingOracle):
    """
    y_adv iff the weighted count of target-content pixels reaches tau.

    Non-negative weights make it monotone in the set of masked pixels.
    """

    def __init__(self, weights, target, y_adv, tau, other=0, tol=0.05):
        super().__init__()
        self.weights = np.asarray(weights, dtype=np.float64)
        self.target = np.asarray(target.data)
        self.y_adv = y_adv
        self.tau = tau
        self.other = other
        self.tol = tol

    def score(self, img):
        close = np.abs(img.data - self.target).max(axis=2) <= self.tol
        return float((self.weights * close).sum())

    def decide(self, img, call):
        return self.y_adv if self.score(img) >= self.tau else self.other


class ThresholdScoreOracle(CountingOracle):
    """y_adv iff the linear score mean(w * img) reaches tau."""

    def __init__(self, weights, tau, y_adv=1, other=0):
        super().__init__()
        self.weights = np.asarray(weights, dtype=np.float64)
        self.tau = tau
        self.y_adv = y_adv
        self.other = other

    def decide(self, img, call):
        score = float((self.weights * img.data).mean())
        return self.y_adv if score >= self.tau else self.other


class HalfspaceOracle(CountingOracle):
    """y_adv iff (img - origin) . unit_normal >= offset, over flattened pixels."""

    def __init__(self, origin, normal, offset, y_adv=1, other=0):
        super().__init__()
        self.origin = np.asarray(origin.data)
        normal = np.asarray(normal, dtype=np.float64).reshape(self.origin.shape)
        self.normal = normal / np.linalg.norm(normal)
        self.offset = offset
        self.y_adv = y_adv
        self.other = other

    def decide(self, img, call):
        projection = float(((img.data - self.origin) * self.normal).sum())
        return self.y_adv if projection >= self.offset else self.other


class CappedOracle(CountingOracle):
    """
    Answers y_adv on ``hits`` of every ``period`` consecutive calls.

    Wrapped with n = period, every wrapped query sees exactly
    hits / period survivability.
    """

    concurrent_safe = False

    def __init__(self, y_adv=1, other=0, hits=11, period=20):
        super().__init__()
        self.y_adv = y_adv
        self.other = other
        self.hits = hits
        self.period = period

    def decide(self, img, call):
        return self.y_adv if (call - 1) % self.period < self.hits else self.other


def stub_command(script):
    """Command line running one of the stdio stub scripts below."""
    return f"{shlex.quote(sys.executable)} -u -c {shlex.quote(script)}"


ECHO_SEVEN = (
    'import sys, json\n'
    'for line in sys.stdin:\n'
    "    print(json.dumps({'id': json.loads(line)['id'], 'label': 7}), flush=True)"
)

PARITY = (
    'import sys, json\n'
    'for count, line in enumerate(sys.stdin, 1):\n'
    "    print(json.dumps({'id': json.loads(line)['id'], 'label': count % 2}), flush=True)"
)

GARBAGE = (
    'import sys\n'
    'for line in sys.stdin:\n'
    "    print('abc', flush=True)"
)

SILENT = (
    'import sys, time\n'
    'for line in sys.stdin:\n'
    '    time.sleep(60)'
)

CRASH = 'import sys; sys.stdin.readline(); sys.exit(3)'
