"""
Oracle App - Domain Types

The hard-label query boundary and exact query accounting.
"""

import threading
from abc import ABC, abstractmethod
from collections import Counter

import numpy as np

from core.exceptions import BudgetExceededError, InvalidArgumentError
from imaging.services import ImagingService


class HardLabelOracle(ABC):
    """
    Top-1-label classifier. Only an integer label crosses this boundary.

    ``concurrent_safe`` declares whether predict() may be called from
    several threads at once. ``virtual`` oracles issue their own inner
    queries (see baseline.WrappedOracle) and are not billed per call.
    """

    concurrent_safe = False
    virtual = False

    @abstractmethod
    def predict(self, img):
        """Return the top-1 label for an Image."""

    def predict_billed(self, img, ledger):
        """Virtual oracles only: predict while billing inner queries to ledger."""
        raise NotImplementedError(f'{type(self).__name__} is not a virtual oracle')

    def close(self):
        """Release backend resources."""


class QueryLedger:
    """
    Exact per-phase count of oracle calls with an optional hard cap.

    total always equals the sum of per_phase. Calls on virtual oracles are
    tallied in ``outer`` only; their inner queries land in per_phase.
    """

    def __init__(self, budget=None):
        if budget is not None and budget < 0:
            raise InvalidArgumentError(f'Budget must be non-negative, got {budget}')
        self.budget = budget
        self.total = 0
        self.per_phase = Counter()
        self.outer = Counter()
        self.cache_hits = 0
        self._lock = threading.Lock()

    def reserve(self, phase):
        """Count one query in ``phase``; raises before dispatch if over budget."""
        with self._lock:
            if self.budget is not None and self.total + 1 > self.budget:
                raise BudgetExceededError(
                    f'Query budget {self.budget} exhausted in phase "{phase}"',
                    budget=self.budget,
                    spent=self.total,
                )
            self.total += 1
            self.per_phase[phase] += 1

    def record_outer(self, phase):
        with self._lock:
            self.outer[phase] += 1

    def record_cache_hit(self):
        with self._lock:
            self.cache_hits += 1

    def remaining(self):
        if self.budget is None:
            return None
        return self.budget - self.total

    def can_afford(self, queries):
        return self.budget is None or self.total + queries <= self.budget

    def phase_total(self, phase):
        return self.per_phase.get(phase, 0)

    def snapshot(self):
        with self._lock:
            return {'total': self.total, 'per_phase': dict(self.per_phase)}

    def since(self, snapshot):
        """Queries spent per phase since ``snapshot``."""
        current = self.snapshot()
        before = snapshot['per_phase']
        return {
            phase: count - before.get(phase, 0)
            for phase, count in current['per_phase'].items()
            if count - before.get(phase, 0)
        }

    def to_dict(self):
        with self._lock:
            return {
                'total': self.total,
                'budget': self.budget,
                'per_phase': dict(sorted(self.per_phase.items())),
                'outer': dict(sorted(self.outer.items())),
                'cache_hits': self.cache_hits,
            }

    @classmethod
    def from_dict(cls, data):
        ledger = cls(data.get('budget'))
        ledger.total = data['total']
        ledger.per_phase = Counter(data.get('per_phase', {}))
        ledger.outer = Counter(data.get('outer', {}))
        ledger.cache_hits = data.get('cache_hits', 0)
        return ledger


class TemplateClassifier(HardLabelOracle):
    """
    Nearest-prototype classifier under mean squared distance.

    Queries are resized to the prototype resolution first. Ties go to the
    lowest label.
    """

    concurrent_safe = True

    def __init__(self, prototypes):
        if not prototypes:
            raise InvalidArgumentError('TemplateClassifier needs at least one prototype')
        items = sorted(prototypes.items()) if isinstance(prototypes, dict) else sorted(
            prototypes, key=lambda pair: pair[0]
        )
        shapes = {img.data.shape for _, img in items}
        if len(shapes) != 1:
            raise InvalidArgumentError(f'Prototypes must share one shape, got {sorted(shapes)}')
        self.labels = [int(label) for label, _ in items]
        self.prototypes = np.stack([img.data for _, img in items])
        self.height, self.width, self.channels = self.prototypes.shape[1:]

    def distances(self, img):
        if img.channels != self.channels:
            raise InvalidArgumentError(
                f'Query has {img.channels} channels, prototypes have {self.channels}'
            )
        data = ImagingService.resize_bilinear(img, self.width, self.height).data
        return ((self.prototypes - data) ** 2).mean(axis=(1, 2, 3))

    def predict(self, img):
        d = self.distances(img)
        # argmin returns the first minimum; labels are sorted ascending
        return self.labels[int(np.argmin(d))]


class CachingOracle(HardLabelOracle):
    """Memoize an inner oracle by image digest. Off unless asked for."""

    def __init__(self, inner):
        self.inner = inner
        self.concurrent_safe = inner.concurrent_safe
        self._cache = {}
        self._lock = threading.Lock()

    def lookup(self, img):
        with self._lock:
            return self._cache.get(img.digest())

    def predict(self, img):
        label = self.inner.predict(img)
        with self._lock:
            self._cache[img.digest()] = label
        return label

    def close(self):
        self.inner.close()


def levenshtein(a, b):
    """Edit distance between two strings (reporting only)."""
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i]
        for j, cb in enumerate(b, start=1):
            current.append(min(
                previous[j] + 1,
                current[j - 1] + 1,
                previous[j - 1] + (ca != cb),
            ))
        previous = current
    return previous[-1]


class StringLabelAdapter(HardLabelOracle):
    """
    Map a string-label backend (e.g. plate text) onto integer labels.

    Distinct strings get consecutive integers in first-seen order; an
    empty or missing reading maps to NO_DETECTION_LABEL. ``read`` is a
    callable Image -> str or None.
    """

    NO_DETECTION_LABEL = -2

    def __init__(self, read, known=(), concurrent_safe=False):
        self.read = read
        self.concurrent_safe = concurrent_safe
        self._codes = {}
        self._lock = threading.Lock()
        for text in known:
            self.code_for(text)

    def code_for(self, text):
        if not text:
            return self.NO_DETECTION_LABEL
        with self._lock:
            if text not in self._codes:
                self._codes[text] = len(self._codes)
            return self._codes[text]

    def text_for(self, label):
        for text, code in self._codes.items():
            if code == label:
                return text
        return None

    def predict(self, img):
        return self.code_for(self.read(img))

    def edit_distance(self, label, reference):
        """Levenshtein distance between a label's text and a reference string."""
        return levenshtein(self.text_for(label) or '', reference)
