"""
Survivability App - Domain Types
"""

import math
from dataclasses import dataclass, field

from core.exceptions import InvalidArgumentError

EXACT, ABOVE, BELOW, PARTIAL = 'exact', 'above', 'below', 'partial'


@dataclass(frozen=True)
class SurvivabilityEstimate:
    """
    Fraction of n seeded transforms under which the target label holds.

    With early exit, ``queries_spent`` may be below n; ``decision`` then
    says which side of the threshold the full estimate lies on and
    ``value`` is hits / queries_spent.
    """

    value: float
    n: int
    seed: int
    queries_spent: int
    hits: int = 0
    decision: str = EXACT

    def __post_init__(self):
        if self.n < 1:
            raise InvalidArgumentError(f'n must be >= 1, got {self.n}')
        if not 0 <= self.queries_spent <= self.n:
            raise InvalidArgumentError(
                f'queries_spent {self.queries_spent} outside [0, {self.n}]'
            )
        if not 0.0 <= self.value <= 1.0:
            raise InvalidArgumentError(f'Survivability {self.value} outside [0, 1]')

    @property
    def complete(self):
        return self.queries_spent == self.n

    def to_dict(self):
        return {
            'value': self.value,
            'n': self.n,
            'seed': self.seed,
            'queries_spent': self.queries_spent,
            'hits': self.hits,
            'decision': self.decision,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(**data)


@dataclass(frozen=True)
class LipschitzTrace:
    """Observed local Lipschitz ratios |dS| / ||step||."""

    samples: tuple = field(default_factory=tuple)
    max: float = 0.0

    def __post_init__(self):
        samples = tuple(float(s) for s in self.samples)
        if any(not math.isfinite(s) or s < 0 for s in samples):
            raise InvalidArgumentError('Lipschitz ratios must be finite and non-negative')
        object.__setattr__(self, 'samples', samples)
        object.__setattr__(self, 'max', max(samples, default=0.0))

    def __len__(self):
        return len(self.samples)

    def extend(self, other):
        return LipschitzTrace(self.samples + other.samples)

    def to_dict(self):
        return {'count': len(self.samples), 'max': self.max, 'samples': list(self.samples)}

    @classmethod
    def from_dict(cls, data):
        return cls(tuple(data.get('samples', ())))


class LipschitzRecorder:
    """
    Growing list of Lipschitz ratios for one run.

    Appends are O(1) with a running maximum; ``freeze`` hands back the
    immutable LipschitzTrace for results and reports.
    """

    def __init__(self, samples=()):
        self._samples = []
        self.max = 0.0
        for s in samples:
            self.append(s)

    def append(self, ratio):
        ratio = float(ratio)
        if not math.isfinite(ratio) or ratio < 0:
            raise InvalidArgumentError('Lipschitz ratios must be finite and non-negative')
        self._samples.append(ratio)
        self.max = max(self.max, ratio)

    def __len__(self):
        return len(self._samples)

    @property
    def samples(self):
        return tuple(self._samples)

    def to_list(self):
        return list(self._samples)

    def freeze(self):
        return LipschitzTrace(tuple(self._samples))
