"""
Baseline App - Domain Types

Boundary-distance attack state and the survivability-thresholded oracle
wrapper it is run against.
"""

from collections import Counter
from dataclasses import asdict, dataclass, field

import numpy as np

from core.exceptions import InvalidArgumentError
from oracle.domain import HardLabelOracle, QueryLedger
from oracle.services import OracleService
from transforms.services import TransformService

UNSURVIVABLE_LABEL = -1

COMPLETE, UNREACHABLE, OUT_OF_BUDGET = 'complete', 'threshold-unreachable', 'budget'


@dataclass(frozen=True)
class OptAttackConfig:
    """
    Boundary-distance descent and threshold schedule.

    alpha: initial step on the direction; beta: probe radius; q:
    directions per gradient; tol: bisection width in image units;
    budget: descent queries after initialization; k_max: step doublings
    or halvings per line search; max_doublings: expansion cap (2^k times
    the initial guess); n: transforms per wrapped query.
    """

    alpha: float = 0.2
    beta: float = 0.05
    q: int = 10
    tol: float = 1e-3
    budget: int = 20000
    k_max: int = 5
    max_doublings: int = 10
    n: int = 20
    seed: int = 0
    epochs_per_raise: int = 5
    threshold_step: int = 5
    workers: int = None

    def __post_init__(self):
        for name in ('alpha', 'beta', 'tol'):
            if getattr(self, name) <= 0:
                raise InvalidArgumentError(f'{name} must be > 0, got {getattr(self, name)}')
        for name in ('q', 'n', 'epochs_per_raise', 'threshold_step'):
            if getattr(self, name) < 1:
                raise InvalidArgumentError(f'{name} must be >= 1, got {getattr(self, name)}')
        for name in ('budget', 'k_max', 'max_doublings', 'seed'):
            if getattr(self, name) < 0:
                raise InvalidArgumentError(f'{name} must be >= 0, got {getattr(self, name)}')

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        return cls(**data)


@dataclass(frozen=True, eq=False)
class DirectionState:
    """Unit direction phi, its boundary distance g_val and queries spent so far."""

    phi: np.ndarray
    g_val: float
    queries: int

    def __post_init__(self):
        if self.g_val < 0:
            raise InvalidArgumentError(f'Boundary distance must be >= 0, got {self.g_val}')

    def boundary_point(self, x):
        return np.clip(x.data + self.g_val * self.phi, 0.0, 1.0)


@dataclass(frozen=True)
class BoundaryBracket:
    """lower is never adversarial, upper always is."""

    lower: float
    upper: float
    queries: int


@dataclass(frozen=True, eq=False)
class OptAttackResult:
    adversarial: object
    state: DirectionState
    history: tuple = field(default_factory=tuple)
    epochs: int = 0
    alpha: float = 0.0


@dataclass(frozen=True)
class ScheduleReport:
    """
    Outcome of one threshold-schedule run.

    levels holds one record per threshold reached: threshold (percent),
    first_epoch and the queries spent at that level.
    """

    start_threshold: int
    levels: tuple
    status: str
    final_threshold: int
    final_robustness: float
    queries: int
    epochs: int
    failed_threshold: int = None

    def thresholds(self):
        return [level['threshold'] for level in self.levels]

    def to_dict(self):
        data = asdict(self)
        data['levels'] = [dict(level) for level in self.levels]
        return data


class WrappedOracle(HardLabelOracle):
    """
    F'(x): the label that survives at least ``threshold`` of n seeded
    transforms of x, or UNSURVIVABLE_LABEL.

    ``target`` is checked on its own first, so it wins whenever its own
    share reaches the threshold even if another label has more votes.
    Otherwise the most frequent label is tested.

    Every call uses the same transform seed, so F' is a deterministic
    function of its input. Each call burns exactly n inner queries.
    """

    virtual = True

    def __init__(self, inner, dist, n, threshold, object_grid, seed=0, phase='wrapped',
                 target=None):
        if not 0.0 <= threshold <= 1.0:
            raise InvalidArgumentError(f'threshold must be in [0, 1], got {threshold}')
        if n < 1:
            raise InvalidArgumentError(f'n must be >= 1, got {n}')
        self.inner = inner
        self.dist = dist
        self.n = n
        self.threshold = threshold
        self.object_grid = np.asarray(object_grid, dtype=bool)
        self.seed = seed
        self.phase = phase
        self.target = target
        self.concurrent_safe = inner.concurrent_safe

    def predict(self, img):
        return self.predict_billed(img, QueryLedger())

    def predict_billed(self, img, ledger):
        transforms = TransformService.sample_sequence(self.dist, self.seed, self.n, self.object_grid)
        votes = Counter(
            OracleService.query(self.inner, TransformService.apply(t, img, self.object_grid), ledger, self.phase)
            for t in transforms
        )
        if self.target is not None and votes[self.target] / self.n >= self.threshold:
            return self.target
        # most frequent label, lowest label on ties
        label, count = min(votes.items(), key=lambda item: (-item[1], item[0]))
        return label if count / self.n >= self.threshold else UNSURVIVABLE_LABEL

    def rewrapped(self, threshold):
        return WrappedOracle(
            self.inner, self.dist, self.n, threshold, self.object_grid, self.seed, self.phase,
            target=self.target,
        )

    def close(self):
        self.inner.close()
