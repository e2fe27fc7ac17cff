"""
Boost App - Domain Types
"""

from dataclasses import asdict, dataclass, field

import numpy as np

from core.exceptions import InvalidArgumentError


@dataclass(frozen=True)
class BoostConfig:
    """
    Random gradient-free ascent on survivability.

    beta: probe radius; eta: step size; q: directions per gradient;
    n: transforms per estimate; budget: queries for the whole boost
    stage; k_max: halvings tried by the line search.
    """

    beta: float = 1.0
    eta: float = 500.0
    q: int = 10
    n: int = 100
    budget: int = 20000
    line_search: bool = False
    k_max: int = 8
    seed: int = 0
    workers: int = None

    def __post_init__(self):
        if self.beta <= 0:
            raise InvalidArgumentError(f'beta must be > 0, got {self.beta}')
        if self.eta <= 0:
            raise InvalidArgumentError(f'eta must be > 0, got {self.eta}')
        if self.q < 1:
            raise InvalidArgumentError(f'q must be >= 1, got {self.q}')
        if self.n < 1:
            raise InvalidArgumentError(f'n must be >= 1, got {self.n}')
        if self.budget < 0:
            raise InvalidArgumentError(f'budget must be >= 0, got {self.budget}')
        if self.k_max < 0:
            raise InvalidArgumentError(f'k_max must be >= 0, got {self.k_max}')
        if self.seed < 0:
            raise InvalidArgumentError(f'seed must be >= 0, got {self.seed}')

    @property
    def iteration_cost(self):
        """Worst-case queries of one iteration, including the next base estimate."""
        cost = (self.q + 1) * self.n
        if self.line_search:
            cost += (self.k_max + 1) * self.n
        return cost

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        return cls(**data)


@dataclass(frozen=True, eq=False)
class GradientEstimate:
    """g_hat with the base estimate it was differenced against."""

    g: np.ndarray
    base: object
    probes: tuple
    trace: object


@dataclass(frozen=True)
class LineSearchOutcome:
    step: float
    delta: object
    estimate: object
    trials: int
    improved: bool


@dataclass(frozen=True, eq=False)
class BoostResult:
    """
    Best perturbation seen and how the run went.

    history holds one record per iteration: iteration, queries spent so
    far, the new estimate, the best estimate so far and the step taken.

    estimate is None only for a run skipped for lack of budget when the
    caller supplied no initial estimate.
    """

    delta: object
    estimate: object
    lipschitz: object
    iterations: int = 0
    history: tuple = field(default_factory=tuple)
    cold_start: bool = False
    queries_spent: int = 0
    stopped: str = 'budget'
