"""
Maskgen App - Domain Types

Configuration and results of heatmap estimation, coarse and fine mask
reduction.
"""

from dataclasses import asdict, dataclass, field

from core.exceptions import InvalidArgumentError

FULL, COARSE_ONLY, FINE_ONLY = 'full', 'coarse-only', 'fine-only'
MODES = (FULL, COARSE_ONLY, FINE_ONLY)

TARGET, VICTIM = 'target', 'victim'


@dataclass(frozen=True)
class MaskGenConfig:
    """
    s_lo: minimum survivability the fine stage may fall to.
    s_hi: survivability the coarse stage searches for.
    lambda1: weight of the mask-to-object ratio in J.
    """

    s_lo: float = 0.70
    s_hi: float = 0.90
    lambda1: float = 0.25
    patch_size: int = 4
    stride: int = None
    n: int = 100
    mode: str = FULL
    early_exit: bool = False
    workers: int = None

    def __post_init__(self):
        if not 0.0 <= self.s_lo <= self.s_hi <= 1.0:
            raise InvalidArgumentError(
                f'Need 0 <= s_lo <= s_hi <= 1, got s_lo={self.s_lo}, s_hi={self.s_hi}'
            )
        if self.lambda1 < 0:
            raise InvalidArgumentError(f'lambda1 must be >= 0, got {self.lambda1}')
        if self.patch_size < 1:
            raise InvalidArgumentError(f'patch_size must be >= 1, got {self.patch_size}')
        if self.stride is not None and self.stride < 1:
            raise InvalidArgumentError(f'stride must be >= 1, got {self.stride}')
        if self.n < 1:
            raise InvalidArgumentError(f'n must be >= 1, got {self.n}')
        if self.mode not in MODES:
            raise InvalidArgumentError(f'mode must be one of {MODES}, got "{self.mode}"')

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        return cls(**data)


@dataclass(frozen=True)
class HeatmapResult:
    """
    Per-patch survivability s_rho with the full-mask baseline.

    For the target-relative heatmap s_rho is S(M_full - rho) and
    impact = baseline - s_rho. For the victim-relative variant s_rho is
    S(rho alone), the baseline is S(empty) and impact is the gain
    s_rho - baseline.
    """

    per_patch: tuple
    baseline_estimate: object
    patch_count: int
    relative_to: str = TARGET

    @property
    def baseline(self):
        return self.baseline_estimate.value

    @property
    def complete(self):
        return len(self.per_patch) == self.patch_count

    def survivability(self, index):
        return dict(self.per_patch)[index]

    def impact(self, index):
        s = self.survivability(index)
        return self.baseline - s if self.relative_to == TARGET else s - self.baseline

    def impacts(self):
        return [(index, self.impact(index)) for index, _ in self.per_patch]

    def order(self):
        """Patch indices least to most impactful: highest s_rho first, ties by index."""
        return [index for index, s in sorted(self.per_patch, key=lambda pair: (-pair[1], pair[0]))]


@dataclass(frozen=True)
class ReductionOutcome:
    """Coarse stage result; ``mask`` is the union of patches from ``pivot`` on."""

    mask: object
    pivot: int
    estimate: object
    reached_s_hi: bool
    evaluations: int


@dataclass(frozen=True)
class FineOutcome:
    """Fine stage result with the J value after every accepted removal."""

    mask: object
    estimate: object
    j_trace: tuple
    accepted: tuple = field(default_factory=tuple)
    rejected: tuple = field(default_factory=tuple)
    skipped: tuple = field(default_factory=tuple)


@dataclass(frozen=True)
class MaskGenerationResult:
    mask: object
    estimate: object
    heatmap: HeatmapResult
    grid: object
    coarse: ReductionOutcome = None
    fine: FineOutcome = None
    queries: dict = field(default_factory=dict)
