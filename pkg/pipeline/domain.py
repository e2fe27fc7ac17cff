"""
Pipeline App - Domain Types

Attack instances, iterative-schedule rounds and attack reports.
"""

from dataclasses import dataclass, field

import numpy as np

from core.exceptions import InvalidArgumentError
from imaging.domain import Image, Mask, Perturbation
from imaging.services import ImagingService

COMPLETE, PARTIAL = 'complete', 'partial'
GENERATE, BORDER = 'generate', 'border'
NO_BOOST_GAIN, COLD_START = 'no-boost-gain', 'cold-start'


@dataclass(frozen=True, eq=False)
class AttackInstance:
    """
    Victim x, target example x_tar and target label y_adv.

    ``object`` is the object region at scene resolution;
    ``perturb_resolution`` is the (width, height) of the perturbation
    plane and defaults to the scene size.
    """

    victim: Image
    target_example: Image
    target_label: int
    object: np.ndarray
    perturb_resolution: tuple = None

    def __post_init__(self):
        if self.victim.data.shape != self.target_example.data.shape:
            raise InvalidArgumentError('Victim and target example must share a shape')
        obj = np.asarray(self.object, dtype=bool)
        if obj.shape != (self.victim.height, self.victim.width):
            raise InvalidArgumentError(
                f'Object grid {obj.shape} does not match the scene '
                f'{self.victim.height}x{self.victim.width}'
            )
        if not obj.any():
            raise InvalidArgumentError('Object region is empty')
        object.__setattr__(self, 'object', obj)
        resolution = self.perturb_resolution or (self.victim.width, self.victim.height)
        resolution = tuple(int(v) for v in resolution)
        if len(resolution) != 2 or min(resolution) < 1:
            raise InvalidArgumentError(f'Invalid perturbation resolution {resolution}')
        object.__setattr__(self, 'perturb_resolution', resolution)

    def plane_object(self):
        """The object region on the perturbation plane."""
        width, height = self.perturb_resolution
        return ImagingService.resample_grid_nearest(self.object, width, height)


@dataclass(frozen=True)
class Round:
    """
    One step of an iterative schedule.

    policy GENERATE runs mask generation at ``patch_size``; BORDER pins
    the mask to the object's border of ``border_width`` pixels.
    """

    patch_size: int = 4
    policy: str = GENERATE
    border_width: int = 2

    def __post_init__(self):
        if self.policy not in (GENERATE, BORDER):
            raise InvalidArgumentError(f'Unknown mask policy "{self.policy}"')
        if self.patch_size < 1 or self.border_width < 1:
            raise InvalidArgumentError('patch_size and border_width must be >= 1')

    @property
    def pinned(self):
        return self.policy != GENERATE

    @classmethod
    def parse(cls, text):
        """'8', '4' or 'border[:WIDTH]'."""
        text = str(text).strip()
        if text.startswith(BORDER):
            _, _, width = text.partition(':')
            return cls(policy=BORDER, border_width=int(width) if width else 2)
        try:
            return cls(patch_size=int(text))
        except ValueError:
            raise InvalidArgumentError(f'Invalid round "{text}": use a patch size or border[:WIDTH]') from None


DEFAULT_SCHEDULE = (Round(8), Round(4), Round(policy=BORDER))


@dataclass(frozen=True, eq=False)
class AttackReport:
    """
    Everything a run produced, minus the images themselves.

    ``survivability`` holds the attack-time estimate and the held-out
    figures of the post-mask and final images; ``ledger`` the attack's
    query accounting and ``evaluation`` the held-out queries.
    """

    status: str
    mask: Mask
    perturbation: Perturbation
    survivability: dict
    ledger: dict
    evaluation: dict
    config_hash: str
    seeds: dict
    flags: tuple = field(default_factory=tuple)
    boost: dict = field(default_factory=dict)
    rounds: tuple = field(default_factory=tuple)
    wall_clock: float = 0.0

    @property
    def mask_to_object_ratio(self):
        return self.mask.object_ratio()

    @property
    def heldout(self):
        return self.survivability.get('heldout')

    def to_dict(self):
        return {
            'status': self.status,
            'mask_pixels': self.mask.size(),
            'object_pixels': self.mask.object_size(),
            'mask_to_object_ratio': self.mask_to_object_ratio,
            'perturbation_l2': self.perturbation.norm(),
            'survivability': dict(self.survivability),
            'ledger': dict(self.ledger),
            'evaluation': dict(self.evaluation),
            'config_hash': self.config_hash,
            'seeds': dict(self.seeds),
            'flags': list(self.flags),
            'boost': dict(self.boost),
            'rounds': [dict(r) for r in self.rounds],
            'wall_clock': self.wall_clock,
        }

    @classmethod
    def from_dict(cls, data, mask, perturbation):
        return cls(
            status=data['status'],
            mask=mask,
            perturbation=perturbation,
            survivability=data['survivability'],
            ledger=data['ledger'],
            evaluation=data['evaluation'],
            config_hash=data['config_hash'],
            seeds=data['seeds'],
            flags=tuple(data['flags']),
            boost=data['boost'],
            rounds=tuple(data['rounds']),
            wall_clock=data['wall_clock'],
        )
