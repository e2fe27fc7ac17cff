"""
Transforms App - Domain Types

Distribution T over composite physical transforms and one sample t ~ T.
"""

from dataclasses import dataclass, asdict, field

from core.exceptions import InvalidArgumentError


@dataclass(frozen=True)
class TransformDistribution:
    """
    Ranges of the perspective + crop + gamma + blur transform.

    Distances are in scene units; the object plane spans [-1, 1] in the
    same units (see TransformService.build_homography).
    """

    rot_y_max: float = 50.0
    focal_f: float = 3.0
    distance_max: float = 15.0
    crop_percent_max: float = 0.03125
    gamma_max: float = 3.5
    blur_kernels: tuple = (1, 5, 9)
    background: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, 'blur_kernels', tuple(int(k) for k in self.blur_kernels))
        if self.focal_f <= 0:
            raise InvalidArgumentError(f'focal_f must be positive, got {self.focal_f}')
        if self.distance_max < self.focal_f:
            raise InvalidArgumentError(
                f'distance range [{self.focal_f}, {self.distance_max}] is empty'
            )
        if not 0 <= self.rot_y_max < 90:
            raise InvalidArgumentError(f'rot_y_max must be in [0, 90), got {self.rot_y_max}')
        if not 0 <= self.crop_percent_max < 0.5:
            raise InvalidArgumentError(
                f'crop_percent_max must be in [0, 0.5), got {self.crop_percent_max}'
            )
        if self.gamma_max < 1:
            raise InvalidArgumentError(f'gamma_max must be >= 1, got {self.gamma_max}')
        if not self.blur_kernels or any(k < 1 or k % 2 == 0 for k in self.blur_kernels):
            raise InvalidArgumentError(
                f'blur kernels must be odd and >= 1, got {self.blur_kernels}'
            )
        if not 0 <= self.background <= 1:
            raise InvalidArgumentError(f'background must be in [0, 1], got {self.background}')

    @property
    def distance_range(self):
        return (self.focal_f, self.distance_max)

    def to_dict(self):
        data = asdict(self)
        data['blur_kernels'] = list(self.blur_kernels)
        return data

    @classmethod
    def from_dict(cls, data):
        return cls(**data)

    @classmethod
    def preset(cls, name, **overrides):
        try:
            base = PRESETS[name]
        except KeyError:
            raise InvalidArgumentError(
                f'Unknown transform preset "{name}". Choose from: {", ".join(sorted(PRESETS))}'
            )
        data = base.to_dict()
        data.update(overrides)
        return cls.from_dict(data)


@dataclass(frozen=True)
class TransformParams:
    """One sampled transform, with the (seed, index) it was drawn from."""

    theta: float = 0.0
    dist: float = 1.0
    focal_f: float = 1.0
    crop_scale: float = 0.0
    crop_offset_x: float = 0.0
    crop_offset_y: float = 0.0
    gamma: float = 1.0
    kernel: int = 1
    background: float = 0.5
    seed: int = 0
    index: int = 0
    redraws: int = field(default=0, compare=False)

    @classmethod
    def identity(cls, focal_f=1.0, background=0.5):
        return cls(dist=focal_f, focal_f=focal_f, background=background)

    def is_geometric_identity(self):
        return self.theta == 0.0 and self.dist == self.focal_f

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        return cls(**data)


PRESETS = {
    'gtsrb': TransformDistribution(
        rot_y_max=50.0, focal_f=3.0, distance_max=15.0,
        crop_percent_max=0.03125, gamma_max=3.5, blur_kernels=(1, 5, 9),
    ),
    'alpr': TransformDistribution(
        rot_y_max=15.0, focal_f=10.0, distance_max=15.0,
        crop_percent_max=0.03125, gamma_max=3.5, blur_kernels=(1, 3, 5),
    ),
    'imagenet': TransformDistribution(
        rot_y_max=15.0, focal_f=3.0, distance_max=5.0,
        crop_percent_max=0.03125, gamma_max=1.5, blur_kernels=(1, 5, 9),
    ),
    'identity': TransformDistribution(
        rot_y_max=0.0, focal_f=1.0, distance_max=1.0,
        crop_percent_max=0.0, gamma_max=1.0, blur_kernels=(1,),
    ),
}
