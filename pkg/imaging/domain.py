"""
Imaging App - Domain Types

Images, masks, perturbations and patch grids.
All values are immutable after construction (arrays are made read-only).
Grids are row-major: arrays are indexed [row, col(, channel)].
"""

import hashlib
from dataclasses import dataclass

import numpy as np

from core.exceptions import InvalidArgumentError


def _frozen(array):
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class Image:
    """
    H x W x C grid of intensities in [0, 1].

    Values are clamped on construction, so every public operation that
    returns an Image returns an in-range one.
    """

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[:, :, np.newaxis]
        if arr.ndim != 3 or arr.shape[2] not in (1, 3):
            raise InvalidArgumentError(
                f'Image data must be HxW, HxWx1 or HxWx3, got shape {arr.shape}'
            )
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise InvalidArgumentError(f'Image has a zero dimension: {arr.shape}')
        if not np.all(np.isfinite(arr)):
            raise InvalidArgumentError('Image contains non-finite intensities')
        object.__setattr__(self, 'data', _frozen(np.clip(arr, 0.0, 1.0)))

    @property
    def width(self):
        return self.data.shape[1]

    @property
    def height(self):
        return self.data.shape[0]

    @property
    def channels(self):
        return self.data.shape[2]

    @classmethod
    def constant(cls, width, height, value, channels=1):
        return cls(np.full((height, width, channels), float(value)))

    def digest(self):
        """SHA-256 over shape and raw intensities; cache key for oracles."""
        h = hashlib.sha256()
        h.update(repr(self.data.shape).encode())
        h.update(np.ascontiguousarray(self.data).tobytes())
        return h.hexdigest()

    def equals(self, other):
        return self.data.shape == other.data.shape and np.array_equal(self.data, other.data)


@dataclass(frozen=True, eq=False)
class Mask:
    """
    Binary mask M on the perturbation plane, confined to the object region.

    Invariant: bits is a subset of object.
    """

    bits: np.ndarray
    object: np.ndarray

    def __post_init__(self):
        bits = np.array(self.bits, dtype=bool)
        obj = np.array(self.object, dtype=bool)
        if bits.ndim != 2 or bits.shape != obj.shape:
            raise InvalidArgumentError(
                f'Mask bits {bits.shape} and object {obj.shape} must be equal 2-D grids'
            )
        if np.any(bits & ~obj):
            raise InvalidArgumentError('Mask has bits set outside the object region')
        object.__setattr__(self, 'bits', _frozen(bits))
        object.__setattr__(self, 'object', _frozen(obj))

    @property
    def width(self):
        return self.bits.shape[1]

    @property
    def height(self):
        return self.bits.shape[0]

    @classmethod
    def full(cls, object_grid):
        obj = np.asarray(object_grid, dtype=bool)
        return cls(obj.copy(), obj)

    @classmethod
    def empty(cls, object_grid):
        obj = np.asarray(object_grid, dtype=bool)
        return cls(np.zeros_like(obj), obj)

    def size(self):
        """Number of set bits, ||M||_0."""
        return int(self.bits.sum())

    def object_size(self):
        return int(self.object.sum())

    def object_ratio(self):
        """Mask-to-object ratio."""
        total = self.object_size()
        return self.size() / total if total else 0.0

    def equals(self, other):
        return np.array_equal(self.bits, other.bits) and np.array_equal(self.object, other.object)


@dataclass(frozen=True, eq=False)
class Perturbation:
    """Real-valued delta on the perturbation plane; may be negative."""

    delta: np.ndarray

    def __post_init__(self):
        arr = np.array(self.delta, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[:, :, np.newaxis]
        if arr.ndim != 3:
            raise InvalidArgumentError(f'Perturbation must be HxWxC, got shape {arr.shape}')
        if not np.all(np.isfinite(arr)):
            raise InvalidArgumentError('Perturbation contains non-finite values')
        object.__setattr__(self, 'delta', _frozen(arr))

    @property
    def width(self):
        return self.delta.shape[1]

    @property
    def height(self):
        return self.delta.shape[0]

    @property
    def channels(self):
        return self.delta.shape[2]

    @classmethod
    def zeros(cls, width, height, channels=1):
        return cls(np.zeros((height, width, channels)))

    def gated(self, mask):
        """Zero every value outside the mask."""
        return Perturbation(self.delta * mask.bits[:, :, np.newaxis])

    def norm(self):
        return float(np.linalg.norm(self.delta))


@dataclass(frozen=True, eq=False)
class Patch:
    """A patch: square block anchored at (row, col), clipped to the object."""

    index: int
    anchor: tuple
    pixels: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'pixels', _frozen(np.array(self.pixels, dtype=bool)))

    @property
    def size(self):
        return int(self.pixels.sum())


@dataclass(frozen=True, eq=False)
class PatchGrid:
    """Ordered patches over an object region (row-major anchor order)."""

    patch_size: int
    stride: int
    patches: tuple
    object: np.ndarray

    def __len__(self):
        return len(self.patches)

    def __iter__(self):
        return iter(self.patches)

    def __getitem__(self, index):
        return self.patches[index]
