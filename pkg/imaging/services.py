"""
Imaging App - Services

Resampling, perturbation application and patch-grid operations.

Conventions used everywhere in the toolkit:
- bilinear resampling uses half-pixel centers (align-corners false):
  output index i samples source coordinate (i + 0.5) * in / out - 0.5,
  clamped to the valid index range;
- nearest resampling picks source index floor((i + 0.5) * in / out).
"""

import logging

import numpy as np

from core.exceptions import InvalidArgumentError
from .domain import Image, Mask, Patch, PatchGrid, Perturbation

logger = logging.getLogger('patch_attack')


def _bilinear_axis(in_n, out_n):
    """Neighbor indices and weights along one axis."""
    src = (np.arange(out_n) + 0.5) * (in_n / out_n) - 0.5
    src = np.clip(src, 0.0, in_n - 1)
    lo = np.floor(src).astype(np.intp)
    hi = np.minimum(lo + 1, in_n - 1)
    return lo, hi, src - lo


def _nearest_axis(in_n, out_n):
    idx = np.floor((np.arange(out_n) + 0.5) * (in_n / out_n)).astype(np.intp)
    return np.minimum(idx, in_n - 1)


class ImagingService:
    """Pure functions over imaging values."""

    @staticmethod
    def resample_bilinear(array, new_w, new_h):
        """
        Bilinearly resample an H x W (x C) array without clamping.

        Used directly for perturbations, which may be negative.
        """
        if new_w < 1 or new_h < 1:
            raise InvalidArgumentError(f'Target size must be >= 1, got {new_w}x{new_h}')
        arr = np.asarray(array, dtype=np.float64)
        in_h, in_w = arr.shape[:2]
        if in_h < 1 or in_w < 1:
            raise InvalidArgumentError(f'Cannot resample a zero-dimension array {arr.shape}')
        if (in_w, in_h) == (new_w, new_h):
            return arr.copy()

        y0, y1, wy = _bilinear_axis(in_h, new_h)
        x0, x1, wx = _bilinear_axis(in_w, new_w)
        extra = (np.newaxis,) * (arr.ndim - 2)

        wy = wy[(slice(None), np.newaxis) + extra]
        rows = arr[y0] * (1.0 - wy) + arr[y1] * wy
        wx = wx[(np.newaxis, slice(None)) + extra]
        return rows[:, x0] * (1.0 - wx) + rows[:, x1] * wx

    @staticmethod
    def resize_bilinear(img, new_w, new_h):
        """Resize an Image in either direction; identical dimensions return an equal image."""
        if (img.width, img.height) == (new_w, new_h):
            return img
        return Image(ImagingService.resample_bilinear(img.data, new_w, new_h))

    @staticmethod
    def resample_grid_nearest(grid, new_w, new_h):
        """Nearest-neighbor resampling of a binary grid, in either direction."""
        if new_w < 1 or new_h < 1:
            raise InvalidArgumentError(f'Target size must be >= 1, got {new_w}x{new_h}')
        grid = np.asarray(grid, dtype=bool)
        in_h, in_w = grid.shape
        if (in_w, in_h) == (new_w, new_h):
            return grid.copy()
        rows = _nearest_axis(in_h, new_h)
        cols = _nearest_axis(in_w, new_w)
        return grid[np.ix_(rows, cols)]

    @staticmethod
    def upsample_mask_nearest(m, new_w, new_h):
        """Upsample a Mask (bits and object) keeping it binary."""
        if new_w < m.width or new_h < m.height:
            raise InvalidArgumentError(
                f'upsample_mask_nearest cannot downsample {m.width}x{m.height} '
                f'to {new_w}x{new_h}'
            )
        if (new_w, new_h) == (m.width, m.height):
            return m
        return Mask(
            ImagingService.resample_grid_nearest(m.bits, new_w, new_h),
            ImagingService.resample_grid_nearest(m.object, new_w, new_h),
        )

    @staticmethod
    def to_plane(img, width, height):
        """Bring a scene image onto the perturbation plane."""
        return ImagingService.resize_bilinear(img, width, height)

    @staticmethod
    def plane_difference(x, x_tar, width, height):
        """
        delta_tar = x_tar - x expressed on the perturbation plane.

        Exact when the plane has scene resolution.
        """
        if x.channels != x_tar.channels or x.data.shape != x_tar.data.shape:
            raise InvalidArgumentError('Victim and target images must share a shape')
        diff = x_tar.data - x.data
        return Perturbation(ImagingService.resample_bilinear(diff, width, height))

    @staticmethod
    def apply_perturbation(x, m, d):
        """
        out = clamp(x + up(M) * up(delta), 0, 1).

        M is upsampled nearest and delta bilinearly to x's resolution.
        Pixels outside the upsampled mask are copied from x unchanged.
        """
        if (m.width, m.height) != (d.width, d.height):
            raise InvalidArgumentError(
                f'Mask {m.width}x{m.height} and perturbation {d.width}x{d.height} '
                'must share a grid'
            )
        if d.channels != x.channels:
            raise InvalidArgumentError(
                f'Channel mismatch: image has {x.channels}, perturbation has {d.channels}'
            )
        if (m.width, m.height) == (x.width, x.height):
            bits, delta = m.bits, d.delta
        else:
            bits = ImagingService.upsample_mask_nearest(m, x.width, x.height).bits
            delta = ImagingService.resample_bilinear(d.delta, x.width, x.height)

        gate = bits[:, :, np.newaxis]
        out = np.where(gate, np.clip(x.data + delta, 0.0, 1.0), x.data)
        return Image(out)

    @staticmethod
    def feasible_delta(x_plane, m, delta):
        """Clip delta so x + M * delta stays in [0, 1]; zero outside M."""
        clipped = np.clip(delta, -x_plane.data, 1.0 - x_plane.data)
        return Perturbation(clipped * m.bits[:, :, np.newaxis])

    @staticmethod
    def build_patch_grid(object_grid, patch_size, stride=None):
        """
        Enumerate square patches row-major over anchors spaced by stride.

        A trailing anchor is added on each axis when the regular anchors
        leave the last rows/cols uncovered, so the union covers the object
        whenever stride <= patch_size. Patches are clipped to the object and
        empty intersections dropped.
        """
        obj = np.asarray(object_grid, dtype=bool)
        if patch_size < 1:
            raise InvalidArgumentError(f'patch_size must be >= 1, got {patch_size}')
        stride = stride if stride is not None else max(1, patch_size // 2)
        if stride < 1:
            raise InvalidArgumentError(f'stride must be >= 1, got {stride}')
        if not obj.any():
            raise InvalidArgumentError('Cannot build a patch grid over an empty object region')

        height, width = obj.shape

        def anchors(extent):
            last = max(extent - patch_size, 0)
            points = list(range(0, last + 1, stride))
            if points[-1] != last:
                points.append(last)
            return points

        patches = []
        for row in anchors(height):
            for col in anchors(width):
                block = np.zeros_like(obj)
                block[row:row + patch_size, col:col + patch_size] = True
                block &= obj
                if block.any():
                    patches.append(Patch(len(patches), (row, col), block))

        logger.debug(
            f'Patch grid {width}x{height}: {len(patches)} patches '
            f'(size {patch_size}, stride {stride})'
        )
        return PatchGrid(patch_size, stride, tuple(patches), obj)

    @staticmethod
    def mask_minus(m, p):
        """Clear every pixel of p, regardless of overlap with other patches."""
        return Mask(m.bits & ~p.pixels, m.object)

    @staticmethod
    def mask_union(patches, object_grid):
        """Mask with exactly (union of patches) intersected with the object."""
        obj = np.asarray(object_grid, dtype=bool)
        bits = np.zeros_like(obj)
        for p in patches:
            bits |= p.pixels
        return Mask(bits & obj, obj)
