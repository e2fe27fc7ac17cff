"""
Transforms App - Services

Sampling and deterministic application of composite physical transforms.

Homography convention (also written into every exported trace):
the object plane spans [-1, 1] x [-1, 1] and fills the input frame; it is
rotated by theta about the vertical axis, placed at distance dist along
the optical axis and projected through a pinhole with focal length f,
principal point at the frame center. H is normalized so H[2, 2] = 1,
hence theta = 0 and dist = f give exactly the identity. Pixel centers
sit at (col + 0.5, row + 0.5).
"""

import json
import logging
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy import ndimage

from core.exceptions import InvalidArgumentError, TransformDegenerateError
from imaging.domain import Image
from .domain import TransformDistribution, TransformParams

logger = logging.getLogger('patch_attack')

HOMOGRAPHY_CONVENTION = 'plane[-1,1]-rot_y-pinhole-center-pp/h22=1'

MAX_REDRAWS = 100


def _bilinear_sample(data, rows, cols, fill=None):
    """
    Sample data (H x W x C) at fractional index positions.

    Positions farther than half a pixel outside the frame take ``fill``;
    inside, neighbors are clamped to the frame (edge replicate).
    """
    height, width = data.shape[:2]
    inside = (cols >= -0.5) & (cols <= width - 0.5) & (rows >= -0.5) & (rows <= height - 0.5)
    r = np.clip(rows, 0.0, height - 1)
    c = np.clip(cols, 0.0, width - 1)
    r0 = np.floor(r).astype(np.intp)
    c0 = np.floor(c).astype(np.intp)
    r1 = np.minimum(r0 + 1, height - 1)
    c1 = np.minimum(c0 + 1, width - 1)
    wr = (r - r0)[..., np.newaxis]
    wc = (c - c0)[..., np.newaxis]
    top = data[r0, c0] * (1.0 - wc) + data[r0, c1] * wc
    bottom = data[r1, c0] * (1.0 - wc) + data[r1, c1] * wc
    out = top * (1.0 - wr) + bottom * wr
    if fill is not None:
        out = np.where(inside[..., np.newaxis], out, fill)
    return out


def _gaussian_weights(kernel):
    sigma = kernel / 6.0
    radius = kernel // 2
    offsets = np.arange(-radius, radius + 1, dtype=np.float64)
    weights = np.exp(-0.5 * (offsets / sigma) ** 2)
    return weights / weights.sum()


def _object_bounds(object_grid):
    """Continuous bounding box (x0, y0, x1, y1) of the object region."""
    rows = np.flatnonzero(object_grid.any(axis=1))
    cols = np.flatnonzero(object_grid.any(axis=0))
    if rows.size == 0:
        raise InvalidArgumentError('Object region is empty')
    return float(cols[0]), float(rows[0]), float(cols[-1] + 1), float(rows[-1] + 1)


@lru_cache(maxsize=64)
def _cached_sequence(dist, seed, n, object_key):
    if object_key is None:
        object_grid = None
    else:
        shape, packed = object_key
        object_grid = np.unpackbits(
            np.frombuffer(packed, dtype=np.uint8), count=shape[0] * shape[1]
        ).reshape(shape).astype(bool)
    return tuple(
        TransformService.sample_valid(dist, seed, index, object_grid) for index in range(n)
    )


class TransformService:
    """Service class for transform sampling and application."""

    @staticmethod
    def generator(seed, index):
        """Independent generator for transform ``index`` under a master seed."""
        if seed < 0 or index < 0:
            raise InvalidArgumentError(f'Seeds must be non-negative, got ({seed}, {index})')
        return np.random.default_rng([int(seed), int(index)])

    @staticmethod
    def sample(dist, rng, seed=0, index=0):
        """
        Draw one TransformParams.

        theta, dist and the crop fields are uniform in range; gamma picks
        [1/gamma_max, 1] or [1, gamma_max] with a fair coin, then uniform
        within; the blur kernel is uniform over the list.
        """
        u = rng.random(8)
        theta = dist.rot_y_max * (2.0 * u[0] - 1.0) if dist.rot_y_max else 0.0
        distance = dist.focal_f + (dist.distance_max - dist.focal_f) * u[1]
        c = dist.crop_percent_max
        crop_scale = c * (2.0 * u[2] - 1.0) if c else 0.0
        offset_x = c * (2.0 * u[3] - 1.0) if c else 0.0
        offset_y = c * (2.0 * u[4] - 1.0) if c else 0.0
        g = dist.gamma_max
        if u[5] < 0.5:
            gamma = 1.0 / g + (1.0 - 1.0 / g) * u[6]
        else:
            gamma = 1.0 + (g - 1.0) * u[6]
        kernels = dist.blur_kernels
        kernel = kernels[min(int(u[7] * len(kernels)), len(kernels) - 1)]
        return TransformParams(
            theta=float(theta),
            dist=float(distance),
            focal_f=dist.focal_f,
            crop_scale=float(crop_scale),
            crop_offset_x=float(offset_x),
            crop_offset_y=float(offset_y),
            gamma=float(gamma),
            kernel=int(kernel),
            background=dist.background,
            seed=int(seed),
            index=int(index),
        )

    @staticmethod
    def sample_valid(dist, seed, index, object_grid=None):
        """
        Draw transform ``index``, redrawing (same generator) while the
        object would be projected out of frame.
        """
        rng = TransformService.generator(seed, index)
        for redraw in range(MAX_REDRAWS + 1):
            params = TransformService.sample(dist, rng, seed, index)
            if object_grid is None:
                return params
            try:
                TransformService.crop_box(params, object_grid)
            except TransformDegenerateError:
                continue
            if redraw:
                logger.warning(f'Transform {seed}/{index} redrawn {redraw} times (degenerate crop)')
                params = TransformParams(**{**params.to_dict(), 'redraws': redraw})
            return params
        raise TransformDegenerateError(
            f'Transform {seed}/{index} stayed degenerate after {MAX_REDRAWS} redraws'
        )

    @staticmethod
    def sample_sequence(dist, seed, n, object_grid=None):
        """The seeded sequence t_1..t_n; identical seeds give identical sequences."""
        if n < 0:
            raise InvalidArgumentError(f'n must be non-negative, got {n}')
        key = None
        if object_grid is not None:
            grid = np.asarray(object_grid, dtype=bool)
            key = (grid.shape, np.packbits(grid).tobytes())
        return list(_cached_sequence(dist, int(seed), int(n), key))

    @staticmethod
    def build_homography(theta, dist, f):
        """
        H = A P R for a plane rotated by theta (degrees) about the vertical
        axis at distance dist, seen through a pinhole of focal length f.
        """
        if f <= 0:
            raise InvalidArgumentError(f'Focal length must be positive, got {f}')
        if dist < f:
            raise InvalidArgumentError(f'Distance {dist} must be >= focal length {f}')
        if abs(theta) >= 90:
            raise InvalidArgumentError(f'Rotation {theta} deg makes the homography singular')
        if theta == 0 and dist == f:
            return np.eye(3)
        t = np.deg2rad(theta)
        # R: rotation about y, then translation by dist along the optical axis
        rotate_translate = np.array([
            [np.cos(t), 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [-np.sin(t), 0.0, dist],
        ])
        project = np.diag([f, f, 1.0])
        h = project @ rotate_translate
        return h / h[2, 2]

    @staticmethod
    def pixel_homography(h, width, height):
        """Express a plane homography in continuous pixel coordinates."""
        k = np.array([[width / 2.0, 0.0, width / 2.0], [0.0, height / 2.0, height / 2.0], [0.0, 0.0, 1.0]])
        k_inv = np.array([[2.0 / width, 0.0, -1.0], [0.0, 2.0 / height, -1.0], [0.0, 0.0, 1.0]])
        return k @ h @ k_inv

    @staticmethod
    def map_points(hp, points):
        """Forward-map (x, y) pixel points; raises if any lands behind the camera."""
        pts = np.column_stack([np.asarray(points, dtype=np.float64), np.ones(len(points))])
        mapped = pts @ hp.T
        if np.any(mapped[:, 2] <= 1e-12):
            raise TransformDegenerateError('Object corner projects behind the camera')
        return mapped[:, :2] / mapped[:, 2:3]

    @staticmethod
    def _params_pixel_homography(params, width, height):
        if params.is_geometric_identity():
            return np.eye(3)
        h = TransformService.build_homography(params.theta, params.dist, params.focal_f)
        return TransformService.pixel_homography(h, width, height)

    @staticmethod
    def warped_object_bbox(params, object_grid):
        """Bounding box (x0, y0, x1, y1) of the forward-mapped object corners."""
        grid = np.asarray(object_grid, dtype=bool)
        height, width = grid.shape
        x0, y0, x1, y1 = _object_bounds(grid)
        if params.is_geometric_identity():
            return x0, y0, x1, y1
        hp = TransformService._params_pixel_homography(params, width, height)
        corners = TransformService.map_points(hp, [(x0, y0), (x1, y0), (x0, y1), (x1, y1)])
        return (
            float(corners[:, 0].min()), float(corners[:, 1].min()),
            float(corners[:, 0].max()), float(corners[:, 1].max()),
        )

    @staticmethod
    def crop_box(params, object_grid):
        """
        Crop rectangle (x0, y0, x1, y1) in warped-frame pixels.

        The frame keeps the margins it had around the object's tight
        square before warping, re-centered on the warped object's tight
        square and scaled with it; then scaled by (1 + crop_scale),
        shifted by the offsets (fractions of the box size) and clipped.
        """
        grid = np.asarray(object_grid, dtype=bool)
        height, width = grid.shape
        ox0, oy0, ox1, oy1 = _object_bounds(grid)
        wx0, wy0, wx1, wy1 = TransformService.warped_object_bbox(params, grid)
        if wx1 <= 0 or wy1 <= 0 or wx0 >= width or wy0 >= height:
            raise TransformDegenerateError('Warped object lies fully out of frame')

        side0 = max(ox1 - ox0, oy1 - oy0)
        side_w = max(wx1 - wx0, wy1 - wy0)
        scale = side_w / side0
        ocx, ocy = (ox0 + ox1) / 2.0, (oy0 + oy1) / 2.0
        wcx, wcy = (wx0 + wx1) / 2.0, (wy0 + wy1) / 2.0

        bx0 = wcx + (0.0 - ocx) * scale
        bx1 = wcx + (width - ocx) * scale
        by0 = wcy + (0.0 - ocy) * scale
        by1 = wcy + (height - ocy) * scale

        if params.crop_scale or params.crop_offset_x or params.crop_offset_y:
            cx = (bx0 + bx1) / 2.0 + params.crop_offset_x * (bx1 - bx0)
            cy = (by0 + by1) / 2.0 + params.crop_offset_y * (by1 - by0)
            half_w = (bx1 - bx0) * (1.0 + params.crop_scale) / 2.0
            half_h = (by1 - by0) * (1.0 + params.crop_scale) / 2.0
            bx0, bx1, by0, by1 = cx - half_w, cx + half_w, cy - half_h, cy + half_h

        bx0, by0 = max(bx0, 0.0), max(by0, 0.0)
        bx1, by1 = min(bx1, float(width)), min(by1, float(height))
        if bx1 - bx0 < 1e-6 or by1 - by0 < 1e-6:
            raise TransformDegenerateError('Crop box is empty after clipping to the frame')
        return bx0, by0, bx1, by1

    @staticmethod
    def warp(params, data, background=None):
        """Stage 1: inverse-warp H x W x C data, filling out-of-frame pixels."""
        if params.is_geometric_identity():
            return data
        fill = params.background if background is None else background
        height, width = data.shape[:2]
        hp = TransformService._params_pixel_homography(params, width, height)
        inv = np.linalg.inv(hp)
        rows, cols = np.mgrid[0:height, 0:width]
        targets = np.stack([cols + 0.5, rows + 0.5, np.ones_like(cols, dtype=np.float64)], axis=-1)
        src = targets @ inv.T
        w = src[..., 2]
        valid = w > 1e-12
        safe_w = np.where(valid, w, 1.0)
        src_cols = np.where(valid, src[..., 0] / safe_w - 0.5, -np.inf)
        src_rows = np.where(valid, src[..., 1] / safe_w - 0.5, -np.inf)
        src_cols = np.nan_to_num(src_cols, neginf=-1e9, posinf=1e9)
        src_rows = np.nan_to_num(src_rows, neginf=-1e9, posinf=1e9)
        return _bilinear_sample(data, src_rows, src_cols, fill=fill)

    @staticmethod
    def crop_and_resize(data, box):
        """Stages 2-3: sample the crop box back onto the full frame."""
        height, width = data.shape[:2]
        x0, y0, x1, y1 = box
        if (x0, y0, x1, y1) == (0.0, 0.0, float(width), float(height)):
            return data
        cols = x0 + (np.arange(width) + 0.5) * ((x1 - x0) / width) - 0.5
        rows = y0 + (np.arange(height) + 0.5) * ((y1 - y0) / height) - 0.5
        grid_rows, grid_cols = np.meshgrid(rows, cols, indexing='ij')
        return _bilinear_sample(data, grid_rows, grid_cols)

    @staticmethod
    def gamma(data, gamma):
        """Stage 4: v -> v ** gamma."""
        if gamma == 1.0:
            return data
        return np.power(data, gamma)

    @staticmethod
    def blur(data, kernel):
        """Stage 5: Gaussian blur, sigma = kernel / 6, edge-replicate padding."""
        if kernel <= 1:
            return data
        weights = _gaussian_weights(kernel)
        out = ndimage.convolve1d(data, weights, axis=0, mode='nearest')
        return ndimage.convolve1d(out, weights, axis=1, mode='nearest')

    @staticmethod
    def apply(params, x, object_grid):
        """
        t(x): perspective warp -> crop -> resize -> gamma -> blur.

        ``object_grid`` is the object region at x's resolution.
        """
        grid = np.asarray(object_grid, dtype=bool)
        if grid.shape != (x.height, x.width):
            raise InvalidArgumentError(
                f'Object grid {grid.shape} does not match image {x.height}x{x.width}'
            )
        if not grid.any():
            raise InvalidArgumentError('Object region is empty')
        box = TransformService.crop_box(params, grid)
        data = TransformService.warp(params, x.data)
        data = TransformService.crop_and_resize(data, box)
        data = TransformService.gamma(np.clip(data, 0.0, 1.0), params.gamma)
        data = TransformService.blur(data, params.kernel)
        return Image(data)

    @staticmethod
    def export_trace(params_list, path, dist=None):
        """Write a transform trace as line-delimited JSON for exact replay."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        header = {'kind': 'transform-trace', 'convention': HOMOGRAPHY_CONVENTION}
        if dist is not None:
            header['distribution'] = dist.to_dict()
        with path.open('w', encoding='utf-8', newline='\n') as handle:
            handle.write(json.dumps(header, sort_keys=True) + '\n')
            for params in params_list:
                handle.write(json.dumps(params.to_dict(), sort_keys=True) + '\n')
        return path

    @staticmethod
    def import_trace(path):
        """Read a trace written by export_trace; returns (params list, distribution or None)."""
        lines = Path(path).read_text(encoding='utf-8').splitlines()
        if not lines:
            raise InvalidArgumentError(f'Trace file {path} is empty')
        header = json.loads(lines[0])
        if header.get('kind') != 'transform-trace':
            raise InvalidArgumentError(f'{path} is not a transform trace')
        if header.get('convention') != HOMOGRAPHY_CONVENTION:
            raise InvalidArgumentError(
                f'Trace convention "{header.get("convention")}" differs from '
                f'"{HOMOGRAPHY_CONVENTION}"; replay would not be exact'
            )
        dist = header.get('distribution')
        params = [TransformParams.from_dict(json.loads(line)) for line in lines[1:] if line.strip()]
        return params, (TransformDistribution.from_dict(dist) if dist else None)
