"""
Transforms App - Tests

Test cases for transform sampling, homographies and application.
"""

import json
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from core.exceptions import InvalidArgumentError, TransformDegenerateError
from imaging.domain import Image
from .domain import TransformDistribution, TransformParams
from .services import TransformService


def _centered_object(size=32, margin=8):
    grid = np.zeros((size, size), dtype=bool)
    grid[margin:size - margin, margin:size - margin] = True
    return grid


class TransformDistributionTests(SimpleTestCase):
    """Test cases for distribution validation and presets."""

    def test_presets_available(self):
        """Test that every named preset builds."""
        for name in ('gtsrb', 'alpr', 'imagenet', 'identity'):
            self.assertIsInstance(TransformDistribution.preset(name), TransformDistribution)

    def test_unknown_preset_rejected(self):
        """Test that an unknown preset name is rejected."""
        with self.assertRaises(InvalidArgumentError):
            TransformDistribution.preset('mnist')

    def test_even_kernel_rejected(self):
        """Test that blur kernels must be odd."""
        with self.assertRaises(InvalidArgumentError):
            TransformDistribution(blur_kernels=(1, 4))

    def test_preset_override(self):
        """Test that a preset value can be overridden."""
        dist = TransformDistribution.preset('gtsrb', gamma_max=2.0)
        self.assertEqual(dist.gamma_max, 2.0)
        self.assertEqual(dist.rot_y_max, 50.0)


class TransformSamplingTests(SimpleTestCase):
    """Test cases for seeded sampling."""

    def test_same_seed_same_sequence(self):
        """Test that identical seeds give identical transform sequences."""
        dist = TransformDistribution.preset('gtsrb')
        first = TransformService.sample_sequence(dist, 11, 20)
        second = TransformService.sample_sequence(dist, 11, 20)
        self.assertEqual(first, second)

    def test_different_seed_different_sequence(self):
        """Test that different seeds give different sequences."""
        dist = TransformDistribution.preset('gtsrb')
        self.assertNotEqual(
            TransformService.sample_sequence(dist, 1, 5),
            TransformService.sample_sequence(dist, 2, 5),
        )

    def test_prefix_stable_across_n(self):
        """Test that transform i does not depend on how many are drawn."""
        dist = TransformDistribution.preset('alpr')
        short = TransformService.sample_sequence(dist, 4, 3)
        long = TransformService.sample_sequence(dist, 4, 10)
        self.assertEqual(short, long[:3])

    def test_samples_within_ranges(self):
        """Test that every sampled field stays inside the distribution."""
        dist = TransformDistribution.preset('gtsrb')
        for params in TransformService.sample_sequence(dist, 0, 500):
            self.assertLessEqual(abs(params.theta), 50.0)
            self.assertGreaterEqual(params.dist, 3.0)
            self.assertLessEqual(params.dist, 15.0)
            self.assertLessEqual(abs(params.crop_scale), 0.03125)
            self.assertLessEqual(abs(params.crop_offset_x), 0.03125)
            self.assertGreaterEqual(params.gamma, 1 / 3.5)
            self.assertLessEqual(params.gamma, 3.5)
            self.assertIn(params.kernel, (1, 5, 9))

    def test_gamma_coin_is_fair(self):
        """Test that half of the gammas darken and half brighten."""
        dist = TransformDistribution.preset('gtsrb')
        rng = np.random.default_rng(123)
        below = sum(TransformService.sample(dist, rng).gamma < 1.0 for _ in range(100_000))
        self.assertAlmostEqual(below / 100_000, 0.5, delta=0.01)

    def test_identity_distribution_samples_identity(self):
        """Test that the identity preset only yields identity transforms."""
        dist = TransformDistribution.preset('identity')
        for params in TransformService.sample_sequence(dist, 3, 10):
            self.assertTrue(params.is_geometric_identity())
            self.assertEqual(params.gamma, 1.0)
            self.assertEqual(params.kernel, 1)

    def test_negative_seed_rejected(self):
        """Test that negative seeds are rejected."""
        with self.assertRaises(InvalidArgumentError):
            TransformService.generator(-1, 0)


class HomographyTests(SimpleTestCase):
    """Test cases for the perspective homography."""

    def test_identity_at_focal_distance(self):
        """Test that theta 0 at distance f gives the identity."""
        np.testing.assert_allclose(TransformService.build_homography(0, 3, 3), np.eye(3))

    def test_double_distance_halves_scale(self):
        """Test that doubling the distance halves the projected object."""
        h = TransformService.build_homography(0, 6, 3)
        point = h @ np.array([1.0, 1.0, 1.0])
        np.testing.assert_allclose(point[:2] / point[2], [0.5, 0.5])

    def test_rotated_corners_match_projection(self):
        """Test corner mapping against an explicit rotate-translate-project."""
        theta, dist, f = 30.0, 5.0, 3.0
        h = TransformService.build_homography(theta, dist, f)
        t = np.deg2rad(theta)
        for x, y in [(-1, -1), (1, -1), (-1, 1), (1, 1), (0.25, -0.5)]:
            cam_x = x * np.cos(t)
            cam_z = -x * np.sin(t) + dist
            expected = (f * cam_x / cam_z, f * y / cam_z)
            mapped = h @ np.array([x, y, 1.0])
            np.testing.assert_allclose(mapped[:2] / mapped[2], expected, atol=1e-12)

    def test_right_angle_rejected(self):
        """Test that a 90 degree rotation is rejected."""
        with self.assertRaises(InvalidArgumentError):
            TransformService.build_homography(90, 5, 3)

    def test_distance_below_focal_rejected(self):
        """Test that a distance below the focal length is rejected."""
        with self.assertRaises(InvalidArgumentError):
            TransformService.build_homography(0, 2, 3)


class TransformApplicationTests(SimpleTestCase):
    """Test cases for TransformService.apply."""

    def setUp(self):
        rng = np.random.default_rng(0)
        self.image = Image(rng.random((32, 32, 3)))
        self.object = _centered_object()

    def test_identity_transform_is_identity(self):
        """Test that identity params leave the image unchanged."""
        params = TransformParams.identity(focal_f=3.0)
        out = TransformService.apply(params, self.image, self.object)
        np.testing.assert_allclose(out.data, self.image.data, atol=1e-6)

    def test_identity_crop_box_is_frame(self):
        """Test that the crop box is the whole frame at identity."""
        box = TransformService.crop_box(TransformParams.identity(), self.object)
        self.assertEqual(box, (0.0, 0.0, 32.0, 32.0))

    def test_gamma_on_constant_image(self):
        """Test that a constant 0.25 image with gamma 2 becomes 0.0625."""
        params = TransformParams(dist=3.0, focal_f=3.0, gamma=2.0)
        out = TransformService.apply(params, Image.constant(32, 32, 0.25), self.object)
        np.testing.assert_allclose(out.data, 0.0625, atol=1e-9)

    def test_constant_field_survives_full_chain(self):
        """Test that a constant scene with matching background stays constant."""
        params = TransformParams(
            theta=25.0, dist=6.0, focal_f=3.0, crop_scale=0.02,
            crop_offset_x=-0.01, crop_offset_y=0.02, gamma=1.7, kernel=9, background=0.4,
        )
        out = TransformService.apply(params, Image.constant(32, 32, 0.4, channels=3), self.object)
        np.testing.assert_allclose(out.data, 0.4 ** 1.7, atol=1e-9)

    def test_output_in_range_and_shape(self):
        """Test that transformed images keep shape and stay in [0, 1]."""
        dist = TransformDistribution.preset('gtsrb')
        for params in TransformService.sample_sequence(dist, 5, 10, self.object):
            out = TransformService.apply(params, self.image, self.object)
            self.assertEqual(out.data.shape, self.image.data.shape)
            self.assertGreaterEqual(out.data.min(), 0.0)
            self.assertLessEqual(out.data.max(), 1.0)

    def test_same_params_same_output(self):
        """Test that application is deterministic."""
        params = TransformService.sample_sequence(TransformDistribution.preset('gtsrb'), 9, 1)[0]
        first = TransformService.apply(params, self.image, self.object)
        second = TransformService.apply(params, self.image, self.object)
        self.assertTrue(first.equals(second))

    def test_warped_bbox_matches_forward_corners(self):
        """Test that the warped object's extent matches its forward-mapped corners."""
        params = TransformParams(theta=30.0, dist=4.0, focal_f=3.0, background=0.0)
        indicator = self.object.astype(np.float64)[:, :, np.newaxis]
        warped = TransformService.warp(params, indicator)[:, :, 0] > 0.5
        rows = np.flatnonzero(warped.any(axis=1))
        cols = np.flatnonzero(warped.any(axis=0))
        x0, y0, x1, y1 = TransformService.warped_object_bbox(params, self.object)
        self.assertLessEqual(abs(cols[0] - x0), 1.0)
        self.assertLessEqual(abs(cols[-1] + 1 - x1), 1.0)
        self.assertLessEqual(abs(rows[0] - y0), 1.0)
        self.assertLessEqual(abs(rows[-1] + 1 - y1), 1.0)

    def test_crop_outside_frame_is_degenerate(self):
        """Test that a crop box shifted off the frame is degenerate."""
        params = TransformParams(dist=3.0, focal_f=3.0, crop_offset_x=2.0)
        with self.assertRaises(TransformDegenerateError):
            TransformService.crop_box(params, self.object)

    def test_mismatched_object_grid_rejected(self):
        """Test that the object grid must match the image size."""
        with self.assertRaises(InvalidArgumentError):
            TransformService.apply(TransformParams.identity(), self.image, np.ones((8, 8), bool))

    def test_blur_kernel_one_is_noop(self):
        """Test that kernel 1 leaves data untouched."""
        data = self.image.data
        self.assertIs(TransformService.blur(data, 1), data)


class TransformTraceTests(SimpleTestCase):
    """Test cases for trace export and replay."""

    def test_trace_replays_exactly(self):
        """Test that an exported trace reproduces the sampled transforms."""
        dist = TransformDistribution.preset('alpr')
        params = TransformService.sample_sequence(dist, 2, 4)
        with tempfile.TemporaryDirectory() as tmp:
            path = TransformService.export_trace(params, Path(tmp) / 'trace.ndjson', dist)
            replayed, replay_dist = TransformService.import_trace(path)
        self.assertEqual(replayed, params)
        self.assertEqual(replay_dist, dist)

    def test_foreign_convention_rejected(self):
        """Test that a trace written under another convention is refused."""
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'trace.ndjson'
            path.write_text(json.dumps({'kind': 'transform-trace', 'convention': 'other'}) + '\n')
            with self.assertRaises(InvalidArgumentError):
                TransformService.import_trace(path)
