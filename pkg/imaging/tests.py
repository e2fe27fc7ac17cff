"""
Imaging App - Tests

Test cases for resampling, perturbation application and patch grids.
"""

import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from core.exceptions import InvalidArgumentError
from .domain import Image, Mask, Perturbation
from .files import decode_png, encode_png, load_grid, load_image, save_grid, save_image
from .services import ImagingService


def _scalar_bilinear(values, out_n):
    """Independent half-pixel bilinear interpolation of a 1-D signal."""
    in_n = len(values)
    result = []
    for i in range(out_n):
        src = (i + 0.5) * in_n / out_n - 0.5
        src = min(max(src, 0.0), in_n - 1)
        lo = int(np.floor(src))
        hi = min(lo + 1, in_n - 1)
        frac = src - lo
        result.append(values[lo] * (1 - frac) + values[hi] * frac)
    return result


class ImageTypeTests(SimpleTestCase):
    """Test cases for the Image and Mask invariants."""

    def test_intensities_clamped(self):
        """Test that out-of-range intensities are clamped on construction."""
        img = Image(np.array([[-0.5, 0.3, 1.7]]))
        np.testing.assert_array_equal(img.data[:, :, 0], [[0.0, 0.3, 1.0]])

    def test_image_is_read_only(self):
        """Test that image data cannot be mutated after construction."""
        img = Image.constant(2, 2, 0.5)
        with self.assertRaises(ValueError):
            img.data[0, 0, 0] = 1.0

    def test_non_finite_rejected(self):
        """Test that NaN intensities are rejected."""
        with self.assertRaises(InvalidArgumentError):
            Image(np.array([[np.nan]]))

    def test_mask_outside_object_rejected(self):
        """Test that a mask bit outside the object violates the invariant."""
        obj = np.zeros((2, 2), dtype=bool)
        obj[0, 0] = True
        bits = np.zeros((2, 2), dtype=bool)
        bits[1, 1] = True
        with self.assertRaises(InvalidArgumentError):
            Mask(bits, obj)

    def test_mask_size_counts_bits(self):
        """Test that size() is the L0 norm of the mask."""
        obj = np.ones((4, 4), dtype=bool)
        bits = np.zeros((4, 4), dtype=bool)
        bits[1:3, 1:3] = True
        mask = Mask(bits, obj)
        self.assertEqual(mask.size(), 4)
        self.assertAlmostEqual(mask.object_ratio(), 0.25)


class ResizeBilinearTests(SimpleTestCase):
    """Test cases for bilinear resizing."""

    def test_constant_field_is_fixed_point(self):
        """Test that a constant image stays constant under resizing."""
        out = ImagingService.resize_bilinear(Image.constant(2, 2, 0.5), 4, 4)
        self.assertEqual((out.width, out.height), (4, 4))
        np.testing.assert_allclose(out.data, 0.5)

    def test_identity_dimensions_bitwise_equal(self):
        """Test that resizing to the same size returns an equal image."""
        img = Image(np.random.default_rng(3).random((5, 7, 3)))
        self.assertTrue(ImagingService.resize_bilinear(img, 7, 5).equals(img))

    def test_matches_scalar_formula(self):
        """Test the 1x2 -> 1x4 case against an independent scalar formula."""
        img = Image(np.array([[0.0, 1.0]]))
        out = ImagingService.resize_bilinear(img, 4, 1)
        expected = _scalar_bilinear([0.0, 1.0], 4)
        np.testing.assert_allclose(out.data[0, :, 0], expected)
        np.testing.assert_allclose(expected, [0.0, 0.25, 0.75, 1.0])

    def test_two_dimensional_matches_separable_scalar(self):
        """Test 2-D resizing against row/column scalar interpolation."""
        values = np.random.default_rng(5).random((3, 4))
        out = ImagingService.resize_bilinear(Image(values), 6, 5).data[:, :, 0]
        cols = np.array([_scalar_bilinear(list(row), 6) for row in values])
        expected = np.array([_scalar_bilinear(list(col), 5) for col in cols.T]).T
        np.testing.assert_allclose(out, expected, atol=1e-12)

    def test_zero_target_dimension_rejected(self):
        """Test that a zero target dimension is an invalid argument."""
        with self.assertRaises(InvalidArgumentError):
            ImagingService.resize_bilinear(Image.constant(2, 2, 0.5), 0, 3)

    def test_downsampling_supported(self):
        """Test that shrinking an image is allowed and keeps a constant field constant."""
        out = ImagingService.resize_bilinear(Image.constant(8, 8, 0.3, channels=3), 4, 2)
        self.assertEqual(out.data.shape, (2, 4, 3))
        np.testing.assert_allclose(out.data, 0.3)

    def test_range_preserved(self):
        """Test that resampling never leaves [0, 1]."""
        img = Image(np.random.default_rng(9).random((8, 8, 3)))
        out = ImagingService.resize_bilinear(img, 13, 3)
        self.assertGreaterEqual(out.data.min(), 0.0)
        self.assertLessEqual(out.data.max(), 1.0)


class UpsampleMaskTests(SimpleTestCase):
    """Test cases for nearest-neighbor mask upsampling."""

    def test_full_mask_stays_full(self):
        """Test that an all-ones 32x32 mask upsamples to all ones."""
        mask = Mask.full(np.ones((32, 32), dtype=bool))
        out = ImagingService.upsample_mask_nearest(mask, 244, 244)
        self.assertEqual(out.size(), 244 * 244)

    def test_single_bit_becomes_block(self):
        """Test that (0,0) of a 2x2 mask becomes the top-left 2x2 block of 4x4."""
        bits = np.zeros((2, 2), dtype=bool)
        bits[0, 0] = True
        mask = Mask(bits, np.ones((2, 2), dtype=bool))
        out = ImagingService.upsample_mask_nearest(mask, 4, 4)
        expected = np.zeros((4, 4), dtype=bool)
        expected[:2, :2] = True
        np.testing.assert_array_equal(out.bits, expected)

    def test_identity_dimensions(self):
        """Test that identical dimensions return an equal mask."""
        mask = Mask.full(np.ones((3, 3), dtype=bool))
        self.assertTrue(ImagingService.upsample_mask_nearest(mask, 3, 3).equals(mask))

    def test_downsampling_rejected(self):
        """Test that a downsampling request is an invalid argument."""
        mask = Mask.full(np.ones((8, 8), dtype=bool))
        with self.assertRaises(InvalidArgumentError):
            ImagingService.upsample_mask_nearest(mask, 4, 8)


class ApplyPerturbationTests(SimpleTestCase):
    """Test cases for mask-gated perturbation application."""

    def setUp(self):
        self.x = Image(np.random.default_rng(1).random((6, 6, 3)))
        self.obj = np.ones((6, 6), dtype=bool)

    def test_zero_delta_is_identity(self):
        """Test that a zero perturbation leaves the image pixel-exact."""
        out = ImagingService.apply_perturbation(
            self.x, Mask.full(self.obj), Perturbation.zeros(6, 6, 3)
        )
        self.assertTrue(out.equals(self.x))

    def test_empty_mask_gates_everything(self):
        """Test that an empty mask ignores an arbitrary perturbation."""
        delta = Perturbation(np.random.default_rng(2).normal(size=(6, 6, 3)))
        out = ImagingService.apply_perturbation(self.x, Mask.empty(self.obj), delta)
        self.assertTrue(out.equals(self.x))

    def test_clamps_at_upper_bound(self):
        """Test that 0.5 + 1 saturates at 1.0."""
        x = Image.constant(4, 4, 0.5, channels=3)
        out = ImagingService.apply_perturbation(
            x, Mask.full(np.ones((4, 4), dtype=bool)), Perturbation(np.ones((4, 4, 3)))
        )
        np.testing.assert_array_equal(out.data, 1.0)

    def test_upsampled_application_keeps_unmasked_pixels(self):
        """Test that a low-resolution mask gates a high-resolution scene exactly."""
        x = Image(np.random.default_rng(4).random((8, 8, 1)))
        bits = np.zeros((2, 2), dtype=bool)
        bits[1, 1] = True
        mask = Mask(bits, np.ones((2, 2), dtype=bool))
        out = ImagingService.apply_perturbation(x, mask, Perturbation(np.full((2, 2, 1), 0.3)))
        np.testing.assert_array_equal(out.data[:4, :, :], x.data[:4, :, :])
        np.testing.assert_array_equal(out.data[:, :4, :], x.data[:, :4, :])
        np.testing.assert_allclose(out.data[4:, 4:, :], np.clip(x.data[4:, 4:, :] + 0.3, 0, 1))

    def test_channel_mismatch_rejected(self):
        """Test that a channel mismatch is an invalid argument."""
        with self.assertRaises(InvalidArgumentError):
            ImagingService.apply_perturbation(
                self.x, Mask.full(self.obj), Perturbation.zeros(6, 6, 1)
            )


class PatchGridTests(SimpleTestCase):
    """Test cases for patch grid construction and mask set operations."""

    def test_disjoint_grid(self):
        """Test that 8x8 with patch 4 stride 4 gives 4 disjoint patches."""
        grid = ImagingService.build_patch_grid(np.ones((8, 8), dtype=bool), 4, 4)
        self.assertEqual(len(grid), 4)
        self.assertEqual(sum(p.size for p in grid), 64)

    def test_overlapping_grid(self):
        """Test that 8x8 with patch 4 stride 2 gives 9 overlapping patches."""
        grid = ImagingService.build_patch_grid(np.ones((8, 8), dtype=bool), 4, 2)
        self.assertEqual(len(grid), 9)
        self.assertEqual([p.anchor for p in grid][:3], [(0, 0), (0, 2), (0, 4)])

    def test_clipping_drops_empty_patches(self):
        """Test that patches outside a top-left 4x4 object are dropped."""
        obj = np.zeros((8, 8), dtype=bool)
        obj[:4, :4] = True
        grid = ImagingService.build_patch_grid(obj, 4, 4)
        self.assertEqual(len(grid), 1)

    def test_union_covers_object(self):
        """Test that the patch union covers an irregular object when stride <= size."""
        obj = np.zeros((10, 10), dtype=bool)
        obj[1:9, 2:10] = True
        obj[5, 0] = True
        grid = ImagingService.build_patch_grid(obj, 4, 4)
        union = ImagingService.mask_union(list(grid), obj)
        np.testing.assert_array_equal(union.bits, obj)
        self.assertTrue(all(p.pixels.any() for p in grid))

    def test_default_stride_is_half_patch(self):
        """Test that the default stride is patch_size / 2."""
        grid = ImagingService.build_patch_grid(np.ones((32, 32), dtype=bool), 4)
        self.assertEqual(grid.stride, 2)
        self.assertEqual(len(grid), 225)

    def test_empty_object_rejected(self):
        """Test that an empty object region is an invalid argument."""
        with self.assertRaises(InvalidArgumentError):
            ImagingService.build_patch_grid(np.zeros((4, 4), dtype=bool), 2, 2)

    def test_minus_then_union_restores_partition(self):
        """Test that removing and re-adding all disjoint patches gives the object."""
        obj = np.ones((8, 8), dtype=bool)
        grid = ImagingService.build_patch_grid(obj, 4, 4)
        mask = Mask.full(obj)
        for patch in grid:
            mask = ImagingService.mask_minus(mask, patch)
        self.assertEqual(mask.size(), 0)
        self.assertEqual(ImagingService.mask_union(list(grid), obj).size(), 64)

    def test_union_of_nothing_is_empty(self):
        """Test that the union of an empty list is the empty mask."""
        self.assertEqual(ImagingService.mask_union([], np.ones((4, 4), dtype=bool)).size(), 0)

    def test_overlapping_union_size(self):
        """Test |p1 u p2| = 28 when the patches share 4 pixels."""
        grid = ImagingService.build_patch_grid(np.ones((8, 8), dtype=bool), 4, 2)
        p1, p2 = grid[0], grid[1]
        self.assertEqual(int((p1.pixels & p2.pixels).sum()), 8)
        # (0,0) and (2,2) anchors overlap in a 2x2 block
        p3 = grid[4]
        self.assertEqual(p3.anchor, (2, 2))
        self.assertEqual(int((p1.pixels & p3.pixels).sum()), 4)
        union = ImagingService.mask_union([p1, p3], np.ones((8, 8), dtype=bool))
        self.assertEqual(union.size(), 28)
        self.assertEqual(union.size(), int((p1.pixels | p3.pixels).sum()))

    def test_minus_clears_shared_pixels(self):
        """Test that minus clears overlapping pixels retained by other patches."""
        obj = np.ones((8, 8), dtype=bool)
        grid = ImagingService.build_patch_grid(obj, 4, 2)
        mask = ImagingService.mask_union([grid[0], grid[4]], obj)
        reduced = ImagingService.mask_minus(mask, grid[4])
        self.assertEqual(reduced.size(), 12)
        self.assertLessEqual(reduced.size(), mask.size())


class PngFileTests(SimpleTestCase):
    """Test cases for PNG persistence."""

    def test_image_round_trip_quantized(self):
        """Test that PNG round trips within 8-bit quantization."""
        img = Image(np.random.default_rng(8).random((5, 4, 3)))
        out = decode_png(encode_png(img))
        np.testing.assert_allclose(out.data, img.data, atol=0.5 / 255 + 1e-12)

    def test_grid_and_image_files(self):
        """Test that grids and images survive a trip through disk."""
        with tempfile.TemporaryDirectory() as tmp:
            grid = np.zeros((6, 5), dtype=bool)
            grid[2:4, 1:3] = True
            np.testing.assert_array_equal(load_grid(save_grid(grid, Path(tmp) / 'm.png')), grid)
            img = Image.constant(3, 3, 1.0)
            self.assertTrue(load_image(save_image(img, Path(tmp) / 'x.png')).equals(img))
