"""
Core App - Tests

Test cases for input validators and the error hierarchy.
"""

import tempfile
from pathlib import Path

from django.test import SimpleTestCase

from .exceptions import (
    BudgetExceededError,
    InitializationFailureError,
    InvalidArgumentError,
    OracleIOError,
    ProtocolError,
)
from .validators import ImageFileValidator, FileValidationError, validate_image_file


PNG_HEADER = b'\x89PNG\r\n\x1a\n'


class ImageFileValidatorTests(SimpleTestCase):
    """Test cases for the input image validator."""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def _write(self, name, content):
        path = self.dir / name
        path.write_bytes(content)
        return path

    def test_missing_file_fails(self):
        """Test that a missing path fails validation."""
        with self.assertRaises(FileValidationError) as context:
            validate_image_file(self.dir / 'absent.png')
        self.assertIn('does not exist', str(context.exception))

    def test_size_limit_enforced(self):
        """Test that files exceeding the size limit fail validation."""
        path = self._write('big.png', PNG_HEADER + b'0' * 4096)
        validator = ImageFileValidator(max_size_mb=0.001)
        with self.assertRaises(FileValidationError) as context:
            validator.validate_file_size(path)
        self.assertIn('exceeds', str(context.exception))

    def test_extension_validation_fails_for_disallowed(self):
        """Test that non-PNG extensions are rejected."""
        path = self._write('victim.jpg', b'\xff\xd8\xff' + b'0' * 10)
        with self.assertRaises(FileValidationError) as context:
            validate_image_file(path)
        self.assertIn('not allowed', str(context.exception))

    def test_extension_case_insensitive(self):
        """Test that extension validation is case-insensitive."""
        path = self._write('victim.PNG', PNG_HEADER)
        ImageFileValidator().validate_extension(path)

    def test_renamed_file_rejected(self):
        """Test that a JPEG renamed to .png fails the signature check."""
        path = self._write('fake.png', b'\xff\xd8\xff\xe0' + b'0' * 100)
        with self.assertRaises(FileValidationError):
            ImageFileValidator().validate_content(path)

    def test_validation_error_is_invalid_argument(self):
        """Test that validation failures surface as invalid-argument errors."""
        self.assertTrue(issubclass(FileValidationError, InvalidArgumentError))
        self.assertTrue(issubclass(FileValidationError, ValueError))


class ExitCodeTests(SimpleTestCase):
    """Test cases for the CLI exit-code mapping carried by errors."""

    def test_exit_codes(self):
        """Test that each error class carries its documented exit code."""
        self.assertEqual(BudgetExceededError('x').exit_code, 2)
        self.assertEqual(InitializationFailureError('x').exit_code, 3)
        self.assertEqual(OracleIOError('x').exit_code, 4)
        self.assertEqual(ProtocolError('x').exit_code, 4)

    def test_budget_error_carries_partial(self):
        """Test that the budget error transports partial results."""
        err = BudgetExceededError('out', budget=10, spent=10, partial={'k': 1})
        self.assertEqual(err.partial, {'k': 1})
        self.assertEqual(err.budget, 10)
