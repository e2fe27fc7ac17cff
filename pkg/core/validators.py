"""
Core App - File Validators

Input image validation for files named on the command line.
Uses python-magic for MIME sniffing when available.
"""

from pathlib import Path

from django.conf import settings

from .exceptions import InvalidArgumentError

# Try to import magic, but make it optional
try:
    import magic
    HAS_MAGIC = True
except (ImportError, OSError):
    HAS_MAGIC = False


# Magic byte signatures for the formats the toolkit reads
MAGIC_BYTES = {
    'image/png': b'\x89PNG\r\n\x1a\n',
}

ALLOWED_MIME_TYPES = ['image/png']


class FileValidationError(InvalidArgumentError):
    """Raised when an input image file fails validation."""
    pass


class ImageFileValidator:
    """
    Validates image files before they are decoded.

    Checks:
    1. File exists and size is within limits
    2. File extension in allowed list
    3. Magic bytes (and MIME type, when python-magic is installed) match PNG
    """

    def __init__(self, allowed_extensions=None, max_size_mb=None):
        self.allowed_extensions = allowed_extensions or getattr(
            settings, 'ALLOWED_IMAGE_EXTENSIONS', ['png']
        )
        self.max_size_mb = max_size_mb or getattr(settings, 'MAX_INPUT_IMAGE_MB', 20)
        self.max_size_bytes = self.max_size_mb * 1024 * 1024

    def __call__(self, path):
        """Validate the file at ``path`` and return it as a Path."""
        path = Path(path)
        self.validate_file_size(path)
        self.validate_extension(path)
        self.validate_content(path)
        return path

    def validate_file_size(self, path):
        """Check the file exists and its size is within limits."""
        if not path.is_file():
            raise FileValidationError(f'Image file "{path}" does not exist.')
        size = path.stat().st_size
        if size == 0:
            raise FileValidationError(f'Image file "{path}" is empty.')
        if size > self.max_size_bytes:
            raise FileValidationError(
                f'File size ({size / (1024*1024):.2f} MB) exceeds '
                f'maximum allowed size ({self.max_size_mb} MB).'
            )

    def validate_extension(self, path):
        """Check file extension is allowed."""
        ext = path.suffix.lower().lstrip('.')
        if ext not in self.allowed_extensions:
            raise FileValidationError(
                f'File type ".{ext}" is not allowed. '
                f'Allowed types: {", ".join(self.allowed_extensions)}'
            )

    def validate_content(self, path):
        """Verify magic bytes, then the sniffed MIME type if available."""
        with path.open('rb') as handle:
            header = handle.read(8192)

        if not header.startswith(MAGIC_BYTES['image/png']):
            raise FileValidationError(
                f'File "{path.name}" does not start with a PNG signature. '
                'The file may have been renamed or corrupted.'
            )

        if not HAS_MAGIC:
            return

        try:
            mime = magic.from_buffer(header, mime=True)
        except Exception:
            # Fallback if magic fails
            mime = None

        if mime and mime not in ALLOWED_MIME_TYPES:
            raise FileValidationError(
                f'File content type "{mime}" is not allowed.'
            )


def validate_image_file(path, max_size_mb=None):
    """
    Convenience function to validate an input image file.

    Args:
        path: Filesystem path of the PNG
        max_size_mb: Maximum file size in MB (defaults to settings)

    Returns:
        Validated Path

    Raises:
        FileValidationError: If validation fails
    """
    validator = ImageFileValidator(max_size_mb=max_size_mb)
    return validator(path)
