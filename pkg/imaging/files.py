"""
Imaging App - PNG Input/Output

Images are stored as 8-bit PNG (L or RGB), masks and object grids as
1-bit PNG. Grids are row-major.
"""

import io
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from core.exceptions import InvalidArgumentError
from core.validators import validate_image_file
from .domain import Image


def _to_uint8(data):
    return np.rint(np.clip(data, 0.0, 1.0) * 255.0).astype(np.uint8)


def _to_pil(img):
    data = _to_uint8(img.data)
    if img.channels == 1:
        return PILImage.fromarray(data[:, :, 0])
    return PILImage.fromarray(data)


def _from_pil(pil):
    if pil.mode not in ('L', 'RGB'):
        pil = pil.convert('RGB' if pil.mode in ('RGBA', 'P', 'CMYK') else 'L')
    return Image(np.asarray(pil, dtype=np.float64) / 255.0)


def encode_png(img):
    """PNG bytes of an Image (quantized to 8 bits)."""
    buffer = io.BytesIO()
    _to_pil(img).save(buffer, format='PNG')
    return buffer.getvalue()


def decode_png(payload):
    """Image from PNG bytes."""
    try:
        with PILImage.open(io.BytesIO(payload)) as pil:
            pil.load()
            return _from_pil(pil)
    except (OSError, ValueError) as e:
        raise InvalidArgumentError(f'Payload is not a decodable PNG: {e}') from e


def load_image(path):
    """Validate and decode a PNG file into an Image."""
    path = validate_image_file(path)
    with PILImage.open(path) as pil:
        pil.load()
        return _from_pil(pil)


def save_image(img, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    _to_pil(img).save(path, format='PNG')
    return path


def load_grid(path):
    """Decode a binary grid (any non-zero pixel is set)."""
    path = validate_image_file(path)
    with PILImage.open(path) as pil:
        return np.asarray(pil.convert('L')) > 0


def save_grid(grid, path):
    """Write a binary grid as a 1-bit PNG."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    bits = np.asarray(grid, dtype=bool)
    PILImage.fromarray(bits.astype(np.uint8) * 255).convert('1').save(path, format='PNG')
    return path


def save_grayscale(values, path):
    """Write a float grid in [0, 1] as an 8-bit grayscale PNG."""
    return save_image(Image(np.asarray(values, dtype=np.float64)), path)
