"""
Oracle App - Built-in Classifier Prototypes

Three 32x32 RGB sign-like classes on a mid-gray background. They share a
red disk and differ only by a saturated white bar, so class differences
live in the green/blue channels at 0 or 1, where gamma has no effect.
"""

import numpy as np

from imaging.domain import Image

SIZE = 32
RADIUS = 13.0
BACKGROUND = 0.5

PLAIN, VERTICAL_BAR, HORIZONTAL_BAR = 0, 1, 2


def object_grid(size=SIZE, radius=RADIUS):
    """The shared disk-shaped object region."""
    center = (size - 1) / 2.0
    rows, cols = np.mgrid[0:size, 0:size]
    return (rows - center) ** 2 + (cols - center) ** 2 <= radius ** 2


def _sign(bar=None):
    data = np.full((SIZE, SIZE, 3), BACKGROUND)
    disk = object_grid()
    data[disk] = (1.0, 0.0, 0.0)
    if bar is not None:
        symbol = np.zeros_like(disk)
        symbol[bar] = True
        data[symbol & disk] = (1.0, 1.0, 1.0)
    return Image(data)


def prototypes():
    """label -> prototype Image."""
    return {
        PLAIN: _sign(),
        VERTICAL_BAR: _sign((slice(6, 26), slice(13, 19))),
        HORIZONTAL_BAR: _sign((slice(13, 19), slice(6, 26))),
    }
