"""
Pipeline App - Attack Instances

The built-in desk instance and instances loaded from image files.
"""

from core.exceptions import ConfigurationError
from imaging import files
from oracle.fixtures import PLAIN, VERTICAL_BAR, object_grid, prototypes
from .domain import AttackInstance


def desk_instance():
    """Plain sign attacked toward the vertical-bar class, full-resolution plane."""
    protos = prototypes()
    return AttackInstance(
        victim=protos[PLAIN],
        target_example=protos[VERTICAL_BAR],
        target_label=VERTICAL_BAR,
        object=object_grid(),
    )


def load_instance(spec):
    """
    ``'desk'`` or a mapping with victim, target, label, object and an
    optional [width, height] resolution. Without an object file the
    whole frame is the object.
    """
    if spec in (None, 'desk'):
        return desk_instance()
    if not isinstance(spec, dict):
        raise ConfigurationError(f'Unknown instance "{spec}"')
    missing = [key for key in ('victim', 'target', 'label') if key not in spec]
    if missing:
        raise ConfigurationError(f'Instance is missing: {", ".join(missing)}')
    victim = files.load_image(spec['victim'])
    obj = files.load_grid(spec['object']) if spec.get('object') else None
    if obj is None:
        obj = victim.data[:, :, 0] >= 0
    return AttackInstance(
        victim=victim,
        target_example=files.load_image(spec['target']),
        target_label=int(spec['label']),
        object=obj,
        perturb_resolution=spec.get('resolution'),
    )
