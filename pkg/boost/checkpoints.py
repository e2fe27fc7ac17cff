"""
Boost App - Checkpoints

One checkpoint per run directory, rewritten after every iteration:
``boost.npz`` holds the current and best perturbations, ``boost.json``
everything else. Transform and direction seeds are derived from
(seed, iteration), so the iteration index is the whole RNG state.
"""

import json
import os
from pathlib import Path

import numpy as np

from core.exceptions import InvalidArgumentError

ARRAYS = 'boost.npz'
META = 'boost.json'


def _replace(tmp, final):
    os.replace(tmp, final)


def save(directory, current, best, meta):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    tmp_arrays = directory / f'.{ARRAYS}.tmp'
    with tmp_arrays.open('wb') as handle:
        np.savez(handle, current=current, best=best)
    tmp_meta = directory / f'.{META}.tmp'
    tmp_meta.write_text(json.dumps(meta, sort_keys=True, indent=2), encoding='utf-8')
    _replace(tmp_arrays, directory / ARRAYS)
    _replace(tmp_meta, directory / META)


def load(directory):
    """Return (current, best, meta) or None when no checkpoint exists."""
    directory = Path(directory)
    if not (directory / META).exists():
        return None
    if not (directory / ARRAYS).exists():
        raise InvalidArgumentError(f'Checkpoint in {directory} is missing {ARRAYS}')
    meta = json.loads((directory / META).read_text(encoding='utf-8'))
    with np.load(directory / ARRAYS) as arrays:
        return arrays['current'], arrays['best'], meta
