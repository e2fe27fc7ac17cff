"""
Pipeline App - Run Directory Persistence

Layout of one run directory:

    report.json        AttackReport (sorted keys)
    state.npz          mask, object and perturbation arrays
    adversarial.png    final adversarial image
    post_mask.png      x + M * (x_tar - x) after mask generation
    mask.png           final mask
    heatmap.png        per-pixel heatmap impact (when a heatmap ran)
    heatmap.json       per-patch heatmap values
    lipschitz.png      histogram of local Lipschitz ratios
    trace.ndjson       stage-by-stage trace of the run
    transforms.ndjson  held-out transforms, replayable
    checkpoints/       boost checkpoints, one folder per round
"""

import csv
import json
import logging
from pathlib import Path

import numpy as np

from imaging import files
from imaging.domain import Mask, Perturbation
from .domain import AttackReport

logger = logging.getLogger('patch_attack')

REPORT = 'report.json'
STATE = 'state.npz'
TRACE = 'trace.ndjson'


def _json_default(value):
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f'{type(value).__name__} is not JSON serializable')


def dumps(data, **kwargs):
    return json.dumps(data, sort_keys=True, default=_json_default, **kwargs)


def save_report(report, directory):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    (directory / REPORT).write_text(dumps(report.to_dict(), indent=2) + '\n', encoding='utf-8')
    with (directory / STATE).open('wb') as handle:
        np.savez(
            handle,
            mask=report.mask.bits,
            object=report.mask.object,
            perturbation=report.perturbation.delta,
        )
    return directory / REPORT


def load_report(directory):
    """Rebuild an AttackReport from report.json and state.npz."""
    directory = Path(directory)
    data = json.loads((directory / REPORT).read_text(encoding='utf-8'))
    with np.load(directory / STATE) as arrays:
        mask = Mask(arrays['mask'], arrays['object'])
        perturbation = Perturbation(arrays['perturbation'])
    return AttackReport.from_dict(data, mask, perturbation)


def write_trace(records, path):
    """One JSON object per line, keys sorted."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open('w', encoding='utf-8', newline='\n') as handle:
        for record in records:
            handle.write(dumps(record) + '\n')
    return path


def read_trace(path):
    return [json.loads(line) for line in Path(path).read_text(encoding='utf-8').splitlines() if line]


def write_table(rows, columns, directory, name):
    """Write rows as <name>.csv and <name>.json."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    with open(directory / f'{name}.csv', 'w', newline='') as f:
        writer = csv.writer(f)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([row.get(column) for column in columns])
    (directory / f'{name}.json').write_text(dumps(list(rows), indent=2) + '\n', encoding='utf-8')
    logger.info(f'Table {name} written to {directory}')
    return directory / f'{name}.csv'


def save_images(directory, adversarial, post_mask, mask):
    directory = Path(directory)
    files.save_image(adversarial, directory / 'adversarial.png')
    if post_mask is not None:
        files.save_image(post_mask, directory / 'post_mask.png')
    files.save_grid(mask.bits, directory / 'mask.png')
