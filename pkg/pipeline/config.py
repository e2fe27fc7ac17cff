"""
Pipeline App - Run Configuration

YAML run configuration with sections mirroring the module configs:

    transforms:  preset name plus TransformDistribution overrides
    maskgen:     MaskGenConfig fields
    boost:       BoostConfig fields
    baseline:    OptAttackConfig fields
    run:         seed, held-out n, query cap, instance and schedules

Unknown keys are rejected. The canonical JSON of the resolved
configuration is hashed into every report.
"""

import hashlib
import json
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import yaml
from django.conf import settings

from baseline.domain import OptAttackConfig
from boost.domain import BoostConfig
from core.exceptions import ConfigurationError, InvalidArgumentError
from maskgen.domain import MaskGenConfig
from transforms.domain import TransformDistribution

SECTIONS = ('transforms', 'maskgen', 'boost', 'baseline', 'run')

RUN_KEYS = {
    'seed': None,
    'heldout_n': None,
    'max_queries': None,
    'oracle': 'builtin',
    'cache': False,
    'instance': 'desk',
    'schedule': None,
    'budgets': None,
    'start_thresholds': None,
    'modes': None,
}


def _field_names(cls):
    return {f.name for f in fields(cls)}


def _check_keys(section, data, allowed):
    unknown = sorted(set(data) - set(allowed))
    if unknown:
        raise ConfigurationError(f'Unknown key(s) in section "{section}": {", ".join(unknown)}')


@dataclass(frozen=True)
class RunConfig:
    """Resolved configuration of one run."""

    preset: str = 'gtsrb'
    transforms: TransformDistribution = field(default_factory=lambda: TransformDistribution.preset('gtsrb'))
    maskgen: MaskGenConfig = field(default_factory=MaskGenConfig)
    boost: BoostConfig = field(default_factory=BoostConfig)
    baseline: OptAttackConfig = field(default_factory=OptAttackConfig)
    run: dict = field(default_factory=lambda: dict(RUN_KEYS))

    @property
    def seed(self):
        seed = self.run.get('seed')
        return settings.PATCH_ATTACK_DEFAULT_SEED if seed is None else int(seed)

    @property
    def heldout_n(self):
        n = self.run.get('heldout_n')
        return settings.PATCH_ATTACK_HELDOUT_TRANSFORMS if n is None else int(n)

    def to_dict(self):
        transforms = self.transforms.to_dict()
        transforms['preset'] = self.preset
        run = dict(self.run)
        run['seed'] = self.seed
        run['heldout_n'] = self.heldout_n
        return {
            'transforms': transforms,
            'maskgen': self.maskgen.to_dict(),
            'boost': self.boost.to_dict(),
            'baseline': self.baseline.to_dict(),
            'run': run,
        }

    def canonical_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, separators=(',', ':'))

    def config_hash(self):
        """SHA-256 of the canonical JSON form."""
        return hashlib.sha256(self.canonical_json().encode('utf-8')).hexdigest()

    def with_overrides(self, seed=None, budget=None, oracle=None):
        """Apply the common command-line overrides."""
        cfg = self
        if seed is not None:
            cfg = replace(cfg, run={**cfg.run, 'seed': int(seed)})
        if oracle is not None:
            cfg = replace(cfg, run={**cfg.run, 'oracle': oracle})
        if budget is not None:
            cfg = replace(
                cfg,
                boost=replace(cfg.boost, budget=int(budget)),
                baseline=replace(cfg.baseline, budget=int(budget)),
            )
        return cfg


def parse_config(data):
    """Build a RunConfig from an already-parsed mapping."""
    data = data or {}
    if not isinstance(data, dict):
        raise ConfigurationError('Configuration must be a mapping of sections')
    _check_keys('top level', data, SECTIONS)
    sections = {}
    for name in SECTIONS:
        value = data.get(name) or {}
        if not isinstance(value, dict):
            raise ConfigurationError(f'Section "{name}" must be a mapping')
        sections[name] = dict(value)

    transforms = sections['transforms']
    preset = transforms.pop('preset', 'gtsrb')
    _check_keys('transforms', transforms, _field_names(TransformDistribution))
    _check_keys('maskgen', sections['maskgen'], _field_names(MaskGenConfig))
    _check_keys('boost', sections['boost'], _field_names(BoostConfig))
    _check_keys('baseline', sections['baseline'], _field_names(OptAttackConfig))
    _check_keys('run', sections['run'], RUN_KEYS)

    try:
        return RunConfig(
            preset=preset,
            transforms=TransformDistribution.preset(preset, **transforms),
            maskgen=MaskGenConfig.from_dict(sections['maskgen']),
            boost=BoostConfig.from_dict(sections['boost']),
            baseline=OptAttackConfig.from_dict(sections['baseline']),
            run={**RUN_KEYS, **sections['run']},
        )
    except (InvalidArgumentError, TypeError) as e:
        raise ConfigurationError(f'Invalid configuration: {e}') from e


def load_config(path=None):
    """Load a YAML run configuration; None gives the defaults."""
    if path is None:
        return parse_config({})
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f'Configuration file not found: {path}')
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as e:
        raise ConfigurationError(f'Configuration file {path} is not valid YAML: {e}') from e
    return parse_config(data)
