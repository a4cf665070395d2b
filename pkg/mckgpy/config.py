# Copyright (c) 2024, mckgpy developers
#
# mckgpy is distributed under the BSD 3-Clause License, see LICENSE.

"""
Run configuration: line oriented ``key = value`` text with ``#`` comments.

Example:

.. code-block:: text

    # LastFM, geometry aware margin
    preset = lastfm
    interactions = data/lastfm/user_artists.dat
    kg = data/lastfm/kg.txt
    dim = 32
    manifolds = 3
    kappa_init = -1, 0, 1

Keys given on the command line override keys read from a file; a ``preset``
line fills in data set specific defaults before the remaining keys apply.
"""

import collections
import hashlib
import re

from .model import MarginKind
from .propagation import AggregatorKind


class ConfigSyntaxError(ValueError):
    """
    Raised for malformed configuration text, unknown keys or out of range values.

    :var line_number: 1-based line of the offending entry, or **None**.
    """

    def __init__(self, message, line_number=None):
        if line_number is not None:
            message = 'line {n}: {message}'.format(n=line_number, message=message)
        super(ConfigSyntaxError, self).__init__(message)
        self.line_number = line_number


_FIELDS = collections.OrderedDict([
    ('interactions', (str, '')),
    ('kg', (str, '')),
    ('item_map', (str, '')),
    ('out', (str, 'out')),
    ('preset', (str, '')),
    ('train_ratio', (float, 0.7)),
    ('rating_threshold', (float, 4.0)),
    ('separator', (str, '::')),
    ('dim', (int, 32)),
    ('manifolds', (int, 3)),
    ('depth', (int, 2)),
    ('sample_size', (int, 8)),
    ('aggregator', (str, 'gcn')),
    ('margin', (str, 'geometry')),
    ('margin_c', (float, 0.1)),
    ('leaky_slope', (float, 0.2)),
    ('taylor_eps', (float, 1e-7)),
    ('kappa_init', (tuple, (-1.0, 0.0, 1.0))),
    ('optimizer', (str, 'sgd')),
    ('lr', (float, 1e-3)),
    ('kappa_lr', (float, 1e-4)),
    ('batch_size', (int, 1024)),
    ('max_epochs', (int, 100)),
    ('patience', (int, 20)),
    ('eval_every', (int, 1)),
    ('eval_batch_size', (int, 16)),
    ('seed', (int, 0)),
    ('workers', (int, 1)),
    ('log_level', (str, 'INFO')),
])

# keys that never change a result
_UNHASHED = frozenset(['out', 'log_level', 'preset', 'workers'])

OPTIMIZERS = ('sgd', 'adam')

LOG_LEVELS = ('DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL')

PRESETS = {
    'movielens': {'separator': '::', 'rating_threshold': 4.0, 'sample_size': 8, 'depth': 3},
    'lastfm': {'separator': '\t', 'rating_threshold': None, 'sample_size': 4, 'depth': 3},
    'book': {'separator': ';', 'rating_threshold': None, 'sample_size': 8, 'depth': 3},
    'synthetic': {'separator': '::', 'rating_threshold': 4.0, 'sample_size': 4, 'depth': 2, 'dim': 16,
                  'optimizer': 'adam', 'lr': 0.01, 'kappa_lr': 1e-3, 'batch_size': 256, 'max_epochs': 40},
}
"""
Data set specific defaults.  A ``rating_threshold`` of **None** treats every
record as a positive.
"""

_LINE_REGEX = re.compile(r'^\s*(?P<key>[A-Za-z_][A-Za-z0-9_]*)\s*=\s*(?P<value>.*?)\s*$')

_COMMENT_REGEX = re.compile(r'(?:^|\s)#.*$')

_NONE_VALUES = frozenset(['', 'none', 'null'])


class RunConfig(collections.namedtuple('RunConfig', list(_FIELDS))):
    """
    Immutable run configuration.  Use :py:func:`make_config` to build one from
    keyword overrides, and :py:meth:`RunConfig.validate` before using it.
    """

    def replace(self, **overrides):
        """
        Get a copy with some keys replaced, converting string values.
        """
        converted = {key: _convert(key, value) for key, value in overrides.items()}
        return self._replace(**converted)

    def validate(self):
        """
        Check value ranges.

        :return: this config
        :raises ConfigSyntaxError: for the first value out of range.
        """
        def require(condition, message):
            if not condition:
                raise ConfigSyntaxError(message)

        require(self.depth in (1, 2, 3), 'depth must be 1, 2 or 3, got {v}'.format(v=self.depth))
        require(self.manifolds >= 1, 'manifolds must be at least 1, got {v}'.format(v=self.manifolds))
        require(2 <= self.dim <= 512, 'dim must lie in [2, 512], got {v}'.format(v=self.dim))
        require(0.0 < self.train_ratio < 1.0,
                'train_ratio must lie strictly between 0 and 1, got {v}'.format(v=self.train_ratio))
        require(self.sample_size >= 1, 'sample_size must be at least 1, got {v}'.format(v=self.sample_size))
        require(self.margin_c >= 0.0, 'margin_c must not be negative, got {v}'.format(v=self.margin_c))
        require(self.lr >= 0.0 and self.kappa_lr >= 0.0, 'learning rates must not be negative')
        require(self.batch_size >= 1, 'batch_size must be at least 1')
        require(self.eval_batch_size >= 1, 'eval_batch_size must be at least 1')
        require(self.max_epochs >= 0, 'max_epochs must not be negative')
        require(self.patience >= 1, 'patience must be at least 1')
        require(self.eval_every >= 1, 'eval_every must be at least 1')
        require(self.workers >= 1, 'workers must be at least 1')
        require(self.seed >= 0, 'seed must not be negative')
        require(len(self.kappa_init) >= 1, 'kappa_init needs at least one value')
        require(self.optimizer in OPTIMIZERS,
                'optimizer must be one of {names}, got {v}'.format(names=', '.join(OPTIMIZERS), v=self.optimizer))
        require(self.log_level.upper() in LOG_LEVELS, 'unknown log_level {v}'.format(v=self.log_level))
        require(not self.preset or self.preset in PRESETS, 'unknown preset {v}'.format(v=self.preset))
        try:
            AggregatorKind.parse(self.aggregator)
            MarginKind.parse(self.margin)
        except ValueError as e:
            raise ConfigSyntaxError(str(e))
        return self


def _convert(key, value):
    if key not in _FIELDS:
        raise ConfigSyntaxError('unknown key "{key}"'.format(key=key))
    kind, _ = _FIELDS[key]
    if not isinstance(value, str):
        if kind is tuple:
            return tuple(float(v) for v in value)
        return value if value is None else kind(value)

    text = value.strip()
    try:
        if kind is tuple:
            return tuple(float(v) for v in text.split(',') if v.strip())
        if kind is float and key == 'rating_threshold' and text.lower() in _NONE_VALUES:
            return None
        if kind is int:
            return int(text)
        if kind is float:
            return float(text)
    except ValueError:
        raise ConfigSyntaxError('invalid value "{value}" for key "{key}"'.format(value=value, key=key))
    if key == 'separator':
        return text.replace('\\t', '\t')
    return text


def _apply_preset(values, name, line_number=None):
    if name not in PRESETS:
        raise ConfigSyntaxError('unknown preset "{name}"'.format(name=name), line_number)
    for key, value in PRESETS[name].items():
        values[key] = value


def make_config(**overrides):
    """
    Build a :py:class:`RunConfig` from defaults, an optional ``preset`` and keyword overrides.
    """
    values = collections.OrderedDict((key, default) for key, (_, default) in _FIELDS.items())
    preset = overrides.get('preset', None)
    if preset:
        _apply_preset(values, preset)
    for key, value in overrides.items():
        values[key] = _convert(key, value)
    return RunConfig(**values)


def parse_config_entries(text):
    """
    Parse configuration text into an ordered mapping of key to converted value.

    A ``preset`` entry expands in place into its keys.

    :raises ConfigSyntaxError: with the line number of a malformed entry.
    """
    entries = collections.OrderedDict()
    for line_number, line in enumerate(text.splitlines(), start=1):
        line = _COMMENT_REGEX.sub('', line)
        if not line.strip():
            continue
        match = _LINE_REGEX.match(line)
        if match is None:
            raise ConfigSyntaxError('expected "key = value", got "{line}"'.format(line=line.strip()), line_number)
        key = match.group('key')
        try:
            value = _convert(key, match.group('value'))
        except ConfigSyntaxError as e:
            raise ConfigSyntaxError(str(e), line_number)
        if key == 'preset':
            _apply_preset(entries, value, line_number)
        entries[key] = value
    return entries


def parse_config_text(text, **overrides):
    """
    Parse configuration text, then apply keyword **overrides**.

    :return: :py:class:`RunConfig`
    """
    values = collections.OrderedDict((key, default) for key, (_, default) in _FIELDS.items())
    values.update(parse_config_entries(text))
    for key, value in overrides.items():
        values[key] = _convert(key, value)
    return RunConfig(**values)


def load_config(path, **overrides):
    """
    Read a configuration file, see :py:func:`parse_config_text`.
    """
    with open(path, 'r', encoding='utf-8') as f:
        return parse_config_text(f.read(), **overrides)


def _render_value(value):
    if value is None:
        return 'none'
    if isinstance(value, tuple):
        return ', '.join(repr(float(v)) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value).replace('\t', '\\t')


def render_config(config):
    """
    Canonical ``key = value`` text of **config**, readable by :py:func:`parse_config_text`.
    """
    return ''.join('{key} = {value}\n'.format(key=key, value=_render_value(getattr(config, key)))
                   for key in _FIELDS if key != 'preset')


def config_hash(config):
    """
    Short SHA-1 digest over the canonical rendering of every result relevant key.

    :return: 12 hex digits
    """
    text = ''.join('{key}={value}\n'.format(key=key, value=_render_value(getattr(config, key)))
                   for key in _FIELDS if key not in _UNHASHED)
    return hashlib.sha1(text.encode('utf-8')).hexdigest()[:12]
