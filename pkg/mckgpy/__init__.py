# Copyright (c) 2024, mckgpy developers
#
# mckgpy is distributed under the BSD 3-Clause License, see LICENSE.

__author__ = 'mckgpy developers'
__copyright__ = 'Copyright (c) 2024 mckgpy developers'
__license__ = 'Three Clause BSD'
__version__ = '0.1.0'

from .config import RunConfig, ConfigSyntaxError, load_config, make_config
from .diffengine import Tape, grad_check, add_primitive, get_primitives
from .geometry import \
    Curvature, \
    ManifoldPoint, \
    TangentVector, \
    GeometryDomainError, \
    NumericalDegeneracyError, \
    ShapeContractError
from .kgdata import DataParseError, InputError, load_dataset
from .model import Model, ModelSpec, MarginKind
from .propagation import AggregatorKind
from .training import MarginRule, TrainingDivergedError, train
from .evaluation import EvalResult, evaluate
from .checkpoint import CheckpointFormatError

__all__ = [
    'RunConfig',
    'ConfigSyntaxError',
    'load_config',
    'make_config',
    'Tape',
    'grad_check',
    'add_primitive',
    'get_primitives',
    'Curvature',
    'ManifoldPoint',
    'TangentVector',
    'GeometryDomainError',
    'NumericalDegeneracyError',
    'ShapeContractError',
    'DataParseError',
    'InputError',
    'load_dataset',
    'Model',
    'ModelSpec',
    'MarginKind',
    'AggregatorKind',
    'MarginRule',
    'TrainingDivergedError',
    'train',
    'EvalResult',
    'evaluate',
    'CheckpointFormatError',
]
