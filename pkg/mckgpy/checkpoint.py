# Copyright (c) 2024, mckgpy developers
#
# mckgpy is distributed under the BSD 3-Clause License, see LICENSE.

"""
Reading and writing model checkpoints.

Layout, little endian throughout:

==================  ==============  ==========================================
field               format          notes
==================  ==============  ==========================================
magic               ``4s``          ``b'MCKG'``
version             ``<I``          1
dim                 ``<I``
manifolds           ``<I``
depth               ``<I``
sample size         ``<I``
aggregator          ``<I``          0 GCN, 1 GraphSage, 2 Neighbor
margin rule         ``<I``          0 Constant, 1 GeometryAware, 2 Hicf
margin c            ``<d``
leaky slope         ``<d``
taylor eps          ``<d``
seed                ``<Q``
user count          ``<I``
entity count        ``<I``
relation count      ``<I``          including inverse relations
block count         ``<I``
blocks                              name length ``<H``, utf-8 name, ndim ``<B``,
                                    shape ``<I`` x ndim, data ``<f8`` x size
curvatures          ``<d`` x M
==================  ==============  ==========================================
"""

import collections
import logging
import struct

import numpy as np

from .model import KAPPA_BLOCK, MarginKind, Model, ModelSpec
from .propagation import AggregatorKind

_LOG = logging.getLogger(__name__)

MAGIC = b'MCKG'

VERSION = 1

_AGGREGATOR_CODES = [AggregatorKind.GCN, AggregatorKind.GRAPHSAGE, AggregatorKind.NEIGHBOR]

_MARGIN_CODES = [MarginKind.CONSTANT, MarginKind.GEOMETRY, MarginKind.HICF]


class CheckpointFormatError(ValueError):
    """
    Raised for a bad magic number or version, truncated data, or a checkpoint
    that does not fit the data set it is used with.
    """

    def __init__(self, message):
        super(CheckpointFormatError, self).__init__(message)


def _unpack(stream, fmt):
    size = struct.calcsize(fmt)
    data = stream.read(size)
    if len(data) != size:
        raise CheckpointFormatError('Unexpected end of checkpoint data')
    return struct.unpack(fmt, data)


def _code(table, value, what):
    try:
        return table[value]
    except IndexError:
        raise CheckpointFormatError('Unknown {what} code {value}'.format(what=what, value=value))


def write(stream, model):
    """
    Write **model** to a binary stream.

    :param stream: Writable binary stream.
    :param model: :py:class:`mckgpy.model.Model`
    """
    spec = model.spec

    stream.write(MAGIC)
    stream.write(struct.pack('<IIIIIII', VERSION, spec.dim, spec.manifolds, spec.depth, spec.sample_size,
                             _AGGREGATOR_CODES.index(spec.aggregator), _MARGIN_CODES.index(spec.margin)))
    stream.write(struct.pack('<ddd', spec.margin_c, spec.leaky_slope, spec.taylor_eps))
    stream.write(struct.pack('<Q', spec.seed))
    stream.write(struct.pack('<III', spec.user_count, spec.entity_count, spec.relation_count))

    blocks = [(name, value) for name, value in model.params.items() if name != KAPPA_BLOCK]
    stream.write(struct.pack('<I', len(blocks)))

    for name, value in blocks:
        encoded = name.encode('utf-8')
        stream.write(struct.pack('<H', len(encoded)))
        stream.write(encoded)
        stream.write(struct.pack('<B', value.ndim))
        stream.write(struct.pack('<{n}I'.format(n=value.ndim), *value.shape))
        stream.write(np.ascontiguousarray(value, dtype='<f8').tobytes())

    stream.write(np.ascontiguousarray(model.params[KAPPA_BLOCK], dtype='<f8').tobytes())


def write_file(filename, model):
    """
    Write **model** to a checkpoint file path.
    """
    with open(filename, 'wb') as f:
        write(f, model)
    _LOG.info('Wrote checkpoint %s', filename)


def read_spec(stream):
    """
    Read only the header of a checkpoint.

    :return: :py:class:`mckgpy.model.ModelSpec`
    :raises CheckpointFormatError: for a bad magic number, version or header field.
    """
    magic = stream.read(4)
    if magic != MAGIC:
        raise CheckpointFormatError('Not a checkpoint, bad magic number {magic!r}'.format(magic=magic))

    # read UInt32 little-endian
    version, dim, manifolds, depth, sample_size, aggregator, margin = _unpack(stream, '<IIIIIII')
    if version != VERSION:
        raise CheckpointFormatError('Unsupported checkpoint version {v}'.format(v=version))

    # read Float64 little-endian
    margin_c, leaky_slope, taylor_eps = _unpack(stream, '<ddd')

    # read UInt64 little-endian
    seed = _unpack(stream, '<Q')[0]

    user_count, entity_count, relation_count = _unpack(stream, '<III')

    if manifolds < 1 or dim < 1 or depth < 1:
        raise CheckpointFormatError('Invalid checkpoint header')

    return ModelSpec(dim, manifolds, depth, sample_size, _code(_AGGREGATOR_CODES, aggregator, 'aggregator'),
                     _code(_MARGIN_CODES, margin, 'margin rule'), margin_c, user_count, entity_count,
                     relation_count, leaky_slope=leaky_slope, taylor_eps=taylor_eps, seed=seed)


def read(stream):
    """
    Read a :py:class:`mckgpy.model.Model` from a binary stream.

    :param stream: Readable binary stream.
    :return: :py:class:`mckgpy.model.Model`
    :raises CheckpointFormatError: for malformed or truncated data.
    """
    spec = read_spec(stream)
    expected = spec.block_shapes()
    del expected[KAPPA_BLOCK]

    block_count = _unpack(stream, '<I')[0]
    if block_count != len(expected):
        raise CheckpointFormatError('Checkpoint has {n} parameter blocks, header implies {m}'.format(
            n=block_count, m=len(expected)))

    params = {}
    for _ in range(block_count):
        # read UInt16 little-endian
        name_length = _unpack(stream, '<H')[0]
        raw_name = stream.read(name_length)
        if len(raw_name) != name_length:
            raise CheckpointFormatError('Unexpected end of checkpoint data')
        name = raw_name.decode('utf-8', errors='replace')

        ndim = _unpack(stream, '<B')[0]
        shape = _unpack(stream, '<{n}I'.format(n=ndim))

        if expected.get(name, None) != shape or name in params:
            raise CheckpointFormatError('Unexpected parameter block {name} with shape {shape}'.format(
                name=name, shape=shape))

        size = int(np.prod(shape)) if ndim else 1
        data = stream.read(8 * size)
        if len(data) != 8 * size:
            raise CheckpointFormatError('Unexpected end of checkpoint data in block {name}'.format(name=name))
        params[name] = np.frombuffer(data, dtype='<f8').astype(np.float64).reshape(shape)

    data = stream.read(8 * spec.manifolds)
    if len(data) != 8 * spec.manifolds:
        raise CheckpointFormatError('Unexpected end of checkpoint data in curvatures')
    params[KAPPA_BLOCK] = np.frombuffer(data, dtype='<f8').astype(np.float64)

    ordered = [(name, params[name]) for name in spec.block_shapes()]
    for name, value in ordered:
        if not np.all(np.isfinite(value)):
            raise CheckpointFormatError('Non-finite values in parameter block {name}'.format(name=name))
    return Model(spec, collections.OrderedDict(ordered))


def read_file(filename):
    """
    Read a :py:class:`mckgpy.model.Model` from a checkpoint file path.
    """
    with open(filename, 'rb') as f:
        return read(f)


def check_compatible(spec, user_count, entity_count, relation_count):
    """
    Check that a checkpoint fits a data set.

    :raises CheckpointFormatError: on a size mismatch.
    """
    expected = (user_count, entity_count, relation_count)
    found = (spec.user_count, spec.entity_count, spec.relation_count)
    if expected != found:
        raise CheckpointFormatError(
            'Checkpoint was trained on {f[0]} users, {f[1]} entities and {f[2]} relations; '
            'the data set has {e[0]}, {e[1]} and {e[2]}'.format(f=found, e=expected))
