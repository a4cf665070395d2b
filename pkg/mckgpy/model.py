# Copyright (c) 2024, mckgpy developers
#
# mckgpy is distributed under the BSD 3-Clause License, see LICENSE.

"""
Model hyperparameters, parameter blocks and the full forward pass.

Parameters are kept in an ordered mapping of block name to float64 array:

======================  ==========================  ====================================
block                   shape                       meaning
======================  ==========================  ====================================
``m<i>.user``           ``(users, d)``              Euclidean user rows of subspace i
``m<i>.entity``         ``(entities, d)``           Euclidean entity rows
``m<i>.relation``       ``(relations + 1, d)``      Euclidean relation rows, last is self-loop
``m<i>.w<k>``           ``(d, d)`` or ``(d, 2d)``   aggregation weights of iteration k
``m<i>.b<k>``           ``(d,)``                    aggregation bias of iteration k
``m<i>.projection``     ``(d, 2d)``                 post concatenation projection
``attention``           ``(M, M * d)``              subspace attention
``kappa``               ``(M,)``                    curvatures
======================  ==========================  ====================================
"""

import collections
import enum
import logging

import numpy as np

from . import diffengine as de
from . import fusion
from . import propagation
from . import stereographic as st
from .kgdata import InputError
from .propagation import AggregatorKind

_LOG = logging.getLogger(__name__)

KAPPA_BLOCK = 'kappa'

ATTENTION_BLOCK = 'attention'

INIT_STDDEV = 0.1


class MarginKind(enum.Enum):
    """
    Margin rule of the ranking loss.

    :var CONSTANT: The constant ``c``.
    :var GEOMETRY: Geometry aware margin, grows with radius under negative curvature.
    :var HICF: Margin of the hyperbolic collaborative filtering baseline.
    """

    CONSTANT = 'constant'
    GEOMETRY = 'geometry'
    HICF = 'hicf'

    @classmethod
    def parse(cls, name):
        """
        Get a kind from its name or ablation suffix (``c``, ``g``, ``h``).

        :raises ValueError: for an unknown name.
        """
        if isinstance(name, cls):
            return name
        name = str(name).strip().lower()
        for kind in cls:
            if name in (kind.value, kind.value[0]):
                return kind
        raise ValueError('Unknown margin rule "{name}", expected one of: {names}'.format(
            name=name, names=', '.join(k.value for k in cls)))

    @property
    def suffix(self):
        return '-' + self.value[0]


class ModelSpec(collections.namedtuple('ModelSpec', [
        'dim', 'manifolds', 'depth', 'sample_size', 'aggregator', 'margin', 'margin_c', 'user_count',
        'entity_count', 'relation_count', 'leaky_slope', 'taylor_eps', 'seed'])):
    """
    Hyperparameters and table sizes fixing every parameter shape.

    :var relation_count: Relation ids including inverses, the relation tables get one
                         extra self-loop row.
    """

    def __new__(cls, dim, manifolds, depth, sample_size, aggregator, margin, margin_c, user_count, entity_count,
                relation_count, leaky_slope=propagation.DEFAULT_LEAKY_SLOPE, taylor_eps=st.TAYLOR_EPS, seed=0):
        return super(ModelSpec, cls).__new__(
            cls, int(dim), int(manifolds), int(depth), int(sample_size), AggregatorKind.parse(aggregator),
            MarginKind.parse(margin), float(margin_c), int(user_count), int(entity_count), int(relation_count),
            float(leaky_slope), float(taylor_eps), int(seed))

    @classmethod
    def from_config(cls, config, user_count, entity_count, relation_count):
        """
        Build a spec from a :py:class:`mckgpy.config.RunConfig` and data set sizes.
        """
        return cls(config.dim, config.manifolds, config.depth, config.sample_size, config.aggregator,
                   config.margin, config.margin_c, user_count, entity_count, relation_count,
                   leaky_slope=config.leaky_slope, taylor_eps=config.taylor_eps, seed=config.seed)

    @classmethod
    def from_dataset(cls, config, dataset):
        """
        Build a spec sized for **dataset**.

        :raises mckgpy.kgdata.InputError: if the knowledge graph has no triples.
        """
        kg = dataset.kg
        if kg.triple_count == 0:
            raise InputError('The knowledge graph has no triples, cannot build a model')
        return cls.from_config(config, dataset.train.user_count, kg.entity_count, kg.relation_count)

    @property
    def fusion_enabled(self):
        """
        The concatenation update only runs with more than one subspace.
        """
        return self.manifolds > 1

    def block_shapes(self):
        """
        Get the shape of every parameter block, in storage order.

        :return: OrderedDict of name to shape tuple
        """
        d = self.dim
        shapes = collections.OrderedDict()
        for m in range(self.manifolds):
            shapes['m{m}.user'.format(m=m)] = (self.user_count, d)
            shapes['m{m}.entity'.format(m=m)] = (self.entity_count, d)
            shapes['m{m}.relation'.format(m=m)] = (self.relation_count + 1, d)
            for k in range(self.depth):
                shapes['m{m}.w{k}'.format(m=m, k=k)] = (d, d * self.aggregator.input_multiplier)
                shapes['m{m}.b{k}'.format(m=m, k=k)] = (d,)
            shapes['m{m}.projection'.format(m=m)] = (d, 2 * d)
        shapes[ATTENTION_BLOCK] = (self.manifolds, self.manifolds * d)
        shapes[KAPPA_BLOCK] = (self.manifolds,)
        return shapes


def _xavier(rng, shape):
    limit = np.sqrt(6.0 / (shape[0] + shape[1]))
    return rng.uniform(-limit, limit, size=shape)


def initial_kappas(manifolds, kappa_init=(-1.0, 0.0, 1.0)):
    """
    Cycle **kappa_init** across the subspaces.
    """
    kappa_init = list(kappa_init) or [0.0]
    return np.array([kappa_init[m % len(kappa_init)] for m in range(manifolds)], dtype=np.float64)


class Model:
    """
    Parameter blocks of a :py:class:`ModelSpec` and the forward pass over them.

    Forward functions take an optional **values** mapping so that the same
    code runs over the stored arrays or over :py:class:`mckgpy.diffengine.Var`
    leaves recorded on a tape.
    """

    def __init__(self, spec, params):
        expected = spec.block_shapes()
        if list(params) != list(expected):
            raise ValueError('Parameter blocks do not match the model spec')
        for name, shape in expected.items():
            if np.shape(params[name]) != shape:
                raise ValueError('Block {name} has shape {got}, expected {shape}'.format(
                    name=name, got=np.shape(params[name]), shape=shape))
        self._spec = spec
        self._params = collections.OrderedDict(
            (name, np.array(value, dtype=np.float64)) for name, value in params.items())

    @classmethod
    def initialize(cls, spec, seed, kappa_init=(-1.0, 0.0, 1.0)):
        """
        Random initial parameters: small normal embedding rows, Xavier weights,
        zero biases, projections selecting the subspace half, zero attention.

        :return: :py:class:`Model`
        """
        rng = np.random.default_rng(int(seed))
        params = collections.OrderedDict()
        d = spec.dim
        for name, shape in spec.block_shapes().items():
            leaf = name.split('.')[-1]
            if leaf in ('user', 'entity', 'relation'):
                params[name] = rng.normal(0.0, INIT_STDDEV, size=shape)
            elif leaf.startswith('w'):
                params[name] = _xavier(rng, shape)
            elif leaf == 'projection':
                params[name] = np.hstack([np.eye(d), np.zeros((d, d))])
            elif name == KAPPA_BLOCK:
                params[name] = initial_kappas(spec.manifolds, kappa_init)
            else:
                params[name] = np.zeros(shape)
        _LOG.debug('Initialized %d parameter blocks with seed %d', len(params), seed)
        return cls(spec, params)

    @property
    def spec(self):
        return self._spec

    @property
    def params(self):
        """
        Get the parameter blocks.

        :return: OrderedDict of name to array
        """
        return self._params

    @property
    def kappas(self):
        """
        Get the curvature of every subspace.

        :return: list of float
        """
        return [float(k) for k in self._params[KAPPA_BLOCK]]

    def copy(self):
        return Model(self._spec, collections.OrderedDict((n, v.copy()) for n, v in self._params.items()))

    def update(self, params):
        """
        Replace parameter blocks in place from a mapping of name to array.
        """
        for name, value in params.items():
            if np.shape(value) != self._params[name].shape:
                raise ValueError('Block {name} changes shape'.format(name=name))
            self._params[name] = np.array(value, dtype=np.float64)

    def subspace(self, m, values=None):
        """
        Parameters of subspace **m**.

        :return: :py:class:`mckgpy.propagation.SubspaceParams`
        """
        values = self._params if values is None else values
        prefix = 'm{m}.'.format(m=m)
        return propagation.SubspaceParams(
            values[prefix + 'user'],
            values[prefix + 'entity'],
            values[prefix + 'relation'],
            tuple(values[prefix + 'w{k}'.format(k=k)] for k in range(self._spec.depth)),
            tuple(values[prefix + 'b{k}'.format(k=k)] for k in range(self._spec.depth)),
            values[KAPPA_BLOCK][m])

    def _kappa_list(self, values):
        return [values[KAPPA_BLOCK][m] for m in range(self._spec.manifolds)]

    def fusion_params(self, values=None):
        values = self._params if values is None else values
        return fusion.FusionParams(
            tuple(values['m{m}.projection'.format(m=m)] for m in range(self._spec.manifolds)),
            values[ATTENTION_BLOCK])

    def forward(self, users, items, table, values=None):
        """
        Fused user and item points of every subspace.

        :param users: int array ``(B,)``, or **None** for attention conditioned on the origin.
        :param items: int array ``(B,)``
        :param table: :py:class:`mckgpy.kgdata.ReceptiveTable`
        :return: :py:class:`mckgpy.fusion.FusedPair`
        """
        values = self._params if values is None else values
        spec = self._spec
        users_out = []
        items_out = []
        for m in range(spec.manifolds):
            out = propagation.forward_subspace(users, items, self.subspace(m, values), table, spec.depth,
                                               spec.aggregator, spec.leaky_slope, spec.taylor_eps)
            users_out.append(out.user)
            items_out.append(out.item)
        return fusion.fuse(users_out, items_out, self._kappa_list(values), self.fusion_params(values),
                           update=spec.fusion_enabled, eps=spec.taylor_eps)

    def distance(self, users, items, table, values=None):
        """
        Global distance of every (user, item) pair.

        :return: ``(B,)`` distances
        """
        values = self._params if values is None else values
        pair = self.forward(users, items, table, values)
        return fusion.global_distance(pair.users, pair.items, pair.user_weights, pair.item_weights,
                                      self._kappa_list(values), self._spec.taylor_eps)

    def origin_distances(self, pair, values=None):
        """
        Weighted origin distances of the users and items of a :py:class:`mckgpy.fusion.FusedPair`.

        :return: tuple(user_distances, item_distances)
        """
        values = self._params if values is None else values
        kappas = self._kappa_list(values)
        eps = self._spec.taylor_eps
        return (fusion.origin_distance(pair.users, pair.user_weights, kappas, eps),
                fusion.origin_distance(pair.items, pair.item_weights, kappas, eps))

    def item_points(self, items, table, stage='final'):
        """
        Item coordinates for export.

        ``stage='base'`` gives the lifted base rows before propagation,
        ``stage='final'`` the fused points with attention conditioned on the origin.

        :return: list of ``(B, d)`` arrays, one per subspace
        """
        if stage == 'base':
            return [np.asarray(propagation.lift_items(items, self.subspace(m), self._spec.taylor_eps))
                    for m in range(self._spec.manifolds)]
        if stage != 'final':
            raise ValueError('Unknown export stage "{stage}"'.format(stage=stage))
        return [np.asarray(p) for p in self.forward(None, items, table).items]


def as_leaves(tape, params):
    """
    Record every parameter block on **tape** as a named leaf.

    :return: OrderedDict of name to :py:class:`mckgpy.diffengine.Var`
    """
    return collections.OrderedDict((name, tape.leaf(value, name=name)) for name, value in params.items())
