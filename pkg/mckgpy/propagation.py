# Copyright (c) 2024, mckgpy developers
#
# mckgpy is distributed under the BSD 3-Clause License, see LICENSE.

"""
Forward pass of a single curvature subspace.

Parameters are Euclidean; rows are lifted onto the subspace with the origin
exponential map right after they are gathered.  An item's receptive field is
expanded ``depth`` hops through a :py:class:`mckgpy.kgdata.ReceptiveTable` and
aggregated from the outermost hop inwards, one weight matrix per iteration.

Every function accepts numpy arrays or :py:class:`mckgpy.diffengine.Var`
parameters, so the same code evaluates and records gradients.
"""

import collections
import enum

import numpy as np

from . import diffengine as de
from . import stereographic as st
from .stereographic import ShapeContractError

DEFAULT_LEAKY_SLOPE = 0.2


class AggregatorKind(enum.Enum):
    """
    Rule combining an entity with its neighborhood.

    :var GCN: Möbius sum of entity and neighborhood.
    :var GRAPHSAGE: Tangent concatenation of entity and neighborhood, weights map ``2d -> d``.
    :var NEIGHBOR: Neighborhood only.
    """

    GCN = 'gcn'
    GRAPHSAGE = 'graphsage'
    NEIGHBOR = 'neighbor'

    @classmethod
    def parse(cls, name):
        """
        Get a kind from its case insensitive name.

        :raises ValueError: for an unknown name.
        """
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).strip().lower())
        except ValueError:
            raise ValueError('Unknown aggregator "{name}", expected one of: {names}'.format(
                name=name, names=', '.join(k.value for k in cls)))

    @property
    def input_multiplier(self):
        """
        Input width of the layer weights in units of the embedding dimension.
        """
        return 2 if self is AggregatorKind.GRAPHSAGE else 1


class SubspaceParams(collections.namedtuple(
        'SubspaceParams', ['user_emb', 'entity_emb', 'relation_emb', 'weights', 'biases', 'kappa'])):
    """
    Parameters of one subspace.  Every field is an array or a
    :py:class:`mckgpy.diffengine.Var`.

    :var user_emb: ``(users, d)`` Euclidean user rows.
    :var entity_emb: ``(entities, d)`` Euclidean entity rows.
    :var relation_emb: ``(relations + 1, d)`` Euclidean relation rows; the last row is the self-loop relation.
    :var weights: Tuple of per iteration ``(d, d)`` or ``(d, 2d)`` matrices.
    :var biases: Tuple of per iteration ``(d,)`` vectors.
    :var kappa: 0-d curvature.
    """

    @property
    def dim(self):
        return np.shape(de.value_of(self.entity_emb))[-1]

    @property
    def depth(self):
        return len(self.weights)


LiftedEmbeddings = collections.namedtuple('LiftedEmbeddings', ['user', 'entity', 'relation'])

SubspaceOutput = collections.namedtuple('SubspaceOutput', ['user', 'item'])


def lift_rows(table, ids, k, eps=st.TAYLOR_EPS):
    """
    Gather rows of a Euclidean **table** and map them onto the subspace.

    :return: array of shape ``ids.shape + (d,)``
    """
    return st.expmap0(de.take(table, ids), k, eps)


def lift(params, eps=st.TAYLOR_EPS):
    """
    Map every user, entity and relation row onto the subspace.

    :param params: :py:class:`SubspaceParams`
    :return: :py:class:`LiftedEmbeddings`
    """
    k = params.kappa
    return LiftedEmbeddings(st.expmap0(params.user_emb, k, eps),
                            st.expmap0(params.entity_emb, k, eps),
                            st.expmap0(params.relation_emb, k, eps))


def relation_attention(e_u, e_r, k, eps=st.TAYLOR_EPS):
    """
    Score of relation **e_r** for user **e_u**, the tangent inner product at the origin.
    Operands broadcast; the coordinate axis is reduced.
    """
    return st.kappa_dot(e_u, e_r, k, eps)


def neighbor_aggregate(e_u, e_r, e_a, k, eps=st.TAYLOR_EPS):
    """
    User conditioned neighborhood representation.

    Relation scores are softmax normalized across the sample axis (``-2`` of
    **e_a**) and the neighbors are averaged in the tangent space of the origin,
    so the result does not depend on the order of the sample.

    :param e_u: User points, broadcastable against **e_r**.
    :param e_r: ``(..., S, d)`` relation points of the sampled edges.
    :param e_a: ``(..., S, d)`` neighbor points.
    :param k: Curvature.
    :return: ``(..., d)``
    """
    scores = de.softmax(relation_attention(e_u, e_r, k, eps), axis=-1)
    return st.tangent_mean(e_a, scores, k, axis=-2, eps=eps)


def aggregate_layer(kind, e_v, e_s, w, b, k, slope=DEFAULT_LEAKY_SLOPE, eps=st.TAYLOR_EPS):
    """
    One aggregation iteration for entity points **e_v** with neighborhoods **e_s**.

    The aggregated point ``h`` is ``e_v (+) e_s`` for GCN, the tangent concatenation
    of ``e_v`` and ``e_s`` for GraphSage and ``e_s`` for Neighbor.  The output is
    ``exp_o(leaky(log_o((W (x) h) (+) exp_o(b))))``.

    :param kind: :py:class:`AggregatorKind`
    :raises ShapeContractError: if **w** does not fit the aggregated width.
    """
    kind = AggregatorKind.parse(kind)
    if kind is AggregatorKind.GCN:
        h = st.mobius_add(e_v, e_s, k)
    elif kind is AggregatorKind.GRAPHSAGE:
        h = st.kappa_concat(e_v, e_s, k, eps)
    else:
        h = e_s

    w_shape = np.shape(de.value_of(w))
    width = np.shape(de.value_of(h))[-1]
    if len(w_shape) != 2 or w_shape[1] != width:
        raise ShapeContractError('{kind} aggregator needs weights with {n} columns, got shape {shape}'.format(
            kind=kind.name, n=width, shape=w_shape))
    if np.shape(de.value_of(b)) != (w_shape[0],):
        raise ShapeContractError('Bias shape {b} does not match weights {w}'.format(
            b=np.shape(de.value_of(b)), w=w_shape))

    transformed = st.mobius_add(st.mobius_matvec(w, h, k, eps), st.expmap0(b, k, eps), k)
    return st.expmap0(de.leaky_relu(st.logmap0(transformed, k, eps), slope), k, eps)


def layer_combine(layers, k):
    """
    Left to right Möbius sum of the per layer points of an entity.

    :param layers: Sequence of points ``e^(0), ..., e^(K)`` with equal shapes.
    """
    if not len(layers):
        raise ValueError('layer_combine() needs at least one layer')
    combined = layers[0]
    for layer in layers[1:]:
        combined = st.mobius_add(combined, layer, k)
    return combined


def receptive_field(items, table, depth):
    """
    Expand the receptive field of **items** through a sampled neighbor table.

    :param items: int array of shape ``(B,)``
    :param table: :py:class:`mckgpy.kgdata.ReceptiveTable`
    :param depth: Number of hops.
    :return: tuple(entities, relations); ``entities[h]`` has shape ``(B, S**h)``
             and ``relations[h]`` has shape ``(B, S**(h+1))``.
    """
    items = np.asarray(items, dtype=np.int64).reshape(-1)
    entities = [items.reshape(-1, 1)]
    relations = []
    for _ in range(depth):
        frontier = entities[-1]
        relations.append(table.relations[frontier].reshape(len(items), -1))
        entities.append(table.neighbors[frontier].reshape(len(items), -1))
    return entities, relations


def forward_subspace(users, items, params, table, depth, aggregator, slope=DEFAULT_LEAKY_SLOPE,
                     eps=st.TAYLOR_EPS):
    """
    Final user and item points of one subspace.

    Users keep their lifted base point.  Items are propagated **depth** hops and
    the item point after every iteration is combined with :py:func:`layer_combine`.

    :param users: int array ``(B,)``, or **None** to condition attention on the origin.
    :param items: int array ``(B,)``
    :param params: :py:class:`SubspaceParams`
    :param table: :py:class:`mckgpy.kgdata.ReceptiveTable`
    :param depth: Number of hops, equal to ``params.depth``.
    :param aggregator: :py:class:`AggregatorKind` or its name.
    :return: :py:class:`SubspaceOutput` with ``(B, d)`` points.
    """
    if depth != params.depth:
        raise ShapeContractError('Depth {k} does not match {n} layers of weights'.format(k=depth, n=params.depth))
    kind = AggregatorKind.parse(aggregator)
    k = params.kappa
    items = np.asarray(items, dtype=np.int64).reshape(-1)
    batch = len(items)
    size = table.size

    if users is None:
        e_u = np.zeros((batch, params.dim))
    else:
        e_u = lift_rows(params.user_emb, np.asarray(users, dtype=np.int64).reshape(-1), k, eps)

    entities, relations = receptive_field(items, table, depth)
    vectors = [lift_rows(params.entity_emb, ids, k, eps) for ids in entities]
    relation_vectors = [lift_rows(params.relation_emb, ids, k, eps) for ids in relations]
    user_view = de.reshape(e_u, (batch, 1, 1, params.dim))

    layers = [de.reshape(vectors[0], (batch, params.dim))]
    for iteration in range(depth):
        w = params.weights[iteration]
        b = params.biases[iteration]
        next_vectors = []
        for hop in range(depth - iteration):
            width = np.shape(de.value_of(vectors[hop]))[1]
            neighbors = de.reshape(vectors[hop + 1], (batch, width, size, params.dim))
            edges = de.reshape(relation_vectors[hop], (batch, width, size, params.dim))
            e_s = neighbor_aggregate(user_view, edges, neighbors, k, eps)
            next_vectors.append(aggregate_layer(kind, vectors[hop], e_s, w, b, k, slope, eps))
        vectors = next_vectors
        layers.append(de.reshape(vectors[0], (batch, params.dim)))

    return SubspaceOutput(de.reshape(e_u, (batch, params.dim)), layer_combine(layers, k))


def lift_items(items, params, eps=st.TAYLOR_EPS):
    """
    Base points of **items** before any propagation.
    """
    return lift_rows(params.entity_emb, np.asarray(items, dtype=np.int64).reshape(-1), params.kappa, eps)
