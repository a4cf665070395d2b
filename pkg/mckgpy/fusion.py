# Copyright (c) 2024, mckgpy developers
#
# mckgpy is distributed under the BSD 3-Clause License, see LICENSE.

"""
Fusion of several curvature subspaces into one ranking distance.

Points of different subspaces only meet in tangent coordinates at their
origins: the global average, the attention logits and the concatenation
update all work on ``log_o`` of each subspace point.
"""

import collections

import numpy as np

from . import diffengine as de
from . import stereographic as st
from .stereographic import ShapeContractError


class FusionParams(collections.namedtuple('FusionParams', ['projections', 'attention'])):
    """
    :var projections: Tuple of ``M`` matrices of shape ``(d, 2d)``, one per subspace.
    :var attention: ``(M, M * d)`` matrix mapping concatenated tangent vectors to logits.
    """


FusedPair = collections.namedtuple('FusedPair', ['users', 'items', 'user_weights', 'item_weights'])
"""
Fused user/item points (lists with one ``(B, d)`` entry per subspace) and their
``(B, M)`` subspace weights.
"""


def _check_counts(embeddings, kappas):
    if not len(embeddings):
        raise ShapeContractError('At least one subspace is required')
    if len(embeddings) != len(kappas):
        raise ShapeContractError('{n} subspace embeddings but {m} curvatures'.format(
            n=len(embeddings), m=len(kappas)))


def tangent_vectors(embeddings, kappas, eps=st.TAYLOR_EPS):
    """
    ``log_o`` of each subspace point under its own curvature.
    """
    _check_counts(embeddings, kappas)
    return [st.logmap0(e, k, eps) for e, k in zip(embeddings, kappas)]


def fuse_global(embeddings, kappas, projections, eps=st.TAYLOR_EPS):
    """
    Concatenate every subspace point with the global tangent average and project
    back to dimension ``d``:
    ``exp_o(P_m [log_o(e_m) || mean_m log_o(e_m)])``.

    :param embeddings: List of ``(B, d)`` points, one per subspace.
    :param kappas: Curvature of each subspace.
    :param projections: ``(d, 2d)`` matrix of each subspace.
    :return: List of updated ``(B, d)`` points.
    """
    logs = tangent_vectors(embeddings, kappas, eps)
    if len(projections) != len(logs):
        raise ShapeContractError('Expected {n} projections, got {m}'.format(n=len(logs), m=len(projections)))

    total = logs[0]
    for log in logs[1:]:
        total = total + log
    g = total / float(len(logs))

    fused = []
    for log, k, p in zip(logs, kappas, projections):
        dim = np.shape(de.value_of(log))[-1]
        if np.shape(de.value_of(p)) != (dim, 2 * dim):
            raise ShapeContractError('Projection must have shape {s}, got {p}'.format(
                s=(dim, 2 * dim), p=np.shape(de.value_of(p))))
        fused.append(st.expmap0(de.matmul(de.concat([log, g], axis=-1), de.transpose(p)), k, eps))
    return fused


def subspace_attention(embeddings, kappas, attention, eps=st.TAYLOR_EPS):
    """
    Softmax weights of the subspaces for each entity.

    :param embeddings: List of ``(B, d)`` points, one per subspace.
    :param kappas: Curvature of each subspace.
    :param attention: ``(M, M * d)`` matrix.
    :return: ``(B, M)`` weights summing to one along the last axis.
    """
    logs = tangent_vectors(embeddings, kappas, eps)
    stacked = de.concat(logs, axis=-1) if len(logs) > 1 else logs[0]
    shape = np.shape(de.value_of(attention))
    width = np.shape(de.value_of(stacked))[-1]
    if shape != (len(logs), width):
        raise ShapeContractError('Attention matrix must have shape {s}, got {a}'.format(
            s=(len(logs), width), a=shape))
    return de.softmax(de.matmul(stacked, de.transpose(attention)), axis=-1)


def _column(weights, m):
    return weights[:, m]


def global_distance(user_embeddings, item_embeddings, user_weights, item_weights, kappas, eps=st.TAYLOR_EPS):
    """
    Attention weighted sum of subspace distances,
    ``sum_m (w_u[m] + w_v[m]) d_m(e_u[m], e_v[m])``.

    :return: ``(B,)`` distances
    """
    _check_counts(user_embeddings, kappas)
    _check_counts(item_embeddings, kappas)
    total = None
    for m, k in enumerate(kappas):
        weight = _column(user_weights, m) + _column(item_weights, m)
        term = weight * st.dist(user_embeddings[m], item_embeddings[m], k, eps)
        total = term if total is None else total + term
    return total


def origin_distance(embeddings, weights, kappas, eps=st.TAYLOR_EPS):
    """
    Attention weighted distance to the origin, ``sum_m w[m] d_m(e[m], o)``.

    :return: ``(B,)`` distances
    """
    _check_counts(embeddings, kappas)
    total = None
    for m, k in enumerate(kappas):
        term = _column(weights, m) * st.dist0(embeddings[m], k, eps)
        total = term if total is None else total + term
    return total


def fuse(user_embeddings, item_embeddings, kappas, params, update=True, eps=st.TAYLOR_EPS):
    """
    Apply the concatenation update (when **update** is set) to users and items,
    then compute the subspace weights of both.

    :param params: :py:class:`FusionParams`
    :return: :py:class:`FusedPair`
    """
    if update:
        user_embeddings = fuse_global(user_embeddings, kappas, params.projections, eps)
        item_embeddings = fuse_global(item_embeddings, kappas, params.projections, eps)
    user_weights = subspace_attention(user_embeddings, kappas, params.attention, eps)
    item_weights = subspace_attention(item_embeddings, kappas, params.attention, eps)
    return FusedPair(list(user_embeddings), list(item_embeddings), user_weights, item_weights)
