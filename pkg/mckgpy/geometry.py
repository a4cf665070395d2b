# Copyright (c) 2024, mckgpy developers
#
# mckgpy is distributed under the BSD 3-Clause License, see LICENSE.

r"""
Typed point API over the unified :math:`\kappa`-stereographic space.

A :py:class:`Curvature` is the context of every :py:class:`ManifoldPoint`;
a :py:class:`TangentVector` is attached to the point it is based at.  The
functions here validate their operands and delegate to the batched math in
:py:mod:`mckgpy.stereographic`.

Example:

.. code-block:: python

    from mckgpy.geometry import Curvature, make_point, dist

    k = Curvature(-1.0)
    o = make_point([0.0, 0.0], k)
    y = make_point([0.5, 0.0], k)

    print(dist(o, y))  # -> 1.0986... (ln 3)
"""

import collections
import math

import numpy as np

from . import stereographic as st
from .stereographic import GeometryDomainError, NumericalDegeneracyError, ShapeContractError

__all__ = [
    'Curvature',
    'ManifoldPoint',
    'TangentVector',
    'GeometryDomainError',
    'NumericalDegeneracyError',
    'ShapeContractError',
    'make_point',
    'origin',
    'tangent',
    'tan_kappa',
    'atan_kappa',
    'conformal_factor',
    'mobius_add',
    'exp_map',
    'log_map',
    'dist',
    'mobius_matvec',
    'kappa_concat',
    'kappa_dot',
    'project_to_domain',
]


class Curvature(collections.namedtuple('Curvature', ['kappa', 'taylor_eps'])):
    """
    Signed sectional curvature of a subspace.

    :var kappa: Any finite real; negative is hyperbolic, zero Euclidean, positive spherical.
    :var taylor_eps: Curvatures with ``|kappa| <= taylor_eps`` use the cubic expansion branch.
    """

    def __new__(cls, kappa, taylor_eps=st.TAYLOR_EPS):
        kappa = float(kappa)
        if not math.isfinite(kappa):
            raise GeometryDomainError('Curvature must be finite, got {kappa}'.format(kappa=kappa))
        return super(Curvature, cls).__new__(cls, kappa, float(taylor_eps))

    @property
    def radius(self):
        """
        Radius of the domain ball for negative curvature, **inf** otherwise.
        """
        if self.kappa < 0:
            return 1.0 / math.sqrt(-self.kappa)
        return math.inf


class ManifoldPoint(collections.namedtuple('ManifoldPoint', ['coords', 'context'])):
    """
    A point of the unified space.

    :var coords: 1-d float64 array.
    :var context: :py:class:`Curvature`
    """

    @property
    def dim(self):
        return self.coords.shape[0]


class TangentVector(collections.namedtuple('TangentVector', ['coords', 'base'])):
    """
    A tangent vector at **base**.

    :var coords: 1-d float64 array with the dimension of **base**.
    :var base: :py:class:`ManifoldPoint`
    """


def _coords(values):
    coords = np.array(values, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(coords)):
        raise GeometryDomainError('Coordinates must be finite')
    return coords


def _check_same_space(x, y):
    if x.context.kappa != y.context.kappa:
        raise ShapeContractError('Points live in spaces of different curvature')
    if x.dim != y.dim:
        raise ShapeContractError(
            'Dimension mismatch: {a} and {b}'.format(a=x.dim, b=y.dim))


def make_point(coords, k):
    """
    Create a :py:class:`ManifoldPoint`, rejecting coordinates outside the domain.

    :param coords: Sequence of floats.
    :param k: :py:class:`Curvature` or a float.
    :return: :py:class:`ManifoldPoint`
    :raises GeometryDomainError: for non-finite or out-of-domain coordinates.
    """
    if not isinstance(k, Curvature):
        k = Curvature(k)
    coords = _coords(coords)
    if np.linalg.norm(coords) >= k.radius:
        raise GeometryDomainError(
            'Point with norm {n} is outside the ball of radius {r}'.format(n=np.linalg.norm(coords), r=k.radius))
    return ManifoldPoint(coords, k)


def origin(dim, k):
    if not isinstance(k, Curvature):
        k = Curvature(k)
    return ManifoldPoint(np.zeros(dim), k)


def tangent(coords, base):
    """
    Create a :py:class:`TangentVector` at **base**.
    """
    coords = _coords(coords)
    if coords.shape[0] != base.dim:
        raise ShapeContractError('Tangent vector dimension does not match its base point')
    return TangentVector(coords, base)


def _scalar(t):
    t = float(t)
    if not math.isfinite(t):
        raise GeometryDomainError('Non-finite argument {t}'.format(t=t))
    return t


def tan_kappa(t, k):
    r"""
    :math:`\tan_\kappa(t)`.

    :param t: float
    :param k: :py:class:`Curvature`
    :return: float
    """
    return float(st.tan_k(_scalar(t), k.kappa, k.taylor_eps))


def atan_kappa(t, k):
    r"""
    :math:`\tan_\kappa^{-1}(t)`.

    :param t: float
    :param k: :py:class:`Curvature`
    :return: float
    """
    return float(st.artan_k(_scalar(t), k.kappa, k.taylor_eps))


def conformal_factor(x):
    r"""
    :math:`\lambda_x^\kappa = 2/(1+\kappa\|x\|^2)`.

    :param x: :py:class:`ManifoldPoint`
    :return: float
    """
    return float(st.lambda_x(x.coords, x.context.kappa)[0])


def mobius_add(x, y):
    _check_same_space(x, y)
    return ManifoldPoint(st.mobius_add(x.coords, y.coords, x.context.kappa), x.context)


def exp_map(x, v):
    """
    Exponential map of tangent vector **v** at **x**.

    :param x: :py:class:`ManifoldPoint`
    :param v: :py:class:`TangentVector` based at **x**
    :return: :py:class:`ManifoldPoint`
    :raises ShapeContractError: if **v** is based at another point.
    """
    if v.coords.shape[0] != x.dim:
        raise ShapeContractError('Tangent vector dimension does not match its base point')
    if v.base.context != x.context or not np.array_equal(v.base.coords, x.coords):
        raise ShapeContractError('Tangent vector is based at another point')
    k = x.context
    return ManifoldPoint(st.expmap(x.coords, v.coords, k.kappa, k.taylor_eps), k)


def log_map(x, y):
    """
    Logarithmic map of **y** at **x**; the zero vector when the points coincide.

    :return: :py:class:`TangentVector` based at **x**
    """
    _check_same_space(x, y)
    k = x.context
    return TangentVector(st.logmap(x.coords, y.coords, k.kappa, k.taylor_eps), x)


def dist(x, y):
    """
    Geodesic distance between two points of the same space.

    :return: float
    """
    _check_same_space(x, y)
    k = x.context
    return float(st.dist(x.coords, y.coords, k.kappa, k.taylor_eps))


def mobius_matvec(m, y):
    """
    Möbius matrix-vector product; a scalar **m** gives scalar Möbius multiplication.

    :param m: 2-d array with ``y.dim`` columns, or a scalar.
    :param y: :py:class:`ManifoldPoint`
    :return: :py:class:`ManifoldPoint` with one coordinate per row of **m**.
    """
    k = y.context
    m = np.asarray(m, dtype=np.float64)
    return ManifoldPoint(st.mobius_matvec(m, y.coords, k.kappa, k.taylor_eps), k)


def kappa_concat(x, y):
    """
    Concatenate in the tangent space of the origin; output dimension is ``x.dim + y.dim``.
    """
    if x.context.kappa != y.context.kappa:
        raise ShapeContractError('Points live in spaces of different curvature')
    k = x.context
    return ManifoldPoint(st.kappa_concat(x.coords, y.coords, k.kappa, k.taylor_eps), k)


def kappa_dot(x, y):
    """
    Inner product of the origin log maps of **x** and **y**.

    :return: float
    """
    _check_same_space(x, y)
    k = x.context
    return float(st.kappa_dot(x.coords, y.coords, k.kappa, k.taylor_eps))


def project_to_domain(x, k):
    """
    Turn a raw vector into a :py:class:`ManifoldPoint`, rescaling it onto radius
    ``(1 - 1e-5)/sqrt(|kappa|)`` when it lies on or beyond that radius of a
    negatively curved space.

    :param x: Sequence of floats.
    :param k: :py:class:`Curvature` or a float.
    :return: :py:class:`ManifoldPoint`
    """
    if not isinstance(k, Curvature):
        k = Curvature(k)
    return ManifoldPoint(st.project(_coords(x), k.kappa), k)
