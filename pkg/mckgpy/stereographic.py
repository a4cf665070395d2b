# Copyright (c) 2024, mckgpy developers
#
# mckgpy is distributed under the BSD 3-Clause License, see LICENSE.

r"""
Batched :math:`\kappa`-stereographic gyrovector math.

Points and tangent vectors are arrays whose last axis is the coordinate axis.
The curvature **k** is a python float, a 0-d array or a 0-d
:py:class:`mckgpy.diffengine.Var`; every function is differentiable with
respect to both the coordinates and **k** when they are recorded on a tape.

The branch for :math:`|\kappa| \le` **eps** uses the cubic expansions of
:math:`\tan_\kappa` and :math:`\tan_\kappa^{-1}`, which keeps values and
curvature gradients continuous across zero.
"""

import math

import numpy as np

from . import diffengine as de

MIN_NORM = 1e-15
"""
Floor applied to vector norms before dividing by them.
"""

BALL_EPS = 1e-5
"""
Relative safety margin kept inside the ball of radius :math:`1/\\sqrt{-\\kappa}`.
"""

TAYLOR_EPS = 1e-7
"""
Curvatures with magnitude at most this value use the cubic expansion branch.
"""

ATANH_CLAMP = 1.0 - 1e-12

TAN_MARGIN = 1e-6

DEGENERATE_DENOMINATOR = 1e-15


class GeometryDomainError(ValueError):
    """
    Raised for non-finite input or points outside the domain of the curvature.
    """

    def __init__(self, message):
        super(GeometryDomainError, self).__init__(message)


class NumericalDegeneracyError(ArithmeticError):
    """
    Raised when the Möbius addition denominator vanishes.
    """

    def __init__(self, message):
        super(NumericalDegeneracyError, self).__init__(message)


class ShapeContractError(ValueError):
    """
    Raised when operand shapes do not match an operation's contract.
    """

    def __init__(self, message):
        super(ShapeContractError, self).__init__(message)


def kappa_value(k):
    """
    Get the curvature as a python float.
    """
    return float(de.value_of(k))


def _sq_norm(x):
    return de.sum(x * x, axis=-1, keepdims=True)


def _inner(x, y):
    return de.sum(x * y, axis=-1, keepdims=True)


def _safe_norm(x):
    return de.clamp_min(de.norm(x, axis=-1, keepdims=True), MIN_NORM)


def tan_k(t, k, eps=TAYLOR_EPS):
    r"""
    :math:`\tan_\kappa(t)`.

    For :math:`\kappa > 0` the argument is clamped to
    :math:`\pi / (2\sqrt{\kappa}) - 10^{-6}` so the result saturates instead of
    overflowing.
    """
    kv = kappa_value(k)
    if abs(kv) <= eps:
        return t + k * t ** 3 / 3.0
    if kv > 0:
        s = de.sqrt(k)
        bound = math.pi / (2.0 * math.sqrt(kv)) - TAN_MARGIN
        return de.tan(de.clip(t, -bound, bound) * s) / s
    s = de.sqrt(-k)
    return de.tanh(t * s) / s


def artan_k(t, k, eps=TAYLOR_EPS):
    r"""
    :math:`\tan_\kappa^{-1}(t)`, the inverse of :py:func:`tan_k`.

    For :math:`\kappa < 0` the argument of :math:`\tanh^{-1}` is clamped to
    :math:`\pm(1 - 10^{-12})`.
    """
    kv = kappa_value(k)
    if abs(kv) <= eps:
        return t - k * t ** 3 / 3.0
    if kv > 0:
        s = de.sqrt(k)
        return de.arctan(t * s) / s
    s = de.sqrt(-k)
    return de.arctanh(de.clip(t * s, -ATANH_CLAMP, ATANH_CLAMP)) / s


def lambda_x(x, k):
    r"""
    Conformal factor :math:`\lambda_x^\kappa = 2 / (1 + \kappa \|x\|_2^2)`, keeping the last axis.

    :raises GeometryDomainError: if the denominator is not positive.
    """
    denominator = 1.0 + k * _sq_norm(x)
    if np.any(de.value_of(denominator) <= 0):
        raise GeometryDomainError('Point outside the domain of curvature {k}'.format(k=kappa_value(k)))
    return 2.0 / denominator


def project(x, k, eps=BALL_EPS):
    r"""
    Pull points with :math:`\|x\| \ge (1 - eps)/\sqrt{|\kappa|}` back onto that radius
    when :math:`\kappa < 0`.  Other points and curvatures pass through unchanged.
    """
    kv = kappa_value(k)
    if kv >= 0:
        return x
    max_norm = (1.0 - eps) / math.sqrt(-kv)
    n = _safe_norm(x)
    outside = de.value_of(n) >= max_norm
    if not np.any(outside):
        return x
    return x * de.where(outside, max_norm / n, 1.0)


def mobius_add(x, y, k):
    r"""
    Möbius addition :math:`x \oplus_\kappa y`.

    :raises NumericalDegeneracyError: if the denominator magnitude drops below 1e-15.
    """
    x2 = _sq_norm(x)
    y2 = _sq_norm(y)
    xy = _inner(x, y)
    num = (1.0 - 2.0 * k * xy - k * y2) * x + (1.0 + k * x2) * y
    denom = 1.0 - 2.0 * k * xy + k * k * x2 * y2
    if np.any(np.abs(de.value_of(denom)) < DEGENERATE_DENOMINATOR):
        raise NumericalDegeneracyError('Möbius addition denominator vanished')
    return project(num / denom, k)


def expmap(x, v, k, eps=TAYLOR_EPS):
    r"""
    :math:`\exp_x^\kappa(v) = x \oplus_\kappa \tan_\kappa(\lambda_x^\kappa \|v\|/2) \, v/\|v\|`.
    """
    v_norm = _safe_norm(v)
    second = tan_k(lambda_x(x, k) * v_norm / 2.0, k, eps) * (v / v_norm)
    return mobius_add(x, second, k)


def expmap0(v, k, eps=TAYLOR_EPS):
    r"""
    Exponential map at the origin, :math:`\tan_\kappa(\|v\|) \, v/\|v\|`, projected into the domain.
    """
    v_norm = _safe_norm(v)
    return project(tan_k(v_norm, k, eps) * (v / v_norm), k)


def logmap(x, y, k, eps=TAYLOR_EPS):
    r"""
    :math:`\log_x^\kappa(y)`; the zero vector when :math:`x = y`.
    """
    sub = mobius_add(-x, y, k)
    sub_norm = _safe_norm(sub)
    return 2.0 / lambda_x(x, k) * artan_k(sub_norm, k, eps) * (sub / sub_norm)


def logmap0(y, k, eps=TAYLOR_EPS):
    r"""
    Logarithmic map at the origin, :math:`\tan_\kappa^{-1}(\|y\|) \, y/\|y\|`.
    """
    y_norm = _safe_norm(y)
    return artan_k(y_norm, k, eps) * (y / y_norm)


def dist(x, y, k, eps=TAYLOR_EPS):
    r"""
    Geodesic distance :math:`2 \tan_\kappa^{-1}(\|-x \oplus_\kappa y\|)`, reducing the last axis.
    """
    return 2.0 * artan_k(de.norm(mobius_add(-x, y, k), axis=-1, keepdims=False), k, eps)


def dist0(x, k, eps=TAYLOR_EPS):
    """
    Geodesic distance to the origin, reducing the last axis.
    """
    return 2.0 * artan_k(de.norm(x, axis=-1, keepdims=False), k, eps)


def mobius_matvec(m, y, k, eps=TAYLOR_EPS):
    r"""
    :math:`M \otimes_\kappa y = \exp_o^\kappa(M \log_o^\kappa(y))`.

    **m** has shape ``(rows, cols)`` with ``cols == y.shape[-1]``; a 0-d **m**
    gives the scalar Möbius multiplication.

    :raises ShapeContractError: on a column count mismatch.
    """
    m_shape = np.shape(de.value_of(m))
    tangent = logmap0(y, k, eps)
    if len(m_shape) == 0:
        return expmap0(m * tangent, k, eps)
    if len(m_shape) != 2 or m_shape[1] != np.shape(de.value_of(y))[-1]:
        raise ShapeContractError(
            'Cannot multiply matrix of shape {m} with points of dimension {n}'.format(
                m=m_shape, n=np.shape(de.value_of(y))[-1]))
    return expmap0(de.matmul(tangent, de.transpose(m)), k, eps)


def kappa_concat(x, y, k, eps=TAYLOR_EPS):
    r"""
    :math:`\exp_o^\kappa(\log_o^\kappa(x) \,\|\, \log_o^\kappa(y))`, doubling the last axis.
    """
    return expmap0(de.concat([logmap0(x, k, eps), logmap0(y, k, eps)], axis=-1), k, eps)


def kappa_dot(x, y, k, eps=TAYLOR_EPS):
    r"""
    Tangent space inner product :math:`\langle \log_o^\kappa(x), \log_o^\kappa(y) \rangle`,
    reducing the last axis.
    """
    return de.sum(logmap0(x, k, eps) * logmap0(y, k, eps), axis=-1)


def tangent_mean(points, weights, k, axis=-2, eps=TAYLOR_EPS):
    r"""
    Weighted mean taken in the tangent space of the origin:
    :math:`\exp_o^\kappa(\sum_a w_a \log_o^\kappa(p_a))`.

    **weights** has the shape of **points** without the coordinate axis; the
    summation runs over **axis** of **points**.
    """
    weighted = de.reshape(weights, np.shape(de.value_of(weights)) + (1,)) * logmap0(points, k, eps)
    return expmap0(de.sum(weighted, axis=axis), k, eps)
