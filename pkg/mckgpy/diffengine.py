# Copyright (c) 2024, mckgpy developers
#
# mckgpy is distributed under the BSD 3-Clause License, see LICENSE.

"""
Record/replay reverse-mode differentiation over a fixed set of numpy primitives.

Every public operation in this module accepts plain numbers, numpy arrays or
:py:class:`mckgpy.diffengine.Var` objects.  When none of the inputs is a
:py:class:`Var` the operation is evaluated directly and a numpy value is
returned, so the same code path serves pure evaluation and differentiation.

Example:

.. code-block:: python

    from mckgpy import diffengine as de

    tape = de.Tape()
    x = tape.leaf([1.0, 2.0], name='x')
    loss = de.sum(x * x)

    grads = tape.backward(loss)
    print(grads['x'])  # -> [2. 4.]
"""

import collections
import logging

import numpy as np

_LOG = logging.getLogger(__name__)


class UnregisteredPrimitiveError(KeyError):
    """
    Raised when recording an operation name that has no registered primitive.
    """

    def __init__(self, message):
        super(UnregisteredPrimitiveError, self).__init__(message)


class NonFiniteAdjointError(ArithmeticError):
    """
    Raised by :py:meth:`Tape.backward` when an adjoint becomes NaN or infinite.

    :var node_id: index of the offending tape node
    """

    def __init__(self, message, node_id):
        super(NonFiniteAdjointError, self).__init__(message)
        self.node_id = node_id


class Primitive(collections.namedtuple('Primitive', ['name', 'forward', 'adjoint'])):
    """
    A differentiable operation.

    :var name: Registry name.
    :var forward: ``forward(*values, **static) -> output``
    :var adjoint: ``adjoint(grad, output, values, **static) -> tuple`` with one
                  gradient (or **None**) per input value.
    """


class Node(collections.namedtuple('Node', ['index', 'primitive', 'inputs', 'values', 'output', 'static'])):
    """
    One recorded operation.  ``inputs`` holds the node index of each input, or
    **None** for constants.
    """


class GradientSet(dict):
    """
    Mapping of leaf name to gradient array, with the same shape as the leaf value.
    """

    def is_finite(self):
        return all(np.all(np.isfinite(g)) for g in self.values())


_PRIMITIVES = {}


def add_primitive(name, forward, adjoint):
    """
    Register a differentiable primitive.

    :param name: Registry name used by :py:func:`record`.
    :param forward: Function computing the output from input values.
    :param adjoint: Function computing input gradients from the output gradient.
    """
    _PRIMITIVES[name] = Primitive(name, forward, adjoint)


def get_primitives():
    """
    Get the registered primitive names.

    :return: Sorted list of names.
    """
    return sorted(_PRIMITIVES)


def _get_primitive(name):
    try:
        return _PRIMITIVES[name]
    except KeyError:
        raise UnregisteredPrimitiveError('No primitive registered under name: {name}'.format(name=name))


class Var:
    """
    A value recorded on a :py:class:`Tape`.
    """

    __slots__ = ('tape', 'index', 'value')

    # ndarray binary operators defer to the reflected Var operators
    __array_ufunc__ = None

    def __init__(self, tape, index, value):
        self.tape = tape
        self.index = index
        self.value = value

    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    def __repr__(self):
        return 'Var(index={index}, value={value})'.format(index=self.index, value=self.value)

    def __add__(self, other):
        return record('add', self, other)

    def __radd__(self, other):
        return record('add', other, self)

    def __sub__(self, other):
        return record('sub', self, other)

    def __rsub__(self, other):
        return record('sub', other, self)

    def __mul__(self, other):
        return record('mul', self, other)

    def __rmul__(self, other):
        return record('mul', other, self)

    def __truediv__(self, other):
        return record('div', self, other)

    def __rtruediv__(self, other):
        return record('div', other, self)

    def __neg__(self):
        return record('neg', self)

    def __pow__(self, exponent):
        return record('pow', self, exponent=exponent)

    def __matmul__(self, other):
        return record('matmul', self, other)

    def __rmatmul__(self, other):
        return record('matmul', other, self)

    def __getitem__(self, item):
        return record('getitem', self, item=item)


def value_of(x):
    """
    Get the numeric value of a :py:class:`Var` or array-like.

    :param x: :py:class:`Var`, numpy array or number
    :return: numpy array
    """
    if isinstance(x, Var):
        return x.value
    return np.asarray(x, dtype=np.float64)


def is_var(x):
    return isinstance(x, Var)


def _find_tape(inputs):
    tape = None
    for x in inputs:
        if isinstance(x, Var):
            if tape is None:
                tape = x.tape
            elif x.tape is not tape:
                raise ValueError('Operands recorded on different tapes cannot be combined.')
    return tape


def record(name, *inputs, **static):
    """
    Evaluate primitive **name** on **inputs**, recording it on the inputs' tape.

    When no input is a :py:class:`Var` the forward value is returned as is.

    :param name: Registered primitive name.
    :param inputs: :py:class:`Var` objects or constants.
    :param static: Non-differentiable keyword arguments of the primitive.
    :return: :py:class:`Var` or numpy value
    """
    primitive = _get_primitive(name)
    tape = _find_tape(inputs)
    values = [value_of(x) for x in inputs]
    output = primitive.forward(*values, **static)
    if tape is None:
        return output
    return tape.append(primitive, inputs, values, output, static)


class Tape:
    """
    Ordered record of primitive applications.  Nodes only reference earlier
    nodes, so reverse iteration is a valid topological order.

    One tape belongs to one worker; tapes are never shared between threads.
    """

    def __init__(self):
        self._nodes = []
        self._leaves = collections.OrderedDict()

    def __len__(self):
        return len(self._nodes)

    @property
    def nodes(self):
        """
        Get the recorded nodes.

        :return: list of :py:class:`Node`
        """
        return list(self._nodes)

    def leaf(self, value, name=None):
        """
        Create an input variable.  Named leaves receive an entry in the
        :py:class:`GradientSet` returned by :py:meth:`backward`.

        :param value: Initial value, copied as float64.
        :param name: Optional unique name.
        :return: :py:class:`Var`
        """
        value = np.array(value, dtype=np.float64)
        var = Var(self, len(self._nodes), value)
        self._nodes.append(Node(var.index, None, (), (), value, {}))
        if name is not None:
            if name in self._leaves:
                raise ValueError('Duplicate leaf name: {name}'.format(name=name))
            self._leaves[name] = var
        return var

    def append(self, primitive, inputs, values, output, static):
        index = len(self._nodes)
        input_ids = tuple(x.index if isinstance(x, Var) else None for x in inputs)
        self._nodes.append(Node(index, primitive, input_ids, values, output, static))
        return Var(self, index, output)

    def backward(self, loss, seed=1.0):
        """
        Propagate adjoints from the scalar **loss** back to every leaf.

        :param loss: Scalar :py:class:`Var` recorded on this tape.
        :param seed: Initial adjoint of the loss.
        :return: :py:class:`GradientSet` over the named leaves.
        :raises NonFiniteAdjointError: if an adjoint is NaN or infinite.
        """
        grads = GradientSet()

        if not isinstance(loss, Var) or loss.tape is not self:
            # constant loss
            for name, var in self._leaves.items():
                grads[name] = np.zeros_like(var.value)
            return grads

        if loss.value.size != 1:
            raise ValueError('backward() requires a scalar loss, got shape {shape}'.format(shape=loss.value.shape))

        adjoints = [None] * (loss.index + 1)
        adjoints[loss.index] = np.full(loss.value.shape, seed, dtype=np.float64)

        for node in reversed(self._nodes[:loss.index + 1]):
            g = adjoints[node.index]
            if g is None or node.primitive is None:
                continue

            if not np.all(np.isfinite(g)):
                raise NonFiniteAdjointError(
                    'Non-finite adjoint at node {index} ({name})'.format(index=node.index, name=node.primitive.name),
                    node.index)

            input_grads = node.primitive.adjoint(g, node.output, node.values, **node.static)

            for input_id, value, input_grad in zip(node.inputs, node.values, input_grads):
                if input_id is None or input_grad is None:
                    continue
                input_grad = _unbroadcast(input_grad, np.shape(value))
                if adjoints[input_id] is None:
                    adjoints[input_id] = input_grad
                else:
                    adjoints[input_id] = adjoints[input_id] + input_grad

        for name, var in self._leaves.items():
            g = adjoints[var.index] if var.index < len(adjoints) else None
            if g is None:
                g = np.zeros_like(var.value)
            elif not np.all(np.isfinite(g)):
                raise NonFiniteAdjointError(
                    'Non-finite gradient for leaf {name}'.format(name=name), var.index)
            grads[name] = np.array(g, dtype=np.float64).reshape(var.value.shape)

        return grads


def _unbroadcast(grad, shape):
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape == tuple(shape):
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


# ============ primitives ============

add_primitive('add',
              lambda a, b: a + b,
              lambda g, out, v: (g, g))

add_primitive('sub',
              lambda a, b: a - b,
              lambda g, out, v: (g, -g))

add_primitive('mul',
              lambda a, b: a * b,
              lambda g, out, v: (g * v[1], g * v[0]))

add_primitive('div',
              lambda a, b: a / b,
              lambda g, out, v: (g / v[1], -g * out / v[1]))

add_primitive('neg',
              lambda a: -a,
              lambda g, out, v: (-g,))


def _pow_adjoint(g, out, v, exponent):
    if exponent == 2:
        return (g * 2.0 * v[0],)
    return (g * exponent * np.power(v[0], exponent - 1),)


add_primitive('pow',
              lambda a, exponent: np.power(a, exponent),
              _pow_adjoint)


def _matmul_adjoint(g, out, v):
    a, b = v
    return (g @ np.swapaxes(b, -1, -2), np.swapaxes(a, -1, -2) @ g)


add_primitive('matmul',
              lambda a, b: a @ b,
              _matmul_adjoint)

add_primitive('transpose',
              lambda a: np.swapaxes(a, -1, -2),
              lambda g, out, v: (np.swapaxes(g, -1, -2),))


def _sum_adjoint(g, out, v, axis, keepdims):
    shape = np.shape(v[0])
    if axis is not None and not keepdims:
        g = np.expand_dims(g, axis)
    return (np.broadcast_to(g, shape),)


add_primitive('sum',
              lambda a, axis, keepdims: np.sum(a, axis=axis, keepdims=keepdims),
              _sum_adjoint)

add_primitive('sqrt',
              np.sqrt,
              lambda g, out, v: (g * 0.5 / out,))

add_primitive('exp',
              np.exp,
              lambda g, out, v: (g * out,))

add_primitive('log',
              np.log,
              lambda g, out, v: (g / v[0],))

add_primitive('tanh',
              np.tanh,
              lambda g, out, v: (g * (1.0 - out * out),))

add_primitive('tan',
              np.tan,
              lambda g, out, v: (g * (1.0 + out * out),))

add_primitive('arctan',
              np.arctan,
              lambda g, out, v: (g / (1.0 + v[0] * v[0]),))

add_primitive('arctanh',
              np.arctanh,
              lambda g, out, v: (g / (1.0 - v[0] * v[0]),))


def _sigmoid(a):
    return 0.5 * (1.0 + np.tanh(0.5 * a))


add_primitive('sigmoid',
              _sigmoid,
              lambda g, out, v: (g * out * (1.0 - out),))

add_primitive('leaky_relu',
              lambda a, slope: np.where(a > 0, a, slope * a),
              lambda g, out, v, slope: (np.where(v[0] > 0, g, slope * g),))

# subgradient 0 at the kink
add_primitive('relu',
              lambda a: np.maximum(a, 0.0),
              lambda g, out, v: (np.where(v[0] > 0, g, 0.0),))


def _norm(a, axis, keepdims):
    return np.sqrt(np.sum(a * a, axis=axis, keepdims=keepdims))


def _norm_adjoint(g, out, v, axis, keepdims):
    a = v[0]
    if not keepdims:
        g = np.expand_dims(g, axis)
        out = np.expand_dims(out, axis)
    # subgradient 0 at the origin
    safe = np.where(out > 0, out, 1.0)
    return (np.where(out > 0, g * a / safe, 0.0),)


add_primitive('norm',
              _norm,
              _norm_adjoint)


def _softmax(a, axis):
    shifted = a - np.max(a, axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=axis, keepdims=True)


def _softmax_adjoint(g, out, v, axis):
    return (out * (g - np.sum(g * out, axis=axis, keepdims=True)),)


add_primitive('softmax',
              _softmax,
              _softmax_adjoint)


def _clip_adjoint(g, out, v, lower, upper):
    a = v[0]
    inside = np.ones_like(a, dtype=bool)
    if lower is not None:
        inside &= a >= lower
    if upper is not None:
        inside &= a <= upper
    return (np.where(inside, g, 0.0),)


add_primitive('clip',
              lambda a, lower, upper: np.clip(a, lower, upper),
              _clip_adjoint)


add_primitive('where',
              lambda a, b, condition: np.where(condition, a, b),
              lambda g, out, v, condition: (np.where(condition, g, 0.0), np.where(condition, 0.0, g)))


def _concat_adjoint(g, out, v, axis):
    sizes = [np.shape(x)[axis] for x in v]
    splits = np.cumsum(sizes)[:-1]
    return tuple(np.split(g, splits, axis=axis))


add_primitive('concat',
              lambda *values, axis: np.concatenate(values, axis=axis),
              _concat_adjoint)

add_primitive('reshape',
              lambda a, shape: np.reshape(a, shape),
              lambda g, out, v, shape: (np.reshape(g, np.shape(v[0])),))


def _take_adjoint(g, out, v, indices):
    grad = np.zeros(np.shape(v[0]), dtype=np.float64)
    np.add.at(grad, indices, g)
    return (grad,)


add_primitive('take',
              lambda a, indices: a[indices],
              _take_adjoint)


def _getitem_adjoint(g, out, v, item):
    grad = np.zeros(np.shape(v[0]), dtype=np.float64)
    np.add.at(grad, item, g)
    return (grad,)


add_primitive('getitem',
              lambda a, item: a[item],
              _getitem_adjoint)


# ============ functional interface ============

def add(a, b):
    return record('add', a, b)


def matmul(a, b):
    """
    Matrix product ``a @ b``, batched over leading axes of **a**.
    """
    return record('matmul', a, b)


def transpose(a):
    """
    Swap the last two axes.
    """
    return record('transpose', a)


def sum(a, axis=None, keepdims=False):
    return record('sum', a, axis=axis, keepdims=keepdims)


def mean(a, axis=None, keepdims=False):
    count = np.size(value_of(a)) if axis is None else np.shape(value_of(a))[axis]
    return record('sum', a, axis=axis, keepdims=keepdims) / float(count)


def sqrt(a):
    return record('sqrt', a)


def exp(a):
    return record('exp', a)


def log(a):
    return record('log', a)


def tanh(a):
    return record('tanh', a)


def tan(a):
    return record('tan', a)


def arctan(a):
    return record('arctan', a)


def arctanh(a):
    return record('arctanh', a)


def sigmoid(a):
    return record('sigmoid', a)


def leaky_relu(a, slope=0.2):
    return record('leaky_relu', a, slope=slope)


def relu(a):
    return record('relu', a)


def norm(a, axis=-1, keepdims=True):
    """
    Euclidean norm along **axis**; the gradient at a zero vector is 0.
    """
    return record('norm', a, axis=axis, keepdims=keepdims)


def softmax(a, axis=-1):
    return record('softmax', a, axis=axis)


def clip(a, lower=None, upper=None):
    """
    Clamp **a**; gradient is passed inside the bounds and zero outside.
    """
    return record('clip', a, lower=lower, upper=upper)


def clamp_min(a, lower):
    return record('clip', a, lower=lower, upper=None)


def where(condition, a, b):
    """
    Select from **a** where the (constant) **condition** holds, else from **b**.
    """
    condition = np.asarray(condition, dtype=bool)
    return record('where', a, b, condition=condition)


def concat(values, axis=-1):
    return record('concat', *values, axis=axis)


def reshape(a, shape):
    return record('reshape', a, shape=tuple(shape))


def take(a, indices):
    """
    Gather rows of **a** (first axis) by integer **indices** of any shape.
    """
    return record('take', a, indices=np.asarray(indices, dtype=np.int64))


GradCheckReport = collections.namedtuple(
    'GradCheckReport', ['max_error', 'max_abs_error', 'passed', 'worst_parameter', 'worst_index', 'analytic',
                        'numeric'])
"""
Result of :py:func:`grad_check`.

:var max_error: Largest relative error ``|a - n| / (|a| + |n|)`` over every checked entry.
:var max_abs_error: Largest absolute error ``|a - n|``.
:var passed: **True** if every entry is within **tol** relative or **atol** absolute error.
:var worst_parameter: Name of the parameter holding the entry furthest from passing.
:var worst_index: Index tuple of that entry.
:var analytic: :py:class:`GradientSet` from :py:meth:`Tape.backward`.
:var numeric: Central difference gradients, same layout.
"""


def grad_check(f, params, tol=1e-4, step=1e-6, atol=1e-8):
    """
    Compare reverse-mode gradients of scalar **f** with central differences.

    **f** receives a dict of parameter name to value.  It is called once with
    :py:class:`Var` leaves and then repeatedly with plain numpy arrays, so it must
    only use operations from this module (or operators on :py:class:`Var`).

    An entry passes when its relative error ``|a - n| / (|a| + |n|)`` is below
    **tol** or its absolute error is below **atol**.  The absolute bound covers
    entries whose exact gradient is zero, where the central difference only
    carries rounding noise.

    :param f: Function of a parameter dict returning a scalar.
    :param params: dict of name to array-like (scalars allowed, e.g. a curvature).
    :param tol: Relative error threshold.
    :param step: Central difference step.
    :param atol: Absolute error threshold.
    :return: :py:class:`GradCheckReport`
    """
    params = collections.OrderedDict((name, np.array(value, dtype=np.float64)) for name, value in params.items())

    tape = Tape()
    leaves = {name: tape.leaf(value, name=name) for name, value in params.items()}
    analytic = tape.backward(f(leaves))

    numeric = GradientSet()
    max_error = 0.0
    max_abs_error = 0.0
    worst_score = -1.0
    worst_parameter = None
    worst_index = None

    for name, value in params.items():
        grad = np.zeros_like(value)
        for index in np.ndindex(*value.shape):
            shifted = dict(params)

            plus = value.copy()
            plus[index] += step
            shifted[name] = plus
            f_plus = float(np.sum(value_of(f(shifted))))

            minus = value.copy()
            minus[index] -= step
            shifted[name] = minus
            f_minus = float(np.sum(value_of(f(shifted))))

            grad[index] = (f_plus - f_minus) / (2.0 * step)

            a = analytic[name][index]
            n = grad[index]
            abs_error = abs(a - n)
            scale = abs(a) + abs(n)
            error = abs_error / scale if scale > 0.0 else 0.0
            max_error = max(max_error, error)
            max_abs_error = max(max_abs_error, abs_error)

            # below 1 for a passing entry
            score = min(error / tol, abs_error / atol)
            if score > worst_score:
                worst_score = score
                worst_parameter = name
                worst_index = index

        numeric[name] = grad

    return GradCheckReport(max_error, max_abs_error, worst_score < 1.0, worst_parameter, worst_index, analytic,
                           numeric)
