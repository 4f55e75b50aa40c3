"""Truncated multivariate Taylor arithmetic (jets) up to order 3.

A :class:`Jet3` carries a value array together with its first, second and
third partial derivatives with respect to ``m`` chart variables.  Derivative
axes come *first*, value axes last::

    v   : S
    d1  : (m,) + S
    d2  : (m, m) + S
    d3  : (m, m, m) + S

so a jet of an ambient vector simply has ``S == (n,)`` and a jet of a matrix
``S == (n, k)``.  Products follow the multivariate Leibniz rule and unary
functions the Faa di Bruno formula, both truncated at ``order``.

The module-level helpers (:func:`sqrt`, :func:`inv`, :func:`solve`,
:func:`stack`, ...) accept plain numpy arrays as well, which lets the frame
and shape-operator code run unchanged on floats or on jets.
"""

from __future__ import annotations

import itertools
import math
from functools import lru_cache

import numpy as np

__all__ = [
    "Jet3",
    "JetDomainError",
    "value",
    "is_jet",
    "sqrt",
    "exp",
    "log",
    "sin",
    "cos",
    "inv",
    "solve",
    "stack",
    "matmul",
    "inner_sum",
]

_INF_ORDER = 99


class JetDomainError(ValueError):
    """Raised when a function is applied outside its smooth real domain."""


@lru_cache(maxsize=None)
def _canonical_index(m: int, k: int):
    """Index arrays mapping every k-tuple to its sorted representative."""
    grids = np.indices((m,) * k).reshape(k, -1).T
    srt = np.sort(grids, axis=1)
    return tuple(srt[:, a].reshape((m,) * k) for a in range(k))


def _symmetrize(block, k):
    if block is None or k < 2:
        return block
    m = block.shape[0]
    return block[_canonical_index(m, k)]


def _place(block, k, positions, q, nval):
    """Reshape a k-derivative block so its axes sit at ``positions`` of q.

    Value axes are left-padded with singleton axes up to ``nval`` dims.
    """
    m = block.shape[0] if k else None
    sval = block.shape[k:]
    lead = [1] * q
    for p in positions:
        lead[p] = m
    return block.reshape(tuple(lead) + (1,) * (nval - len(sval)) + sval)


class Jet3:
    """Value plus partial derivatives up to ``order`` (at most 3)."""

    __slots__ = ("order", "m", "v", "d")

    __array_priority__ = 1000

    def __init__(self, v, d1=None, d2=None, d3=None, *, m=None, order=None):
        self.v = np.asarray(v, dtype=float)
        blocks = [d1, d2, d3]
        if m is None:
            for b in blocks:
                if b is not None:
                    m = np.shape(b)[0]
                    break
        self.m = m
        if order is None:
            order = 0
            for k, b in enumerate(blocks, start=1):
                if b is not None:
                    order = k
        self.order = order
        d = []
        for k, b in enumerate(blocks, start=1):
            if k > order:
                break
            if b is None:
                d.append(None)
            else:
                d.append(np.asarray(b, dtype=float))
        self.d = d

    # -- construction -------------------------------------------------
    @classmethod
    def variable(cls, point, index: int, order: int = 3):
        """Jet of the chart coordinate ``v[index]`` at ``point``.

        ``point`` has shape ``(..., m)``; the jet has value shape ``(...)``.
        """
        point = np.asarray(point, dtype=float)
        m = point.shape[-1]
        S = point.shape[:-1]
        d1 = None
        if order >= 1:
            d1 = np.zeros((m,) + S)
            d1[index] = 1.0
        return cls(point[..., index], d1, None, None, m=m, order=order)

    @classmethod
    def constant(cls, value, m: int, order: int = 3):
        return cls(value, m=m, order=order)

    @property
    def d1(self):
        return self._block(1)

    @property
    def d2(self):
        return self._block(2)

    @property
    def d3(self):
        return self._block(3)

    def _block(self, k):
        if k > self.order:
            raise ValueError(f"jet of order {self.order} has no order-{k} block")
        b = self.d[k - 1]
        if b is None:
            b = np.zeros((self.m,) * k + self.v.shape)
        return b

    @property
    def shape(self):
        return self.v.shape

    @property
    def ndim(self):
        return self.v.ndim

    def __repr__(self):
        return f"Jet3(order={self.order}, m={self.m}, value={self.v!r})"

    # -- structural ops --------------------------------------------------
    def _map(self, fn):
        """Apply a value-axis structural function to every block."""
        out = Jet3.__new__(Jet3)
        out.order, out.m = self.order, self.m
        out.v = fn(self.v, 0)
        out.d = [None if b is None else fn(b, k) for k, b in enumerate(self.d, start=1)]
        return out

    def __getitem__(self, key):
        if not isinstance(key, tuple):
            key = (key,)
        return self._map(lambda a, k: a[(slice(None),) * k + key])

    def sum(self, axis):
        nd = self.ndim
        axis = axis % nd
        return self._map(lambda a, k: a.sum(axis=axis + k))

    def swapaxes(self, a1, a2):
        nd = self.ndim
        a1, a2 = a1 % nd, a2 % nd
        return self._map(lambda a, k: np.swapaxes(a, a1 + k, a2 + k))

    @property
    def T(self):
        return self.swapaxes(-1, -2)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], tuple):
            shape = shape[0]
        return self._map(lambda a, k: a.reshape(a.shape[:k] + tuple(shape)))

    def expand_dims(self, axis):
        nd = self.ndim + 1
        axis = axis % nd
        return self._map(lambda a, k: np.expand_dims(a, axis + k))

    def truncate(self, order: int):
        if order >= self.order:
            return self
        out = Jet3.__new__(Jet3)
        out.order, out.m, out.v = order, self.m, self.v
        out.d = self.d[:order]
        return out

    def partial(self, i: int):
        """Jet of the partial derivative along chart variable ``i``.

        The result has order ``self.order - 1``.
        """
        if self.order < 1:
            raise ValueError("cannot differentiate an order-0 jet")
        out = Jet3.__new__(Jet3)
        out.order, out.m = self.order - 1, self.m
        out.v = self._block(1)[i]
        out.d = [None if b is None else b[i] for b in self.d[1:]]
        return out

    def gradient(self):
        """First derivatives with the derivative axis leading."""
        return self._block(1)

    # -- arithmetic ----------------------------------------------------
    def _bilinear(self, other, op, result_shape):
        if not isinstance(other, Jet3):
            other = _as_const(other, self.m)
        return _leibniz(self, other, op, result_shape)

    def __add__(self, other):
        if isinstance(other, Jet3):
            order = min(self.order, other.order)
            m = self.m if self.m is not None else other.m
            v = self.v + other.v
            nval = v.ndim
            d = []
            for k in range(1, order + 1):
                a = _get(self, k)
                b = _get(other, k)
                if a is None and b is None:
                    d.append(None)
                elif a is None:
                    d.append(_broadcast_block(b, k, v.shape))
                elif b is None:
                    d.append(_broadcast_block(a, k, v.shape))
                else:
                    d.append(_place(a, k, range(k), k, nval) + _place(b, k, range(k), k, nval))
            out = Jet3.__new__(Jet3)
            out.order, out.m, out.v, out.d = order, m, v, d
            return out
        other = np.asarray(other, dtype=float)
        v = self.v + other
        out = Jet3.__new__(Jet3)
        out.order, out.m, out.v = self.order, self.m, v
        out.d = [None if b is None else _broadcast_block(b, k, v.shape)
                 for k, b in enumerate(self.d, start=1)]
        return out

    __radd__ = __add__

    def __neg__(self):
        return self._map(lambda a, k: -a)

    def __pos__(self):
        return self

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Jet3):
            c = np.asarray(other, dtype=float)
            v = self.v * c
            out = Jet3.__new__(Jet3)
            out.order, out.m, out.v = self.order, self.m, v
            out.d = [None if b is None else _place(b, k, range(k), k, v.ndim) * c
                     for k, b in enumerate(self.d, start=1)]
            return out
        return _leibniz(self, other, np.multiply)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet3):
            return self * other.reciprocal()
        return self * (1.0 / np.asarray(other, dtype=float))

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __matmul__(self, other):
        if not isinstance(other, Jet3):
            other = _as_const(other, self.m)
        return _leibniz(self, other, np.matmul)

    def __rmatmul__(self, other):
        return _leibniz(_as_const(other, self.m), self, np.matmul)

    def __pow__(self, exponent):
        from fractions import Fraction

        p = Fraction(exponent).limit_denominator(1000) if not isinstance(exponent, int) else exponent
        if isinstance(p, int) or p.denominator == 1:
            n = int(p)
            if n == 0:
                return _as_const(np.ones_like(self.v), self.m, self.order)
            if n > 0:
                result = self
                for _ in range(n - 1):
                    result = result * self
                return result
            return (self ** (-n)).reciprocal()
        # fractional powers: real and smooth only for positive bases
        x = self.v
        if np.any(x <= 0):
            raise JetDomainError("fractional power of a non-positive value")
        q = float(p)
        return self._compose(
            x ** q,
            q * x ** (q - 1),
            q * (q - 1) * x ** (q - 2),
            q * (q - 1) * (q - 2) * x ** (q - 3),
        )

    def reciprocal(self):
        x = self.v
        if np.any(x == 0):
            raise JetDomainError("division by zero")
        r = 1.0 / x
        return self._compose(r, -r * r, 2 * r ** 3, -6 * r ** 4)

    def _compose(self, g0, g1, g2, g3):
        """Chain rule for an elementwise function with derivatives g0..g3."""
        out = Jet3.__new__(Jet3)
        out.order, out.m, out.v = self.order, self.m, np.asarray(g0, dtype=float)
        d = []
        if self.order >= 1:
            a1 = self._block(1)
            d.append(g1 * a1)
        if self.order >= 2:
            a2 = self._block(2)
            d.append(_symmetrize(g2 * a1[:, None] * a1[None, :] + g1 * a2, 2))
        if self.order >= 3:
            a3 = self._block(3)
            cross = a2[:, :, None] * a1[None, None, :]
            cross = cross + np.moveaxis(cross, 2, 1) + np.moveaxis(cross, 2, 0)
            t = g3 * a1[:, None, None] * a1[None, :, None] * a1[None, None, :] + g2 * cross + g1 * a3
            d.append(_symmetrize(t, 3))
        out.d = d
        return out


def _get(jet, k):
    if k > jet.order:
        return None
    return jet.d[k - 1]


def _broadcast_block(b, k, shape):
    return np.broadcast_to(_place(b, k, range(k), k, len(shape)), b.shape[:k] + shape).copy()


def _as_const(x, m, order=_INF_ORDER):
    out = Jet3.__new__(Jet3)
    out.order, out.m, out.v, out.d = order, m, np.asarray(x, dtype=float), [None, None, None]
    return out


def _leibniz(a: Jet3, b: Jet3, op, result_shape=None):
    order = min(a.order, b.order)
    order = min(order, 3)
    m = a.m if a.m is not None else b.m
    v = op(a.v, b.v)
    nval = v.ndim
    d = []
    for q in range(1, order + 1):
        total = None
        for ka in range(q + 1):
            blk_a = a.v if ka == 0 else _get(a, ka)
            blk_b = b.v if ka == q else _get(b, q - ka)
            if blk_a is None or blk_b is None:
                continue
            for pos_a in itertools.combinations(range(q), ka):
                pos_b = tuple(p for p in range(q) if p not in pos_a)
                xa = _place(blk_a, ka, pos_a, q, nval)
                xb = _place(blk_b, q - ka, pos_b, q, nval)
                term = op(xa, xb)
                total = term if total is None else total + term
        if total is not None:
            full = (m,) * q + v.shape
            if total.shape != full:
                total = np.broadcast_to(total, full).copy()
            total = _symmetrize(total, q)
        d.append(total)
    out = Jet3.__new__(Jet3)
    out.order, out.m, out.v, out.d = order, m, v, d
    return out


# -- generic helpers (floats or jets) ------------------------------------

def is_jet(x) -> bool:
    return isinstance(x, Jet3)


def value(x):
    """Plain value of a jet, or the argument itself."""
    return x.v if isinstance(x, Jet3) else np.asarray(x, dtype=float)


def _check_positive(x, what):
    if np.any(value(x) <= 0):
        raise JetDomainError(f"{what} of a non-positive value")


def sqrt(x):
    _check_positive(x, "sqrt")
    if isinstance(x, Jet3):
        s = np.sqrt(x.v)
        return x._compose(s, 0.5 / s, -0.25 / s ** 3, 0.375 / s ** 5)
    return np.sqrt(x)


def exp(x):
    if isinstance(x, Jet3):
        e = np.exp(x.v)
        return x._compose(e, e, e, e)
    return np.exp(x)


def log(x):
    _check_positive(x, "log")
    if isinstance(x, Jet3):
        r = 1.0 / x.v
        return x._compose(np.log(x.v), r, -r * r, 2 * r ** 3)
    return np.log(x)


def sin(x):
    if isinstance(x, Jet3):
        s, c = np.sin(x.v), np.cos(x.v)
        return x._compose(s, c, -s, -c)
    return np.sin(x)


def cos(x):
    if isinstance(x, Jet3):
        s, c = np.sin(x.v), np.cos(x.v)
        return x._compose(c, -s, -c, s)
    return np.cos(x)


def matmul(a, b):
    if isinstance(a, Jet3) or isinstance(b, Jet3):
        if not isinstance(a, Jet3):
            return b.__rmatmul__(a)
        return a @ b
    return np.matmul(a, b)


def inner_sum(x, axis=-1):
    return x.sum(axis) if isinstance(x, Jet3) else np.sum(x, axis=axis)


def inv(A):
    """Matrix inverse over the last two value axes."""
    if not isinstance(A, Jet3):
        return np.linalg.inv(A)
    X0 = np.linalg.inv(A.v)
    m = A.m
    order = A.order
    d = []
    # differentiate A X = I and solve for the derivative blocks
    X1 = X2 = None
    if order >= 1:
        A1 = A._block(1)
        X1 = -X0 @ A1 @ X0
        d.append(X1)
    if order >= 2:
        A2 = A._block(2)
        rhs = A2 @ X0 + A1[:, None] @ X1[None, :] + A1[None, :] @ X1[:, None]
        X2 = _symmetrize(-X0 @ rhs, 2)
        d.append(X2)
    if order >= 3:
        A3 = A._block(3)
        rhs = A3 @ X0
        rhs = rhs + A2[:, :, None] @ X1[None, None, :]
        rhs = rhs + A2[:, None, :] @ X1[None, :, None]
        rhs = rhs + A2[None, :, :] @ X1[:, None, None]
        rhs = rhs + A1[:, None, None] @ X2[None, :, :]
        rhs = rhs + A1[None, :, None] @ X2[:, None, :]
        rhs = rhs + A1[None, None, :] @ X2[:, :, None]
        d.append(_symmetrize(-X0 @ rhs, 3))
    out = Jet3.__new__(Jet3)
    out.order, out.m, out.v, out.d = order, m, X0, d
    return out


def solve(A, b):
    """Solve ``A x = b`` with ``b`` of shape ``(..., n, k)``."""
    if not isinstance(A, Jet3) and not isinstance(b, Jet3):
        return np.linalg.solve(A, b)
    return matmul(inv(A), b)


def stack(items, axis=0):
    """Stack jets and/or arrays along a new value axis."""
    jets = [x for x in items if isinstance(x, Jet3)]
    if not jets:
        return np.stack([np.asarray(x, dtype=float) for x in items], axis=axis)
    m = jets[0].m
    order = min(j.order for j in jets)
    items = [x if isinstance(x, Jet3) else _as_const(x, m) for x in items]
    shape = np.broadcast_shapes(*(x.shape for x in items))
    nd = len(shape) + 1
    ax = axis % nd
    v = np.stack([np.broadcast_to(x.v, shape) for x in items], axis=ax)
    d = []
    for k in range(1, order + 1):
        blocks = []
        for x in items:
            b = _get(x, k)
            if b is None:
                b = np.zeros((m,) * k + shape)
            else:
                b = np.broadcast_to(_place(b, k, range(k), k, len(shape)), (m,) * k + shape)
            blocks.append(b)
        d.append(np.stack(blocks, axis=ax + k))
    out = Jet3.__new__(Jet3)
    out.order, out.m, out.v, out.d = order, m, v, d
    return out


def elementwise(fn_name, x):
    return {"sqrt": sqrt, "exp": exp, "log": log, "sin": sin, "cos": cos}[fn_name](x)


def math_value(fn_name):
    return {"sqrt": math.sqrt, "exp": math.exp, "log": math.log, "sin": math.sin, "cos": math.cos}[fn_name]


def expand_dims(x, axis):
    """``np.expand_dims`` for arrays or jets."""
    return x.expand_dims(axis) if isinstance(x, Jet3) else np.expand_dims(x, axis)
