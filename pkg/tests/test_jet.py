import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from halflight import jet as J


def _sym(block):
    """Sum over all index permutations (integer input stays integer)."""
    return sum(np.transpose(block, p) for p in itertools.permutations(range(block.ndim)))


def random_int_jet(rng, m=2, order=3):
    v = float(rng.integers(-5, 6))
    d1 = rng.integers(-5, 6, size=m).astype(float)
    d2 = _sym(rng.integers(-3, 4, size=(m, m)).astype(float))
    d3 = _sym(rng.integers(-2, 3, size=(m, m, m)).astype(float))
    return J.Jet3(v, d1, d2, d3, m=m, order=order)


def _assert_jet_equal(a, b):
    for x, y in zip((a.v, a.d1, a.d2, a.d3), (b.v, b.d1, b.d2, b.d3)):
        np.testing.assert_array_equal(x, y)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_distributive_law_exact(seed):
    rng = np.random.default_rng(seed)
    a, b, c = (random_int_jet(rng) for _ in range(3))
    _assert_jet_equal((a + b) * c, a * c + b * c)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_commutative_and_associative_product_exact(seed):
    rng = np.random.default_rng(seed)
    a, b, c = (random_int_jet(rng) for _ in range(3))
    _assert_jet_equal(a * b, b * a)
    _assert_jet_equal((a * b) * c, a * (b * c))


def test_blocks_are_symmetric():
    rng = np.random.default_rng(1)
    a, b = random_int_jet(rng, m=3), random_int_jet(rng, m=3)
    p = J.sin(a * b) / (J.exp(b) + 2.0)
    np.testing.assert_allclose(p.d2, p.d2.T, atol=1e-14)
    for perm in [(1, 0, 2), (0, 2, 1), (2, 1, 0)]:
        np.testing.assert_allclose(p.d3, np.transpose(p.d3, perm), atol=1e-13)


def test_variable_and_constant():
    x = J.Jet3.variable(np.array([2.0, 1.0]), 0, order=3)
    assert x.v == 2.0
    np.testing.assert_array_equal(x.d1, [1.0, 0.0])
    np.testing.assert_array_equal(x.d2, np.zeros((2, 2)))
    c = J.Jet3.constant(5.0, 2, 3)
    np.testing.assert_array_equal(c.d3, np.zeros((2, 2, 2)))


def _f_numeric(x, y):
    return math.sin(x * y) * math.exp(x) / (1 + y * y) + math.sqrt(x + 2 * y)


def _f_jet(x, y):
    return J.sin(x * y) * J.exp(x) / (1.0 + y * y) + J.sqrt(x + 2.0 * y)


def test_leibniz_against_finite_differences():
    p = np.array([0.7, 0.4])
    x, y = (J.Jet3.variable(p, i, 3) for i in range(2))
    f = _f_jet(x, y)
    h = 1e-4
    e = np.eye(2)
    g = lambda q: _f_numeric(*q)
    grad = [(g(p + h * e[i]) - g(p - h * e[i])) / (2 * h) for i in range(2)]
    np.testing.assert_allclose(f.d1, grad, rtol=1e-7)
    h2 = 1e-3
    hess = np.array([[(g(p + h2 * (e[i] + e[j])) - g(p + h2 * (e[i] - e[j]))
                       - g(p - h2 * (e[i] - e[j])) + g(p - h2 * (e[i] + e[j]))) / (4 * h2 * h2)
                      for j in range(2)] for i in range(2)])
    np.testing.assert_allclose(f.d2, hess, rtol=1e-5)
    # third derivative d^3/dx^3 from the Hessian's x-derivative
    def dxx(q):
        xx, yy = (J.Jet3.variable(q, i, 2) for i in range(2))
        return _f_jet(xx, yy).d2[0, 0]
    third = (dxx(p + h * e[0]) - dxx(p - h * e[0])) / (2 * h)
    np.testing.assert_allclose(f.d3[0, 0, 0], third, rtol=1e-6)


def test_batched_evaluation_matches_pointwise():
    P = np.array([[0.7, 0.4], [1.1, -0.2], [0.3, 0.9]])
    x, y = (J.Jet3.variable(P, i, 3) for i in range(2))
    fb = _f_jet(x, y)
    for k, p in enumerate(P):
        xs, ys = (J.Jet3.variable(p, i, 3) for i in range(2))
        f = _f_jet(xs, ys)
        np.testing.assert_allclose(fb.v[k], f.v)
        np.testing.assert_allclose(fb.d3[..., k], f.d3)


def test_domain_errors():
    x = J.Jet3.variable(np.array([0.0]), 0, 2)
    with pytest.raises(J.JetDomainError):
        J.sqrt(x)
    with pytest.raises(J.JetDomainError):
        J.log(x - 1.0)


def test_inverse_and_solve():
    rng = np.random.default_rng(3)
    p = np.array([0.2, -0.3])
    x, y = (J.Jet3.variable(p, i, 2) for i in range(2))
    A = J.stack([J.stack([2.0 + x, y * x], -1), J.stack([J.sin(y), 3.0 + x * x], -1)], -2)
    Ai = J.inv(A)
    I = J.matmul(A, Ai)
    np.testing.assert_allclose(I.v, np.eye(2), atol=1e-14)
    np.testing.assert_allclose(I.d1, 0, atol=1e-13)
    np.testing.assert_allclose(I.d2, 0, atol=1e-12)
    b = rng.normal(size=(2, 1))
    s = J.solve(A, b)
    np.testing.assert_allclose(J.matmul(A, s).v, b, atol=1e-13)
