import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from netform.quadrature import gauss_legendre_unit, triangle_rule


@pytest.mark.parametrize("n", [1, 3, 6])
def test_gauss_legendre_integrates_monomials(n):
    x, w = gauss_legendre_unit(n)
    for k in range(2 * n):
        assert np.isclose(w @ x ** k, 1.0 / (k + 1), rtol=0, atol=1e-14)


@pytest.mark.parametrize("n", [2, 4, 6])
def test_triangle_rule_weights_and_bary(n):
    bary, w = triangle_rule(n)
    assert bary.shape == (n * n, 3)
    assert np.isclose(w.sum(), 1.0, atol=1e-15)
    assert np.allclose(bary.sum(axis=1), 1.0, atol=1e-15)
    assert np.all(bary >= 0)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 6), st.integers(0, 6))
def test_triangle_rule_exact_on_reference_monomials(i, j):
    # int over {x,y>=0, x+y<=1} of x^i y^j = i! j! / (i+j+2)!
    from math import factorial
    n = 6
    if i + j > 2 * n - 2:
        return
    bary, w = triangle_rule(n)
    x, y = bary[:, 1], bary[:, 2]
    exact = factorial(i) * factorial(j) / factorial(i + j + 2)
    assert np.isclose(0.5 * w @ (x ** i * y ** j), exact, rtol=1e-13, atol=0)
