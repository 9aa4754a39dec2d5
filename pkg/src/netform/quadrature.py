"""Fixed quadrature rules on intervals and triangles."""
from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def gauss_legendre_unit(n):
    """Gauss-Legendre nodes and weights mapped to [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=None)
def triangle_rule(n):
    """Collapsed (Duffy) Gauss rule on the reference triangle.

    Returns barycentric coordinates of shape (n*n, 3) and weights summing
    to one, so that ``|T| * sum(w * f(points))`` approximates the integral
    over any triangle T. Exact for polynomials of degree ``2n - 2``.
    """
    u, wu = gauss_legendre_unit(n)
    v, wv = gauss_legendre_unit(n)
    uu, vv = np.meshgrid(u, v, indexing="ij")
    ww = np.outer(wu, wv) * (1.0 - uu) * 2.0
    l2 = uu.ravel()
    l3 = (vv * (1.0 - uu)).ravel()
    bary = np.column_stack([1.0 - l2 - l3, l2, l3])
    return bary, ww.ravel()
