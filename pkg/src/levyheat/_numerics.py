"""Small numerical helpers: warning-strict quadrature and fixed Gauss rules."""

import warnings
from functools import lru_cache

import numpy as np
from scipy import integrate

from .errors import QuadratureError


def quad(f, a, b, *, epsabs=1e-13, epsrel=1e-10, limit=500, points=None, what="integral", **kw):
    """scipy.integrate.quad that raises QuadratureError instead of warning."""
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, _ = integrate.quad(f, a, b, epsabs=epsabs, epsrel=epsrel,
                                    limit=limit, points=points, **kw)
        except integrate.IntegrationWarning as exc:
            raise QuadratureError(f"{what}: quadrature did not converge ({exc})") from exc
    if not np.isfinite(val):
        raise QuadratureError(f"{what}: non-finite quadrature result {val}")
    return float(val)


@lru_cache(maxsize=None)
def gauss_legendre(n):
    return np.polynomial.legendre.leggauss(n)


def composite_gauss(edges, n=16):
    """Nodes and weights of an n-point Gauss-Legendre rule on each panel."""
    x, w = gauss_legendre(n)
    edges = np.asarray(edges, dtype=float)
    a, b = edges[:-1, None], edges[1:, None]
    half = 0.5 * (b - a)
    nodes = (half * x + 0.5 * (a + b)).ravel()
    weights = (half * w).ravel()
    return nodes, weights


def simpson(y, x):
    return float(integrate.simpson(y, x=x))
