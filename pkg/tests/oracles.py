"""Independent oracles used by the test suite.

Kept deliberately separate from the package: central finite differences
with nested stencils for higher orders, and a classical Christoffel-symbol
computation for Riemannian metrics.  Nothing here touches the jet engine.
"""

from __future__ import annotations

import numpy as np


# Default steps per total derivative order: larger steps keep the nested
# stencils away from roundoff (eps / h^k); Richardson recovers the accuracy.
_FD_STEPS = {0: 0.0, 1: 1e-5, 2: 0.02, 3: 0.04, 4: 0.06, 5: 0.08}


def _fd_nested(f, x, y, x_orders, y_orders, h):
    """Recursively nested 2-point central differences."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    for i, k in enumerate(x_orders):
        if k > 0:
            lo = list(x_orders)
            lo[i] -= 1
            xp = x.copy()
            xm = x.copy()
            xp[i] += h
            xm[i] -= h
            return (_fd_nested(f, xp, y, lo, y_orders, h) -
                    _fd_nested(f, xm, y, lo, y_orders, h)) / (2 * h)
    for j, k in enumerate(y_orders):
        if k > 0:
            lo = list(y_orders)
            lo[j] -= 1
            yp = y.copy()
            ym = y.copy()
            yp[j] += h
            ym[j] -= h
            return (_fd_nested(f, x, yp, x_orders, lo, h) -
                    _fd_nested(f, x, ym, x_orders, lo, h)) / (2 * h)
    return f(x, y)


def fd_partial(f, x, y, x_orders, y_orders, h=None):
    """Central finite difference of f(x, y) for the given derivative orders.

    First partials use the classic 2-point central difference with step
    1e-5; higher orders nest stencils with a per-order step and one
    Richardson extrapolation to suppress the h^2 truncation term.
    """
    total = sum(x_orders) + sum(y_orders)
    if total == 0:
        return f(np.asarray(x, float), np.asarray(y, float))
    if h is None:
        h = _FD_STEPS.get(total, 0.1)
    if total == 1:
        return _fd_nested(f, x, y, x_orders, y_orders, h)
    # two Richardson levels: h^2 -> h^6 truncation
    d1 = _fd_nested(f, x, y, x_orders, y_orders, h)
    d2 = _fd_nested(f, x, y, x_orders, y_orders, h / 2)
    d4 = _fd_nested(f, x, y, x_orders, y_orders, h / 4)
    r1 = (4.0 * d2 - d1) / 3.0
    r2 = (4.0 * d4 - d2) / 3.0
    return (16.0 * r2 - r1) / 15.0


def christoffel(a_func, x, h=1e-6):
    """Classical Christoffel symbols of the second kind for a metric field a(x).

    Gamma^i_jk = 1/2 a^il (d_j a_lk + d_k a_jl - d_l a_jk), derivatives by
    central finite differences of the matrix field.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    a = np.asarray(a_func(x), dtype=float)
    ainv = np.linalg.inv(a)
    da = np.zeros((n, n, n))  # da[k, i, j] = d_k a_ij
    for k in range(n):
        xp = x.copy()
        xm = x.copy()
        xp[k] += h
        xm[k] -= h
        da[k] = (np.asarray(a_func(xp)) - np.asarray(a_func(xm))) / (2 * h)
    gamma = np.zeros((n, n, n))
    for i in range(n):
        for j in range(n):
            for k in range(n):
                s = 0.0
                for l in range(n):
                    s += ainv[i, l] * (da[j, l, k] + da[k, j, l] - da[l, j, k])
                gamma[i, j, k] = 0.5 * s
    return gamma


def riemann_spray(a_func, x, y, h=1e-6):
    """Geodesic spray coefficients G^i = 1/2 Gamma^i_jk y^j y^k."""
    gamma = christoffel(a_func, x, h)
    return 0.5 * np.einsum("ijk,j,k->i", gamma, y, y)


def covariant_derivative_covector(d_func, a_func, x, h=1e-6):
    """Classical covariant derivative of a covector field: d_j X_i - Gamma^r_ij X_r."""
    x = np.asarray(x, dtype=float)
    n = x.size
    gamma = christoffel(a_func, x, h)
    d = np.asarray(d_func(x), dtype=float)
    dd = np.zeros((n, n))  # dd[i, j] = d_j d_i
    for j in range(n):
        xp = x.copy()
        xm = x.copy()
        xp[j] += h
        xm[j] -= h
        dd[:, j] = (np.asarray(d_func(xp)) - np.asarray(d_func(xm))) / (2 * h)
    return dd - np.einsum("rij,r->ij", gamma, d)
