"""Quadrature building blocks shared by the numerical modules."""

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=64)
def _gl(n):
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre(n, a=-1.0, b=1.0):
    """Gauss-Legendre nodes and weights on [a, b]."""
    x, w = _gl(int(n))
    h = 0.5 * (b - a)
    return a + h * (x + 1.0), h * w


def composite_nodes(breaks, order=16):
    """Nodes and weights of a composite Gauss-Legendre rule over consecutive panels."""
    breaks = np.asarray(breaks, dtype=float)
    x, w = _gl(order)
    a = breaks[:-1, None]
    h = 0.5 * np.diff(breaks)[:, None]
    return (a + h * (x + 1.0)).ravel(), (h * w).ravel()


def graded_breaks(a, b, width, grade_left=0, grade_right=0, ratio=0.25):
    """Panel breakpoints on [a, b] with panels no wider than ``width``.

    ``grade_left``/``grade_right`` add geometrically shrinking panels toward
    the corresponding end, which helps with weak endpoint singularities.
    """
    length = b - a
    if length <= 0:
        return np.array([a, b])
    n = max(1, int(np.ceil(length / width - 1e-12)))
    inner = np.linspace(a, b, n + 1)
    pts = list(inner)
    first = inner[1] - inner[0]
    for j in range(1, grade_left + 1):
        pts.append(a + first * ratio**j)
    for j in range(1, grade_right + 1):
        pts.append(b - first * ratio**j)
    return np.unique(np.array(pts))


_CHUNK = 1 << 22


def barycentric_weights_cheb1(n):
    """Barycentric weights for Chebyshev points of the first kind."""
    j = np.arange(n)
    return (-1.0) ** j * np.sin((2 * j + 1) * np.pi / (2 * n))


def chebyshev_points(n, a, b):
    """Chebyshev points of the first kind on (a, b), in increasing order."""
    j = np.arange(n)
    t = -np.cos((2 * j + 1) * np.pi / (2 * n))
    return 0.5 * (a + b) + 0.5 * (b - a) * t


def barycentric_eval(nodes, weights, values, x):
    """Evaluate the barycentric interpolant through (nodes, values) at x."""
    x = np.asarray(x, dtype=float)
    flat = x.ravel()
    out = np.empty(flat.shape, dtype=np.result_type(values, float))
    # chunked so the (points, nodes) matrix stays small
    step = max(1, _CHUNK // max(1, nodes.size))
    for lo in range(0, flat.size, step):
        diff = flat[lo : lo + step, None] - nodes[None, :]
        exact = diff == 0.0
        diff[exact] = 1.0
        q = weights[None, :] / diff
        part = (q @ values) / q.sum(axis=1)
        hit_rows, hit_cols = np.nonzero(exact)
        if hit_rows.size:
            part[hit_rows] = values[hit_cols]
        out[lo : lo + step] = part
    return out.reshape(x.shape)
