"""Quadrature plumbing shared by the solvers and estimators.

Gauss-Chebyshev (second kind) rules absorb the square-root edge behaviour of
the densities exactly; graded composite Gauss-Legendre panels handle the
remaining integrable singularities.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

__all__ = [
    "cheb2_rule",
    "cheb2_rule_ab",
    "two_cut_rule",
    "gauss_legendre",
    "composite_gl",
    "graded_edges",
    "barycentric_weights",
    "barycentric_interpolate",
    "barycentric_matrix",
]


def cheb2_rule(n: int):
    """Nodes and weights integrating f(x) sqrt(1-x^2) on [-1, 1] exactly for
    polynomials f up to degree 2n-1.  No node sits at an endpoint, and for even
    n none sits at zero."""
    j = np.arange(n, 0, -1, dtype=float)
    theta = j * np.pi / (n + 1)
    x = np.cos(theta)
    w = (np.pi / (n + 1)) * np.sin(theta) ** 2
    return x, w


def cheb2_rule_ab(lo: float, hi: float, n: int):
    """The same rule mapped to [lo, hi], integrating f(x) sqrt((hi-x)(x-lo))."""
    x, w = cheb2_rule(n)
    mid = 0.5 * (hi + lo)
    half = 0.5 * (hi - lo)
    return mid + half * x, half * half * w


def two_cut_rule(b: float, a: float, n: int):
    """Rule on [-a, -b] u [b, a] integrating g(y) sqrt((a^2-y^2)(y^2-b^2)).

    The substitution u = y^2 maps the weight to a Chebyshev one on [b^2, a^2],
    so integrands g(y) = |y| q(y^2) with q polynomial of degree up to 2n-1 are
    exact; other smooth even g converge geometrically since 1/sqrt(u) is
    analytic on [b^2, a^2] for b > 0.  Returns the mirrored 2n-node rule
    ordered left to right.
    """
    u, wu = cheb2_rule_ab(b * b, a * a, n)
    y = np.sqrt(u)
    w = wu / (2.0 * y)
    nodes = np.concatenate([-y[::-1], y])
    weights = np.concatenate([w[::-1], w])
    return nodes, weights


@lru_cache(maxsize=64)
def gauss_legendre(order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    return x, w


def composite_gl(edges, order: int = 12):
    """Composite Gauss-Legendre nodes/weights over consecutive [edges] panels."""
    edges = np.asarray(edges, dtype=float)
    xi, wi = gauss_legendre(order)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    x = (mid[:, None] + half[:, None] * xi[None, :]).ravel()
    w = (half[:, None] * wi[None, :]).ravel()
    return x, w


def graded_edges(lo: float, hi: float, levels_lo: int = 12, levels_hi: int = 12,
                 ratio: float = 0.4, interior: int = 2):
    """Panel edges on [lo, hi]: `interior` uniform cells, the outermost cell on
    each side geometrically subdivided toward its endpoint.

    levels_* controls how deep the subdivision goes (widths shrink like
    ratio^k), so integrands with endpoint singularities converge with the
    Gauss order while the interior keeps uniform resolution (hi-lo)/interior.
    """
    if hi <= lo:
        raise ValueError("graded_edges needs lo < hi")
    if interior < 2:
        raise ValueError("graded_edges needs at least 2 interior cells")
    core = np.linspace(lo, hi, interior + 1)
    cell = core[1] - core[0]
    left = [lo + cell * ratio ** k for k in range(levels_lo, 0, -1)]
    right = [hi - cell * ratio ** k for k in range(1, levels_hi + 1)]
    edges = np.concatenate(([lo], left, core[1:-1], right, [hi]))
    return np.unique(edges)


def barycentric_weights(nodes: np.ndarray) -> np.ndarray:
    """Barycentric interpolation weights for distinct sorted nodes.

    Computed in log space: raw products prod(x_j - x_k) underflow for a few
    hundred nodes, and the formula is invariant under a common scale anyway.
    """
    nodes = np.asarray(nodes, dtype=float)
    n = len(nodes)
    if n == 1:
        return np.ones(1)
    diff = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(diff, 1.0)
    if np.any(diff == 0.0):
        raise ValueError("barycentric_weights needs distinct nodes")
    logw = -np.sum(np.log(np.abs(diff)), axis=1)
    signs = np.where((n - 1 - np.arange(n)) % 2 == 0, 1.0, -1.0)
    return signs * np.exp(logw - np.max(logw))


def barycentric_interpolate(x, nodes, values, weights):
    """Evaluate the polynomial through (nodes, values) at x, chunked for memory."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty_like(x)
    for start in range(0, len(x), 512):
        sl = slice(start, start + 512)
        diff = x[sl, None] - nodes[None, :]
        hit = np.isclose(diff, 0.0, rtol=0.0, atol=1e-300)
        diff = np.where(hit, 1.0, diff)
        ratio = weights[None, :] / diff
        num = ratio @ values
        den = ratio.sum(axis=1)
        vals = num / den
        rows, cols = np.nonzero(hit)
        vals[rows] = values[cols]
        out[sl] = vals
    return out


def barycentric_matrix(x, nodes, weights):
    """Matrix B with B @ values == barycentric_interpolate(x, nodes, values).

    Rows are the cardinal (Lagrange) functions of the nodes evaluated at x,
    which lets an integral operator act on interpolants of nodal data as a
    plain matrix product.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    diff = x[:, None] - nodes[None, :]
    hit = np.isclose(diff, 0.0, rtol=0.0, atol=1e-300)
    diff = np.where(hit, 1.0, diff)
    ratio = weights[None, :] / diff
    out = ratio / ratio.sum(axis=1)[:, None]
    rows = np.nonzero(hit.any(axis=1))[0]
    if len(rows):
        out[rows] = np.where(hit[rows], 1.0, 0.0)
    return out
