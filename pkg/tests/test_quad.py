"""Quadrature and interpolation plumbing."""

import numpy as np
import pytest
from scipy.integrate import quad

from fuzzydirac._quad import (
    barycentric_interpolate,
    barycentric_matrix,
    barycentric_weights,
    cheb2_rule,
    cheb2_rule_ab,
    composite_gl,
    gauss_legendre,
    graded_edges,
    two_cut_rule,
)


def test_gauss_legendre_polynomial_exactness():
    rng = np.random.default_rng(7)
    for order in (4, 8, 12):
        x, w = gauss_legendre(order)
        coeffs = rng.normal(size=2 * order)  # degree 2*order - 1
        poly = np.polynomial.Polynomial(coeffs)
        exact = poly.integ()(1.0) - poly.integ()(-1.0)
        assert abs(np.dot(w, poly(x)) - exact) < 1e-12 * max(1.0, abs(exact))


def test_composite_gl_matches_adaptive_quad():
    edges = np.array([0.0, 0.3, 1.1, 2.0])
    x, w = composite_gl(edges, order=12)
    f = lambda t: np.exp(-t) * np.cos(3 * t)
    ref, _ = quad(f, 0.0, 2.0)
    assert abs(np.dot(w, f(x)) - ref) < 1e-12


def test_composite_gl_weights_sum_to_length():
    edges = np.linspace(-2.0, 5.0, 9)
    _, w = composite_gl(edges, order=6)
    assert abs(w.sum() - 7.0) < 1e-13


def test_graded_edges_structure():
    lo, hi, levels, ratio, interior = -1.0, 3.0, 10, 0.4, 4
    edges = graded_edges(lo, hi, levels, levels, ratio=ratio, interior=interior)
    assert edges[0] == lo and edges[-1] == hi
    assert np.all(np.diff(edges) > 0)
    cell = (hi - lo) / interior
    widths = np.diff(edges)
    # innermost cells stay uniform, refinement lives in the outermost cell only
    core = widths[levels:-levels]
    assert np.allclose(core[1:-1], cell)
    assert abs(widths[0] - cell * ratio ** levels) < 1e-12
    assert abs(widths[-1] - cell * ratio ** levels) < 1e-12
    # graded widths grow geometrically like 1/ratio toward the interior
    grow = widths[1:levels] / widths[:levels - 1]
    assert np.allclose(grow[1:], 1.0 / ratio)


def test_graded_edges_validation():
    with pytest.raises(ValueError):
        graded_edges(1.0, 1.0)
    with pytest.raises(ValueError):
        graded_edges(0.0, 1.0, interior=1)


def test_cheb2_rule_against_moments():
    # weight sqrt(1-x^2); even moments are pi/2 * Catalan(m) / 4^m, odd vanish
    from math import comb, pi

    n = 9
    x, w = cheb2_rule(n)
    assert len(x) == n and not np.any(np.isin(x, (-1.0, 1.0)))
    for k in range(0, 2 * n - 1):
        if k % 2:
            ref = 0.0
        else:
            m = k // 2
            ref = pi / 2 * comb(2 * m, m) / ((m + 1) * 4 ** m)
        assert abs(np.dot(w, x ** k) - ref) < 1e-13


def test_cheb2_rule_even_n_avoids_zero():
    x, _ = cheb2_rule(8)
    assert np.min(np.abs(x)) > 1e-3


def test_cheb2_rule_ab_shifted_weight():
    lo, hi, n = 2.0, 5.0, 12
    x, w = cheb2_rule_ab(lo, hi, n)
    assert np.all((x > lo) & (x < hi))
    f = lambda t: 1.0 / (1.0 + t * t)
    ref, _ = quad(lambda t: f(t) * np.sqrt((hi - t) * (t - lo)), lo, hi)
    assert abs(np.dot(w, f(x)) - ref) < 1e-10


def test_two_cut_rule_exact_for_abs_y_times_even_poly():
    b, a, n = 0.6, 1.7, 10
    y, w = two_cut_rule(b, a, n)
    assert len(y) == 2 * n
    assert np.all(np.diff(y) > 0)
    assert np.allclose(y, -y[::-1]) and np.allclose(w, w[::-1])
    # pull the sqrt edge factors into quad's algebraic weight for a sharp reference
    smooth = lambda t, k: t ** (k + 1) * np.sqrt((a + t) * (t + b))
    for k in (0, 2, 4, 6):
        ref, _ = quad(smooth, b, a, args=(k,), weight="alg", wvar=(0.5, 0.5))
        assert abs(np.dot(w, np.abs(y) * y ** k) - 2 * ref) < 1e-12
    # odd moments cancel by symmetry
    assert abs(np.dot(w, y ** 3)) < 1e-12


def test_two_cut_rule_spectral_on_smooth_even_integrands():
    b, a = 0.6, 1.7
    smooth = lambda t, k: t ** k * np.sqrt((a + t) * (t + b))
    for k in (0, 2):
        ref, _ = quad(smooth, b, a, args=(k,), weight="alg", wvar=(0.5, 0.5))
        errs = []
        for n in (10, 20, 40):
            y, w = two_cut_rule(b, a, n)
            errs.append(abs(np.dot(w, y ** k) - 2 * ref))
        assert errs[-1] < 1e-12 and errs[0] > errs[-1]


def test_barycentric_reproduces_polynomials():
    nodes = np.cos(np.linspace(0, np.pi, 14))[::-1]
    bw = barycentric_weights(nodes)
    poly = np.polynomial.Polynomial(np.arange(1.0, 15.0))  # degree 13
    xs = np.linspace(-1, 1, 301)
    got = barycentric_interpolate(xs, nodes, poly(nodes), bw)
    assert np.max(np.abs(got - poly(xs))) < 1e-9


def test_barycentric_exact_at_nodes():
    nodes = np.array([-1.0, -0.2, 0.5, 2.0])
    bw = barycentric_weights(nodes)
    vals = np.array([3.0, -1.0, 0.5, 7.0])
    got = barycentric_interpolate(nodes.copy(), nodes, vals, bw)
    assert np.array_equal(got, vals)


def test_barycentric_matrix_matches_interpolate():
    rng = np.random.default_rng(11)
    nodes = np.sort(rng.uniform(-1, 1, 9))
    bw = barycentric_weights(nodes)
    vals = rng.normal(size=9)
    xs = np.concatenate([rng.uniform(-1, 1, 40), nodes[:3]])
    mat = barycentric_matrix(xs, nodes, bw)
    assert np.allclose(mat @ vals, barycentric_interpolate(xs, nodes, vals, bw),
                       atol=1e-13)
    # rows at node hits are cardinal unit vectors
    assert np.allclose(mat[-3:], np.eye(9)[:3])


def test_barycentric_weights_reject_duplicates():
    with pytest.raises(ValueError):
        barycentric_weights(np.array([0.0, 1.0, 1.0]))


def test_barycentric_weights_large_node_count():
    # log-space evaluation keeps a few hundred nodes finite
    nodes = np.cos(np.linspace(0, np.pi, 400))[::-1]
    bw = barycentric_weights(nodes)
    assert np.all(np.isfinite(bw)) and np.max(np.abs(bw)) == 1.0
