"""Shared numeric helpers for the test suite."""

import numpy as np
import pytest
from scipy import integrate

from fuzzydirac import ModelParams


def quad_density(grid, func=None):
    """Adaptive quadrature of func(x) * rho(x) over the support, cut by cut.

    Independent of the grid's own weights, so it can audit them.
    """
    f = func if func is not None else (lambda x: 1.0)

    def fx(x):
        rho = np.asarray(grid.density(x), dtype=float).item()
        return rho * np.asarray(f(x), dtype=float).item()

    total = 0.0
    for lo, hi in grid.support.intervals():
        val, _ = integrate.quad(fx, lo, hi, limit=400)
        total += val
    return total


def l1_between(sol_a, sol_b, n_panels=200):
    """L1 distance between two solution densities over the union of supports."""
    from fuzzydirac import l1_distance

    edges = set()
    for s in (sol_a, sol_b):
        for lo, hi in s.rho_H.support.intervals():
            edges.update((lo, hi))
    hi = max(abs(e) for e in edges)
    return l1_distance(lambda x: sol_a.rho_H.density(x),
                       lambda x: sol_b.rho_H.density(x),
                       -hi, hi, breakpoints=tuple(sorted(edges)), n_panels=n_panels)


@pytest.fixture
def one_cut_params():
    return ModelParams(g4=1.0, g2=1.0, beta=2.0, beta2=2.0, masses=(0.0,))


@pytest.fixture
def two_cut_params():
    return ModelParams(g4=1.0, g2=-8.0, beta=2.0, beta2=2.0, masses=(0.0,))
