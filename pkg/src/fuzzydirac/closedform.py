"""Closed-form massless equilibrium densities, moments, and the phase transition.

With all masses zero the fermionic log term has the Vandermonde form, so the
model reduces to a quartic one-matrix ensemble with repulsion B = beta + beta2:

  gaussian   rho = (8 g2 / (B pi)) sqrt(a^2 - x^2),            a^2 = B/(4 g2)
  one-cut    rho = (2/(B pi)) (8 g4 x^2 + 4 g4 a^2 + 24 g4 mu2 + 4 g2) sqrt(a^2-x^2)
  two-cut    rho = (16 g4 / (B pi)) |x| sqrt((a^2-x^2)(x^2-b^2))

with the one-cut edge solving 12 g4^2 a^8 + 12 B g4 a^4 + 4 B g2 a^2 - B^2 = 0
and the two-cut edges a^2, b^2 = -g2/(8 g4) +- sqrt(B/(8 g4)).  The phases
meet at g2 = -sqrt(8 g4 B), where the transition is second order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._quad import cheb2_rule_ab, two_cut_rule
from .core import (ONE_CUT, TWO_CUT, DensityGrid, EquilibriumSolution,
                   ModelParams, ParamError, PhaseMismatchError, Support,
                   energy_functional)

__all__ = [
    "phase_boundary_massless",
    "gaussian_massless",
    "one_cut_massless",
    "two_cut_massless",
    "solve_massless",
    "moments_massless",
    "moments_D_from_H",
    "TransitionReport",
    "transition_order_check",
]


def _require_massless(params: ModelParams) -> None:
    if not params.is_massless():
        raise ParamError("closed forms hold at zero mass only; use the integral "
                         "equation solver for m > 0")


def phase_boundary_massless(g4: float, beta_total: float) -> float:
    """Critical quadratic coupling g2 = -sqrt(8 g4 B) separating one and two cuts."""
    if g4 < 0 or beta_total <= 0:
        raise ParamError("phase boundary needs g4 >= 0 and beta_total > 0")
    return -math.sqrt(8.0 * g4 * beta_total)


def _one_cut_grid(a: float, prefactor, n_nodes: int) -> DensityGrid:
    """Grid for rho(x) = prefactor(x) * sqrt(a^2 - x^2) with an exact evaluator."""
    support = Support(ONE_CUT, a)
    x, w_rule = cheb2_rule_ab(-a, a, n_nodes)
    splus = np.sqrt(np.maximum((a - x) * (a + x), 0.0))
    values = prefactor(x) * splus
    weights = w_rule / splus

    def evaluator(xs):
        s = np.maximum((a - xs) * (a + xs), 0.0)
        return prefactor(xs) * np.sqrt(s)

    return DensityGrid(x, weights, values, support, evaluator)


def _two_cut_grid(b: float, a: float, prefactor, n_nodes: int) -> DensityGrid:
    """Grid for rho(x) = prefactor(x) * sqrt((a^2-x^2)(x^2-b^2)), exact evaluator."""
    support = Support(TWO_CUT, a, b)
    x, w_rule = two_cut_rule(b, a, n_nodes)
    splus = np.sqrt(np.maximum((a * a - x * x) * (x * x - b * b), 0.0))
    values = prefactor(x) * splus
    weights = w_rule / splus

    def evaluator(xs):
        s = np.maximum((a * a - xs * xs) * (xs * xs - b * b), 0.0)
        return prefactor(xs) * np.sqrt(s)

    return DensityGrid(x, weights, values, support, evaluator)


def _finish(params, grid, mu2, phase) -> EquilibriumSolution:
    residuals = {
        "normalization": grid.total_mass() - 1.0,
        "mu2_consistency": grid.moment(2) - mu2,
        "min_density": float(np.min(grid.values)),
    }
    energy = energy_functional(grid, params)
    return EquilibriumSolution(params=params, rho_H=grid, mu2=mu2, phase=phase,
                               residuals=residuals, energy=energy)


def gaussian_massless(params: ModelParams, n_nodes: int = 256) -> EquilibriumSolution:
    """Semicircle solution for g4 = 0, g2 > 0: a^2 = B/(4 g2), mu2 = a^2/4."""
    _require_massless(params)
    if params.g4 != 0.0:
        raise ParamError("gaussian_massless needs g4 = 0")
    B, g2 = params.beta_total, params.g2
    a = math.sqrt(B / (4.0 * g2))
    c = 8.0 * g2 / (B * math.pi)
    grid = _one_cut_grid(a, lambda xs: np.full_like(xs, c), n_nodes)
    return _finish(params, grid, a * a / 4.0, ONE_CUT)


def _one_cut_edge_candidates(g4: float, g2: float, B: float):
    """Positive real roots u = a^2 of 12 g4^2 u^4 + 12 B g4 u^2 + 4 B g2 u - B^2,
    Newton polished."""
    coeffs = [12.0 * g4 ** 2, 0.0, 12.0 * B * g4, 4.0 * B * g2, -B * B]
    roots = np.roots(coeffs)
    scale = max(abs(r) for r in roots)
    out = []
    for r in roots:
        if abs(r.imag) > 1e-9 * scale or r.real <= 0.0:
            continue
        u = float(r.real)
        for _ in range(4):
            p = ((12.0 * g4 ** 2 * u ** 2 + 12.0 * B * g4) * u + 4.0 * B * g2) * u - B * B
            dp = 48.0 * g4 ** 2 * u ** 3 + 24.0 * B * g4 * u + 4.0 * B * g2
            if dp != 0.0:
                u -= p / dp
        if u > 0.0:
            out.append(u)
    return out


def one_cut_massless(params: ModelParams, n_nodes: int = 256) -> EquilibriumSolution:
    """Connected-support quartic solution; admissible root selected by rho >= 0
    and mu2 >= 0, lowest energy on ties."""
    _require_massless(params)
    if params.g4 == 0.0:
        return gaussian_massless(params, n_nodes)
    g4, g2, B = params.g4, params.g2, params.beta_total
    candidates = []
    for u in _one_cut_edge_candidates(g4, g2, B):
        a = math.sqrt(u)
        denom = B - 6.0 * g4 * u * u
        if denom == 0.0:
            continue
        mu2 = (2.0 * g4 * u ** 3 + g2 * u * u) / denom
        c0 = 4.0 * g4 * u + 24.0 * g4 * mu2 + 4.0 * g2
        if mu2 < -1e-12 or c0 < -1e-9 * max(1.0, abs(g2)):
            continue
        pref = (lambda c0=c0, g4=g4, B=B: lambda xs:
                (2.0 / (B * math.pi)) * (8.0 * g4 * xs * xs + c0))()
        grid = _one_cut_grid(a, pref, n_nodes)
        if abs(grid.total_mass() - 1.0) > 1e-8:
            continue
        candidates.append(_finish(params, grid, mu2, ONE_CUT))
    if not candidates:
        raise PhaseMismatchError(
            f"no admissible one-cut solution at g4={g4}, g2={g2}, B={B}")
    return min(candidates, key=lambda sol: sol.energy)


def two_cut_massless(params: ModelParams, n_nodes: int = 256) -> EquilibriumSolution:
    """Symmetric split-support solution, valid for g2 <= -sqrt(8 g4 B).

    At equality the inner edge closes (b = 0) and the density degenerates to
    the connected-support form c x^2 sqrt(a^2 - x^2), which is returned on a
    one-cut grid; it coincides with the one-cut solution there.
    """
    _require_massless(params)
    g4, g2, B = params.g4, params.g2, params.beta_total
    if g4 <= 0.0:
        raise ParamError("two-cut phase needs g4 > 0")
    disc = B / (8.0 * g4)
    center = -g2 / (8.0 * g4)
    b2 = center - math.sqrt(disc)
    a2 = center + math.sqrt(disc)
    c = 16.0 * g4 / (B * math.pi)
    if b2 < -1e-12 * center:
        raise PhaseMismatchError(
            f"two-cut inner edge closed at g2={g2} (boundary "
            f"{phase_boundary_massless(g4, B)})")
    if b2 <= 1e-12 * center:
        grid = _one_cut_grid(math.sqrt(a2), lambda xs: c * xs * xs, n_nodes)
        return _finish(params, grid, center, ONE_CUT)
    a, b = math.sqrt(a2), math.sqrt(b2)
    grid = _two_cut_grid(b, a, lambda xs: c * np.abs(xs), n_nodes)
    return _finish(params, grid, center, TWO_CUT)


def solve_massless(params: ModelParams, n_nodes: int = 256) -> EquilibriumSolution:
    """Phase dispatch at zero mass: gaussian, one-cut, or two-cut by g2 against
    the boundary."""
    _require_massless(params)
    if params.g4 == 0.0:
        return gaussian_massless(params, n_nodes)
    if params.g2 > phase_boundary_massless(params.g4, params.beta_total):
        return one_cut_massless(params, n_nodes)
    return two_cut_massless(params, n_nodes)


def _catalan(k: int) -> int:
    return math.comb(2 * k, k) // (k + 1)


def moments_massless(params: ModelParams, n: int) -> np.ndarray:
    """Even moments mu_0, mu_2, ..., mu_{2n} of the massless density.

    One-cut: mu_{2k} = (a^2/B)(a^2/4)^k [2 g4 a^2 C_{k+1} + (4 g4 a^2 + 24 g4 mu2
    + 4 g2) C_k] with Catalan numbers C_k.  Two-cut: the three-term recursion
    mu_{2(k+2)} = -(1/4)((2k+5)/(2k+8))(g2/g4) mu_{2(k+1)}
                  - ((k+1)/(k+4))(g2^2/(64 g4^2) - B/(8 g4)) mu_{2k}.
    """
    _require_massless(params)
    g4, g2, B = params.g4, params.g2, params.beta_total
    out = np.empty(n + 1)
    if params.g4 == 0.0 or g2 > phase_boundary_massless(g4, B):
        sol = gaussian_massless(params, 8) if g4 == 0.0 else one_cut_massless(params, 8)
        a2 = sol.rho_H.support.a ** 2
        c0 = 4.0 * g4 * a2 + 24.0 * g4 * sol.mu2 + 4.0 * g2
        for k in range(n + 1):
            out[k] = (a2 / B) * (a2 / 4.0) ** k * (
                2.0 * g4 * a2 * _catalan(k + 1) + c0 * _catalan(k))
        return out
    out[0] = 1.0
    if n >= 1:
        out[1] = -g2 / (8.0 * g4)
    for k in range(n - 1):
        nxt = (-(0.25 * (2 * k + 5) / (2 * k + 8)) * (g2 / g4) * out[k + 1]
               - ((k + 1.0) / (k + 4.0)) * (g2 ** 2 / (64.0 * g4 ** 2)
                                            - B / (8.0 * g4)) * out[k])
        out[k + 2] = nxt
    return out


def moments_D_from_H(moments_h_even: np.ndarray, n: int) -> np.ndarray:
    """Even Dirac moments from even H moments via the difference-spectrum identity

        mu^D_{2k} = sum_j C(2k, j) (-1)^j mu_{2k-j} mu_j

    (odd H moments vanish, so only even j survive).  Needs H moments through
    order 2n; returns mu^D_0 ... mu^D_{2n}.
    """
    mh = np.asarray(moments_h_even, dtype=float)
    if len(mh) < n + 1:
        raise ParamError(f"need H moments through order {2 * n}")
    out = np.empty(n + 1)
    for k in range(n + 1):
        total = 0.0
        for j in range(0, k + 1):
            total += math.comb(2 * k, 2 * j) * mh[k - j] * mh[j]
        out[k] = total
    return out


def _mu2_one_cut(g4: float, g2: float, B: float) -> float:
    best = None
    for u in _one_cut_edge_candidates(g4, g2, B):
        denom = B - 6.0 * g4 * u * u
        if denom == 0.0:
            continue
        mu2 = (2.0 * g4 * u ** 3 + g2 * u * u) / denom
        c0 = 4.0 * g4 * u + 24.0 * g4 * mu2 + 4.0 * g2
        if mu2 >= -1e-12 and c0 >= -1e-7:
            best = mu2 if best is None else min(best, mu2)
    if best is None:
        raise PhaseMismatchError(f"no one-cut branch at g2={g2}")
    return best


@dataclass(frozen=True)
class TransitionReport:
    """Finite-difference profile of mu2(g2) on both sides of the critical point."""

    g2_critical: float
    mu2_critical: float
    slope_one_cut: float
    slope_two_cut: float
    second_deriv_one_cut: float
    second_deriv_two_cut: float
    second_deriv_jump_exact: float


def transition_order_check(g4: float, beta_total: float,
                           step: float = 1e-3) -> TransitionReport:
    """Probe the order of the transition: mu2 and its slope are continuous at
    g2 = -sqrt(8 g4 B) (slope -1/(8 g4) from both sides) while the second
    derivative jumps by 1/(64 sqrt(2 B g4^3)), entirely from the one-cut side.
    """
    B = beta_total
    gc = phase_boundary_massless(g4, B)
    h = step

    def f_one(k):
        return _mu2_one_cut(g4, gc + k * h, B)

    def f_two(k):
        return -(gc - k * h) / (8.0 * g4)

    mu2_c = math.sqrt(B / (8.0 * g4))
    slope_one = (-3.0 * f_one(0) + 4.0 * f_one(1) - f_one(2)) / (2.0 * h)
    slope_two = (3.0 * f_two(0) - 4.0 * f_two(1) + f_two(2)) / (2.0 * h)
    second_one = (2.0 * f_one(0) - 5.0 * f_one(1) + 4.0 * f_one(2)
                  - f_one(3)) / h ** 2
    second_two = (2.0 * f_two(0) - 5.0 * f_two(1) + 4.0 * f_two(2)
                  - f_two(3)) / h ** 2
    jump = 1.0 / (64.0 * math.sqrt(2.0 * B * g4 ** 3))
    return TransitionReport(
        g2_critical=gc, mu2_critical=mu2_c,
        slope_one_cut=slope_one, slope_two_cut=slope_two,
        second_deriv_one_cut=second_one, second_deriv_two_cut=second_two,
        second_deriv_jump_exact=jump)
