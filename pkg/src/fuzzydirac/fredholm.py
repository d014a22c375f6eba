"""Nystrom solver for the massive saddle-point equation.

At fermion mass m > 0 the equilibrium density rho = phi * sqrt_s_plus solves a
well-posed second-kind Fredholm equation on the (unknown) support,

    phi(x) = p(x) + integral Ktilde_m(x, y) phi(y) dy,

with one bounded kernel per positive mass, while the support edges and the
second moment are fixed by an outer nonlinear system built from the moment
kernels R^n.  Gauss-Chebyshev quadrature in x (one cut) or x^2 (two cuts)
absorbs the edge weight, so the Nystrom error decays geometrically in the node
count with rate controlled by the Bernstein ellipse through +-(edge + i m).

Zero entries of the mass list fold into the Vandermonde repulsion
(beta -> beta + beta2 per zero mass); only positive masses contribute kernels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from ._quad import (barycentric_matrix, barycentric_weights, cheb2_rule_ab,
                    composite_gl, graded_edges, two_cut_rule)
from .closedform import solve_massless
from .core import (ONE_CUT, TWO_CUT, DensityGrid, EquilibriumSolution,
                   ModelParams, ParamError, PhaseMismatchError, SolverError,
                   Support, energy_functional, kernel_R, sqrt_s, sqrt_s_plus)

__all__ = [
    "NystromConfig",
    "nystrom_phi",
    "solve_one_cut",
    "solve_two_cut",
    "solve_equilibrium",
]


@dataclass(frozen=True)
class NystromConfig:
    """Discretization and convergence knobs for the integral-equation solver."""

    n_nodes: int = 128
    outer_tol: float = 1e-10
    inner_tol: float = 1e-12
    max_outer_iters: int = 60

    def __post_init__(self):
        if self.n_nodes < 32:
            raise ParamError(f"n_nodes must be >= 32 per cut, got {self.n_nodes}")
        if not (self.outer_tol > 0 and self.inner_tol > 0):
            raise ParamError("tolerances must be positive")
        if self.max_outer_iters < 1:
            raise ParamError("max_outer_iters must be >= 1")


def _effective_beta(params: ModelParams) -> float:
    """Repulsion after folding zero masses: beta + beta2 * (#zero masses)."""
    return params.beta + params.beta2 * sum(1 for m in params.masses if m == 0.0)


def _positive_masses(params: ModelParams):
    return [m for m in params.masses if m > 0.0]


def _support_rule(support: Support, n: int):
    """Nodes and weights integrating f(y) * sqrt_s_plus(y) over the support."""
    if support.kind == ONE_CUT:
        return cheb2_rule_ab(-support.a, support.a, n)
    return two_cut_rule(support.b, support.a, n)


def _poly_abs(coeffs, x):
    """p(x) = sum_k coeffs[k] |x|^k."""
    ax = np.abs(np.asarray(x, dtype=float))
    out = np.zeros_like(ax)
    for c in reversed(coeffs):
        out = out * ax + c
    return out


class _PhiSystem:
    """Assembled Nystrom discretization of the phi equation on a fixed support.

    The kernel carries a Lorentzian of width m around y = x whose weight tends
    to -beta2/beta as m -> 0; once m drops below the node spacing no global
    rule can integrate it against phi.  The assembly therefore uses product
    integration: entry (i, j) is int Ktilde(x_i, y) L_j(y) dy with L_j the
    cardinal interpolation functions of the nodes, evaluated on per-mass panel
    grids that resolve the Lorentzian.  The discrete operator thus applies
    Ktilde essentially exactly to the interpolant of the nodal data, and its
    accuracy is set by how well the nodes resolve phi itself, uniformly in m.
    """

    def __init__(self, support: Support, params: ModelParams, n_nodes: int):
        self.support = support
        self.params = params
        y, w = _support_rule(support, n_nodes)
        self.y = y
        self.w = w
        self.beta_eff = _effective_beta(params)
        self.coef = params.beta2 / (math.pi * self.beta_eff)
        self.masses = _positive_masses(params)
        self._pieces = self._interp_pieces()
        self._panel_grids = self._build_panel_grids()
        self.matrix = self._assemble()

    def _interp_pieces(self):
        """Per-cut interpolation data: (column indices, nodes, weights, in_u).

        Two-cut nodes are interpolated in u = y^2, where each cut's nodes are
        genuine Chebyshev points with O(1) barycentric weight range; viewed in
        y the weights span many decades and the formula cancels catastrophically.
        """
        y = self.y
        if self.support.kind == TWO_CUT:
            half = len(y) // 2
            pieces = []
            for sl in (slice(0, half), slice(half, None)):
                idx = np.arange(len(y))[sl]
                u = y[sl] ** 2
                order = np.argsort(u)
                nodes = u[order]
                pieces.append((idx[order], nodes, barycentric_weights(nodes), True))
            return pieces
        return [(np.arange(len(y)), y, barycentric_weights(y), False)]

    def _basis(self, xq: np.ndarray) -> np.ndarray:
        """Interpolation matrix taking nodal phi values to values at xq."""
        out = np.zeros((len(xq), len(self.y)))
        if self.support.kind == TWO_CUT:
            masks = (xq < 0.0, xq >= 0.0)
        else:
            masks = (np.ones(len(xq), dtype=bool),)
        for mask, (idx, nodes, bw, in_u) in zip(masks, self._pieces):
            if np.any(mask):
                q = xq[mask] ** 2 if in_u else xq[mask]
                out[np.ix_(mask, idx)] = barycentric_matrix(q, nodes, bw)
        return out

    def _build_panel_grids(self):
        """Per-mass panel rules resolving the width-m Lorentzian structure.

        Kernel values are O(1/m) only within distance ~m of y = x, and the
        edge weight sqrt_s_plus has square-root behaviour, so panels graded at
        the edges with core spacing ~ m/2 integrate every row accurately.
        """
        out = []
        for m in self.masses:
            grids = []
            for lo, hi in self.support.intervals():
                interior = int(min(12000, max(6, math.ceil((hi - lo) / (0.5 * m)))))
                edges = graded_edges(lo, hi, 12, 12, ratio=0.4, interior=interior)
                yp, wp = composite_gl(edges, 8)
                wgt = sqrt_s_plus(yp, self.support)
                inv = 1.0 / sqrt_s(yp + 1j * m, self.support)
                grids.append((yp, wp, wgt, inv))
            out.append((m, grids))
        return out

    def _row_sign(self, xs: np.ndarray):
        """sgn(x) factor of Ktilde on a two-cut support, 1 on one cut."""
        if self.support.kind == TWO_CUT:
            return np.sign(xs)
        return np.ones_like(xs)

    def _assemble(self) -> np.ndarray:
        """Product-integration matrix, panel-chunked to bound memory."""
        n = len(self.y)
        mat = np.zeros((n, n))
        for m, grids in self._panel_grids:
            for yp, wp, wgt, inv in grids:
                kw = wp * wgt
                for start in range(0, len(yp), 4096):
                    sl = slice(start, start + 4096)
                    pole = yp[sl][None, :] - self.y[:, None] + 1j * m
                    rows = np.real(inv[sl][None, :] / pole) * kw[sl][None, :]
                    mat += rows @ self._basis(yp[sl])
        return self.coef * self._row_sign(self.y)[:, None] * mat

    def apply_ktilde(self, xs: np.ndarray, func) -> np.ndarray:
        """(Ktilde f)(x) = int Ktilde(x, y) f(y) dy via the panel grids.

        The panels resolve the width-m Lorentzian, so this application is
        accurate for any smooth f independent of the collocation spacing; func
        is evaluated at the panel points.
        """
        out = np.zeros_like(xs)
        for m, grids in self._panel_grids:
            for yp, wp, wgt, inv in grids:
                fw = wp * wgt * func(yp)
                for lo_r in range(0, len(xs), 128):
                    sl = slice(lo_r, lo_r + 128)
                    pole = yp[None, :] - xs[sl, None] + 1j * m
                    out[sl] += np.real(inv[None, :] / pole) @ fw
        return self.coef * self._row_sign(xs) * out

    def solve(self, poly_coeffs, inner_tol: float):
        """Solve phi = p + Ktilde phi on the nodes by LU with refinement."""
        p = _poly_abs(poly_coeffs, self.y)
        if not self.masses:
            return p, 0.0
        lhs = np.eye(len(self.y)) - self.matrix
        lu, piv = lu_factor(lhs)
        phi = lu_solve((lu, piv), p)
        resid = float(np.max(np.abs(lhs @ phi - p)))
        for _ in range(3):
            if resid <= inner_tol:
                break
            phi = phi + lu_solve((lu, piv), p - lhs @ phi)
            resid = float(np.max(np.abs(lhs @ phi - p)))
        return phi, resid

    def phi_evaluator(self, poly_coeffs, phi):
        """Barycentric interpolant of the node values, one polynomial per cut.

        The kernel-row form of the Nystrom interpolant is poisoned at small m:
        for x an off-node distance ~m from a node the Lorentzian shoulder is
        sampled near its 1/m peak, so both the row and its normalization are
        garbage there.  The node values themselves are accurate and phi is
        analytic up to edge layers the clustered nodes resolve, so polynomial
        interpolation is the stable route.  p(x) is unused but kept for
        signature stability across solver internals.
        """
        del poly_coeffs

        def evaluate(xs):
            xs = np.atleast_1d(np.asarray(xs, dtype=float))
            out = np.empty_like(xs)
            for start in range(0, len(xs), 4096):
                sl = slice(start, start + 4096)
                out[sl] = self._basis(xs[sl]) @ phi
            return out

        return evaluate

    def moment_kernel_integrals(self, phi):
        """integral R^n_m(y) rho(y) dy for n = 0, 1, 2 and each positive mass."""
        wphi = self.w * phi
        out = []
        for m in self.masses:
            r = [float(np.sum(wphi * kernel_R(n, self.y, self.support, m)))
                 for n in (0, 1, 2)]
            out.append(r)
        return out


def nystrom_phi(support: Support, poly_p, params: ModelParams,
                cfg: NystromConfig = None) -> DensityGrid:
    """Solve the phi equation on a fixed support for a given polynomial p.

    poly_p lists coefficients of p as a polynomial in |x|.  The returned grid
    carries phi as `values`, the sqrt_s_plus-weighted rule as `weights`
    (so sum(weights*values*f) ~ integral f phi sqrt_s_plus), and the natural
    Nystrom interpolant as evaluator.  With beta2 = 0 or no positive masses
    the kernel vanishes and phi = p exactly.
    """
    cfg = cfg or NystromConfig()
    sys_ = _PhiSystem(support, params, cfg.n_nodes)
    phi, resid = sys_.solve(poly_p, cfg.inner_tol)
    grid = DensityGrid(sys_.y, sys_.w, phi, support,
                       evaluator=sys_.phi_evaluator(poly_p, phi))
    grid.linear_residual = resid
    return grid


def _rho_grid(sys_: _PhiSystem, poly_coeffs, phi) -> DensityGrid:
    splus = sqrt_s_plus(sys_.y, sys_.support)
    phi_eval = sys_.phi_evaluator(poly_coeffs, phi)
    support = sys_.support

    def evaluate(xs):
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        return phi_eval(xs) * sqrt_s_plus(xs, support)

    return DensityGrid(sys_.y, sys_.w / splus, phi * splus, support,
                       evaluator=evaluate)


def _newton(residual, t0, tol, max_iters, lower):
    """Damped Newton with forward-difference Jacobian on box-constrained unknowns."""
    t = np.array(t0, dtype=float)
    f = residual(t)
    norm = np.max(np.abs(f))
    for _ in range(max_iters):
        if norm < tol:
            return t
        n = len(t)
        jac = np.empty((n, n))
        for i in range(n):
            h = 1e-6 * max(1.0, abs(t[i]))
            tp = t.copy()
            tp[i] += h
            jac[:, i] = (residual(tp) - f) / h
        try:
            step = np.linalg.solve(jac, -f)
        except np.linalg.LinAlgError as exc:
            raise SolverError(f"singular Jacobian at t={t}") from exc
        scale = 1.0
        for _ in range(12):
            cand = t + scale * step
            if np.all(cand > lower):
                fc = residual(cand)
                nc = np.max(np.abs(fc))
                if nc < norm or nc < tol:
                    t, f, norm = cand, fc, nc
                    break
            scale *= 0.5
        else:
            raise SolverError(f"line search stalled at t={t}, |F|={norm:.3e}")
    raise SolverError(f"no convergence in {max_iters} iterations, |F|={norm:.3e}")


def _finish_massive(params, sys_, poly_coeffs, phi, resid_lin, mu2, phase,
                    extra_residuals) -> EquilibriumSolution:
    grid = _rho_grid(sys_, poly_coeffs, phi)
    min_density = float(np.min(grid.values))
    if min_density < -1e-7:
        raise PhaseMismatchError(
            f"{phase} density goes negative ({min_density:.3e}); other phase applies")
    residuals = {
        "normalization": grid.total_mass() - 1.0,
        "mu2_consistency": grid.moment(2) - mu2,
        "min_density": min_density,
        "linear_residual": resid_lin,
        **extra_residuals,
    }
    energy = energy_functional(grid, params, norm_tol=1e-5)
    return EquilibriumSolution(params=params, rho_H=grid, mu2=mu2, phase=phase,
                               residuals=residuals, energy=energy)


def _one_cut_poly(a, mu2, params):
    g4, g2p = params.g4, params.g2_eff
    beta_eff = _effective_beta(params)
    c0 = 4.0 * g4 * a * a + 24.0 * g4 * mu2 + 4.0 * g2p
    pref = 2.0 / (math.pi * beta_eff)
    return (pref * c0, 0.0, pref * 8.0 * g4)


def solve_one_cut(params: ModelParams, cfg: NystromConfig = None,
                  initial=None) -> EquilibriumSolution:
    """Connected-support solve: unknowns (a, mu2), edge condition from R^1.

    The outer system is
        beta + beta2 sum_k (1 - int R^1_k rho) = 6 g4 a^4 + (24 g4 mu2 + 4 g2') a^2
        mu2 = int x^2 rho
    which reduces to the massless edge equation as every m -> 0.
    """
    cfg = cfg or NystromConfig()
    g4, g2p = params.g4, params.g2_eff
    n_masses = len(params.masses)
    state = {}

    def residual(t):
        a, mu2 = t
        support = Support(ONE_CUT, a)
        sys_ = _PhiSystem(support, params, cfg.n_nodes)
        poly = _one_cut_poly(a, mu2, params)
        phi, rlin = sys_.solve(poly, cfg.inner_tol)
        # project onto probability densities; the defect is quadrature error
        mass = float(np.sum(sys_.w * phi))
        if not np.isfinite(mass) or mass <= 0.0:
            return np.array([1e6, 1e6])
        phi = phi / mass
        poly = tuple(c / mass for c in poly)
        rints = sys_.moment_kernel_integrals(phi)
        # zero masses have int R^1 rho = 0, so they contribute 1 each to the sum
        r1_sum = sum(r[1] for r in rints)
        lhs = params.beta + params.beta2 * (n_masses - r1_sum)
        rhs = 6.0 * g4 * a ** 4 + (24.0 * g4 * mu2 + 4.0 * g2p) * a ** 2
        f2 = float(np.sum(sys_.w * phi * sys_.y ** 2)) - mu2
        state.update(sys_=sys_, poly=poly, phi=phi, rlin=rlin,
                     mass_defect=mass - 1.0)
        return np.array([lhs - rhs, f2])

    if initial is None:
        red = solve_massless(ModelParams(g4=g4, g2=g2p, beta=params.beta,
                                         beta2=params.beta2, masses=(0.0,),
                                         trace_reg=params.trace_reg), 64)
        initial = (red.rho_H.support.a, max(red.mu2, 1e-6))
    t = _newton(residual, initial, cfg.outer_tol, cfg.max_outer_iters,
                lower=np.array([1e-8, -np.inf]))
    res = residual(t)
    return _finish_massive(
        params, state["sys_"], state["poly"], state["phi"], state["rlin"],
        mu2=float(t[1]), phase=ONE_CUT,
        extra_residuals={"outer_edge": float(res[0]),
                         "mass_defect_raw": state["mass_defect"]})


def solve_two_cut(params: ModelParams, cfg: NystromConfig = None,
                  initial=None) -> EquilibriumSolution:
    """Split-support solve: unknowns (a, b, mu2), edge conditions from R^0, R^2.

    The outer system is
        0 = beta2 sum_k int R^0_k rho + 8 g4 (a^2+b^2) + 48 g4 mu2 + 8 g2'
        beta + beta2 sum_k (1 - int R^2_k rho)
            = 2 g4 (3 a^4 + 2 a^2 b^2 + 3 b^4) + (24 g4 mu2 + 4 g2') (a^2+b^2)
        mu2 = int x^2 rho
    """
    cfg = cfg or NystromConfig()
    g4, g2p = params.g4, params.g2_eff
    if g4 <= 0.0:
        raise ParamError("two-cut phase needs g4 > 0")
    beta_eff = _effective_beta(params)
    n_masses = len(params.masses)
    poly = (0.0, 16.0 * g4 / (math.pi * beta_eff))
    state = {}

    def residual(t):
        a, b, mu2 = t
        if b >= a:
            return np.array([1e6, 1e6, 1e6])
        support = Support(TWO_CUT, a, b)
        sys_ = _PhiSystem(support, params, cfg.n_nodes)
        phi, rlin = sys_.solve(poly, cfg.inner_tol)
        mass = float(np.sum(sys_.w * phi))
        if not np.isfinite(mass) or mass <= 0.0:
            return np.array([1e6, 1e6, 1e6])
        phi = phi / mass
        rints = sys_.moment_kernel_integrals(phi)
        r0_sum = sum(r[0] for r in rints)
        r2_sum = sum(r[2] for r in rints)
        s2 = a * a + b * b
        f1 = (params.beta2 * r0_sum + 8.0 * g4 * s2 + 48.0 * g4 * mu2
              + 8.0 * g2p)
        lhs = params.beta + params.beta2 * (n_masses - r2_sum)
        rhs = (2.0 * g4 * (3.0 * a ** 4 + 2.0 * a * a * b * b + 3.0 * b ** 4)
               + (24.0 * g4 * mu2 + 4.0 * g2p) * s2)
        f3 = float(np.sum(sys_.w * phi * sys_.y ** 2)) - mu2
        state.update(sys_=sys_, phi=phi, rlin=rlin, mass_defect=mass - 1.0,
                     poly=tuple(c / mass for c in poly))
        return np.array([f1, lhs - rhs, f3])

    if initial is None:
        red = solve_massless(ModelParams(g4=g4, g2=g2p, beta=params.beta,
                                         beta2=params.beta2, masses=(0.0,),
                                         trace_reg=params.trace_reg), 64)
        a0 = red.rho_H.support.a
        b0 = red.rho_H.support.b if red.phase == TWO_CUT else 0.15 * a0
        initial = (a0, b0, max(red.mu2, 1e-6))
    t = _newton(residual, initial, cfg.outer_tol, cfg.max_outer_iters,
                lower=np.array([1e-8, 1e-8, -np.inf]))
    if t[1] < 1e-5 * t[0]:
        raise PhaseMismatchError(f"inner edge collapsed (b={t[1]:.3e}); one cut applies")
    res = residual(t)
    return _finish_massive(
        params, state["sys_"], state["poly"], state["phi"], state["rlin"],
        mu2=float(t[2]), phase=TWO_CUT,
        extra_residuals={"outer_edge": float(res[0]), "outer_edge2": float(res[1]),
                         "mass_defect_raw": state["mass_defect"]})


def _massless_starts(params: ModelParams):
    """Warm starts from the massless closed forms at the same g2_eff: the
    beta+beta2 reduction (small-m limit) and the beta-only model (large-m limit)."""
    starts = []
    for beta2 in (params.beta2, 0.0):
        try:
            red = solve_massless(ModelParams(
                g4=params.g4, g2=params.g2_eff, beta=params.beta, beta2=beta2,
                masses=(0.0,), trace_reg=params.trace_reg), 64)
            starts.append(red)
        except (ParamError, PhaseMismatchError):
            pass
    return starts


def solve_equilibrium(params: ModelParams, cfg: NystromConfig = None) -> EquilibriumSolution:
    """Phase dispatch at any mass: closed form at m = 0, otherwise Nystrom solves
    of both phases with massless warm starts, lowest energy winning when both
    are admissible."""
    cfg = cfg or NystromConfig()
    if params.is_massless():
        return solve_massless(params, cfg.n_nodes)
    reds = _massless_starts(params)
    candidates = []
    errors = []
    one_cut_starts = [(r.rho_H.support.a, max(r.mu2, 1e-6)) for r in reds]
    for ini in one_cut_starts or [None]:
        try:
            candidates.append(solve_one_cut(params, cfg, initial=ini))
            break
        except (SolverError, PhaseMismatchError) as exc:
            errors.append(f"one-cut from {ini}: {exc}")
    if params.g4 > 0.0:
        two_cut_starts = []
        for r in reds:
            a0 = r.rho_H.support.a
            b0 = r.rho_H.support.b if r.phase == TWO_CUT else 0.15 * a0
            two_cut_starts.append((a0, b0, max(r.mu2, 1e-6)))
        for ini in two_cut_starts or [None]:
            try:
                candidates.append(solve_two_cut(params, cfg, initial=ini))
                break
            except (SolverError, PhaseMismatchError) as exc:
                errors.append(f"two-cut from {ini}: {exc}")
    if not candidates:
        raise SolverError("no admissible phase found: " + "; ".join(errors))
    return min(candidates, key=lambda sol: sol.energy)
