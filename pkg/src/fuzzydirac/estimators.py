"""Spectral observables of the Dirac operator built from the density of H.

The squared Dirac eigenvalues at fermion mass m are m^2 + delta^2 with delta
drawn from the difference process of H, so the massless Dirac density is the
self-convolution rho_D = rho_H * rho_H and the mass enters the heat kernel as
an exact factor:

    k_m(t) = e^{-t m^2} k_0(t)
    d_s^m(t) = 2 t m^2 + d_s^0(t)
    v_s^m(t) = v_s^0(t)

with d_s(t) = -2t d/dt log k and v_s(t) = 2t^2 d^2/dt^2 log k.  Quadrature on
a graded rho_D grid is the canonical evaluation route; Bessel and 2F2 closed
forms of the one-cut and semicircle cases provide independent cross-checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._quad import composite_gl, graded_edges
from .core import (ONE_CUT, TWO_CUT, DensityGrid, ParamError,
                   SingularInputError, Support)
from .specfun import bessel_I, bessel_J, hyp2f2

__all__ = [
    "EstimatorCurve",
    "dirac_density",
    "mass_transform",
    "heat_kernel_kH",
    "heat_kernel_kD2",
    "heat_kernel_kD2_factorized",
    "cosine_transform",
    "spectral_dimension",
    "spectral_variance",
    "estimator_table",
    "low_energy_exponent",
    "one_cut_kH_bessel",
    "one_cut_khat_bessel",
    "semicircle_kD2_2f2",
    "semicircle_ds_2f2",
    "semicircle_vs_2f2",
]


@dataclass
class EstimatorCurve:
    """An observable sampled on an increasing t grid."""

    t_values: np.ndarray
    values: np.ndarray
    kind: str

    def __post_init__(self):
        self.t_values = np.asarray(self.t_values, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.t_values.shape != self.values.shape:
            raise ParamError("t_values and values must have the same shape")
        if np.any(np.diff(self.t_values) <= 0):
            raise ParamError("t_values must be strictly increasing")


def _convolution_pieces(support: Support, u: float):
    """Intersections of the support with its u-shift: the x ranges of
    integral rho(x) rho(x - u) dx."""
    pieces = []
    eps = 1e-14 * support.a
    for ilo, ihi in support.intervals():
        for jlo, jhi in support.intervals():
            lo = max(ilo, jlo + u)
            hi = min(ihi, jhi + u)
            if hi - lo > eps:
                pieces.append((lo, hi))
    return pieces


def dirac_density(rho_H: DensityGrid, inner_levels: int = 10,
                  outer_levels: int = 12, zero_levels: int = 30,
                  order: int = 12) -> DensityGrid:
    """Massless Dirac density rho_D = rho_H * rho_H on [-2a, 2a].

    The outer grid uses Gauss-Legendre panels graded toward every breakpoint
    of the convolution (and very deeply toward 0, where the low-energy
    exponent is read off); each value is a graded-panel quadrature of
    rho(x) rho(x-u) over the support intersections.
    """
    sup = rho_H.support
    a, b = sup.a, sup.b
    if sup.kind == ONE_CUT:
        breaks = [0.0, 2.0 * a]
    else:
        breaks = sorted({0.0, a - b, 2.0 * b, a + b, 2.0 * a})
    u_nodes = []
    u_weights = []
    for k, (lo, hi) in enumerate(zip(breaks[:-1], breaks[1:])):
        lev_lo = zero_levels if k == 0 else outer_levels
        edges = graded_edges(lo, hi, lev_lo, outer_levels, ratio=0.45,
                             interior=4)
        xs, ws = composite_gl(edges, order)
        u_nodes.append(xs)
        u_weights.append(ws)
    u = np.concatenate(u_nodes)
    w = np.concatenate(u_weights)

    values = np.empty_like(u)
    for i, ui in enumerate(u):
        pieces = _convolution_pieces(sup, ui)
        if not pieces:
            values[i] = 0.0
            continue
        xs_all = []
        ws_all = []
        for lo, hi in pieces:
            edges = graded_edges(lo, hi, inner_levels, inner_levels,
                                 ratio=0.4, interior=2)
            xs, ws = composite_gl(edges, order)
            xs_all.append(xs)
            ws_all.append(ws)
        xs = np.concatenate(xs_all)
        ws = np.concatenate(ws_all)
        values[i] = float(np.sum(ws * rho_H.density(xs) * rho_H.density(xs - ui)))

    nodes = np.concatenate([-u[::-1], u])
    weights = np.concatenate([w[::-1], w])
    vals = np.concatenate([values[::-1], values])
    return DensityGrid(nodes, weights, vals, Support(ONE_CUT, 2.0 * a))


def mass_transform(rho_D: DensityGrid, m: float) -> DensityGrid:
    """Pushforward of the massless Dirac density under lambda -> +-sqrt(m^2 + x^2):

        rho_m(lambda) = (|lambda| / sqrt(lambda^2 - m^2)) rho_D(sqrt(lambda^2 - m^2))

    Quadrature data transform node-by-node so total mass is preserved exactly;
    m = 0 is the identity.
    """
    if m < 0:
        raise ParamError(f"mass must be >= 0, got {m}")
    if m == 0.0:
        return rho_D
    x = rho_D.nodes
    if np.any(x == 0.0):
        raise ParamError("mass_transform needs a grid without a node at 0")
    lam = np.sign(x) * np.sqrt(m * m + x * x)
    jac = np.abs(lam) / np.abs(x)
    support = Support(TWO_CUT, a=math.hypot(m, rho_D.support.a), b=m)
    inner = rho_D

    def evaluate(ls):
        ls = np.atleast_1d(np.asarray(ls, dtype=float))
        out = np.zeros_like(ls)
        mask = np.abs(ls) > m
        xi = np.sqrt(ls[mask] ** 2 - m * m)
        out[mask] = inner.density(xi) * np.abs(ls[mask]) / xi
        return out

    return DensityGrid(lam, rho_D.weights / jac, rho_D.values * jac, support,
                       evaluator=evaluate)


def heat_kernel_kH(rho_H: DensityGrid, t):
    """k_H(t) = integral e^{-x t} rho_H(x) dx; even in t, k_H(0) = 1."""
    t = np.asarray(t, dtype=float)
    z = rho_H.weights * rho_H.values
    out = np.exp(-np.multiply.outer(t, rho_H.nodes)) @ z
    return out if out.ndim else float(out)


def cosine_transform(rho_H: DensityGrid, u):
    """khat(u) = integral cos(u x) rho_H(x) dx, the characteristic function."""
    u = np.asarray(u, dtype=float)
    z = rho_H.weights * rho_H.values
    out = np.cos(np.multiply.outer(u, rho_H.nodes)) @ z
    return out if out.ndim else float(out)


def heat_kernel_kD2(rho_D: DensityGrid, t, m: float = 0.0):
    """k_{D^2}(t) = e^{-t m^2} integral e^{-t x^2} rho_D(x) dx over the massless
    Dirac grid (the mass is exact and analytic)."""
    if m < 0:
        raise ParamError(f"mass must be >= 0, got {m}")
    t = np.asarray(t, dtype=float)
    z = rho_D.weights * rho_D.values
    out = np.exp(-t * m * m) * (np.exp(-np.multiply.outer(t, rho_D.nodes ** 2)) @ z)
    return out if out.ndim else float(out)


def heat_kernel_kD2_factorized(rho_H: DensityGrid, t, m: float = 0.0,
                               s_max: float = 8.5, order: int = 8):
    """Factorization route: with delta = x - y independent under rho_H x rho_H,

        k_{D^2}(t) = e^{-t m^2} sqrt(2/pi) int_0^inf e^{-s^2/2} khat(sqrt(2t) s)^2 ds.

    The s panel count scales with the oscillation rate of khat.
    """
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    a = rho_H.support.a
    out = np.empty_like(ts)
    for i, ti in enumerate(ts):
        n_panels = max(60, int(8.0 * a * math.sqrt(2.0 * abs(ti)) * s_max / math.pi))
        s, ws = composite_gl(np.linspace(0.0, s_max, n_panels + 1), order)
        khat = cosine_transform(rho_H, math.sqrt(2.0 * abs(ti)) * s)
        out[i] = math.sqrt(2.0 / math.pi) * float(
            np.sum(ws * np.exp(-0.5 * s * s) * khat ** 2))
    out = np.exp(-ts * m * m) * out
    return out if np.ndim(t) else float(out[0])


def _mass_list(solution):
    return list(solution.params.masses)


def _heat_sums(rho_D: DensityGrid, t):
    """A = int e^{-t x^2} rho_D, and its first two t-derivative magnitudes
    B = int x^2 e^{-t x^2} rho_D, C = int x^4 e^{-t x^2} rho_D."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    x2 = rho_D.nodes ** 2
    z = rho_D.weights * rho_D.values
    e = np.exp(-np.multiply.outer(t, x2))
    A = e @ z
    B = e @ (z * x2)
    C = e @ (z * x2 * x2)
    return A, B, C


def spectral_dimension(solution, t, rho_D: DensityGrid = None):
    """d_s(t) = -2t d/dt log k_{D^2}(t); the fermion mass enters analytically.

    For a single mass m this is exactly 2 t m^2 + d_s^0(t); for several masses
    the heat kernels of the branches are averaged before taking the log
    derivative.
    """
    if rho_D is None:
        rho_D = dirac_density(solution.rho_H)
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    A, B, _ = _heat_sums(rho_D, ts)
    masses = _mass_list(solution)
    if len(masses) == 1:
        m = masses[0]
        out = 2.0 * ts * m * m + 2.0 * ts * B / A
    else:
        num = np.zeros_like(ts)
        den = np.zeros_like(ts)
        for m in masses:
            e = np.exp(-ts * m * m)
            num += e * (m * m * A + B)
            den += e * A
        out = 2.0 * ts * num / den
    return out if np.ndim(t) else float(out[0])


def spectral_variance(solution, t, rho_D: DensityGrid = None):
    """v_s(t) = 2t^2 d^2/dt^2 log k_{D^2}(t); independent of a single fermion mass."""
    if rho_D is None:
        rho_D = dirac_density(solution.rho_H)
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    A, B, C = _heat_sums(rho_D, ts)
    masses = _mass_list(solution)
    if len(masses) == 1:
        out = 2.0 * ts ** 2 * (C / A - (B / A) ** 2)
    else:
        k = np.zeros_like(ts)
        k1 = np.zeros_like(ts)  # -dk/dt
        k2 = np.zeros_like(ts)  # d^2k/dt^2
        for m in masses:
            e = np.exp(-ts * m * m)
            m2 = m * m
            k += e * A
            k1 += e * (m2 * A + B)
            k2 += e * (m2 * m2 * A + 2.0 * m2 * B + C)
        out = 2.0 * ts ** 2 * (k2 / k - (k1 / k) ** 2)
    return out if np.ndim(t) else float(out[0])


def estimator_table(solution, t_values, rho_D: DensityGrid = None):
    """Curves (k_D2, d_s, v_s) over t_values sharing one Dirac-density build."""
    if rho_D is None:
        rho_D = dirac_density(solution.rho_H)
    ts = np.asarray(t_values, dtype=float)
    A, _, _ = _heat_sums(rho_D, ts)
    masses = _mass_list(solution)
    k = np.zeros_like(ts)
    for m in masses:
        k += np.exp(-ts * m * m) * A
    k /= len(masses)
    ds = spectral_dimension(solution, ts, rho_D)
    vs = spectral_variance(solution, ts, rho_D)
    return (EstimatorCurve(ts, k, "k_D2"),
            EstimatorCurve(ts, ds, "d_s"),
            EstimatorCurve(ts, vs, "v_s"))


def low_energy_exponent(rho_D: DensityGrid, min_points: int = 10) -> float:
    """Fit rho_D(x) ~ c x^alpha on the smallest resolved decade; return 1 + alpha,
    the low-energy spectral dimension.

    A density that vanishes in a whole neighborhood of zero (a mass gap) has no
    power-law exponent; that case is rejected, and the mass should be handled
    through its analytic heat-kernel factor instead.
    """
    if rho_D.support.kind == TWO_CUT:
        raise SingularInputError(
            "density has a spectral gap; use the analytic mass factor")
    pos = rho_D.nodes > 0
    x = rho_D.nodes[pos]
    v = rho_D.values[pos]
    order = np.argsort(x)
    x, v = x[order], v[order]
    good = v > 1e-300
    if not np.any(good[: max(min_points, 4)]):
        raise SingularInputError(
            "density vanishes near zero with no recorded mass; cannot fit exponent")
    x, v = x[good], v[good]
    hi = 10.0 * x[0]
    while np.count_nonzero(x <= hi) < min_points and hi < x[-1]:
        hi *= 10.0
    sel = x <= hi
    slope, _ = np.polyfit(np.log(x[sel]), np.log(v[sel]), 1)
    return 1.0 + float(slope)


def _one_cut_coeffs(solution):
    p = solution.params
    if not p.is_massless():
        raise ParamError("Bessel heat-kernel forms hold for massless solutions")
    if solution.phase != ONE_CUT:
        raise ParamError("Bessel heat-kernel forms hold in the one-cut phase")
    a = solution.rho_H.support.a
    B = p.beta_total
    c1 = 12.0 * p.g4 * a * a + 24.0 * p.g4 * solution.mu2 + 4.0 * p.g2
    c2 = 24.0 * p.g4 * a * a
    return a, B, c1, c2


def one_cut_kH_bessel(solution, t):
    """Closed form k_H(t) = (2a^2/B)[c1 I_1(at)/(at) - c2 I_2(at)/(at)^2] for the
    massless one-cut density, c1 = 12 g4 a^2 + 24 g4 mu2 + 4 g2, c2 = 24 g4 a^2."""
    a, B, c1, c2 = _one_cut_coeffs(solution)
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    z = a * ts
    out = np.empty_like(ts)
    small = np.abs(z) < 1e-8
    out[small] = (2.0 * a * a / B) * (c1 / 2.0 - c2 / 8.0)
    zb = z[~small]
    out[~small] = (2.0 * a * a / B) * (c1 * bessel_I(1, zb) / zb
                                       - c2 * bessel_I(2, zb) / zb ** 2)
    return out if np.ndim(t) else float(out[0])


def one_cut_khat_bessel(solution, u):
    """Fourier side of one_cut_kH_bessel with J Bessel functions."""
    a, B, c1, c2 = _one_cut_coeffs(solution)
    us = np.atleast_1d(np.asarray(u, dtype=float))
    z = a * us
    out = np.empty_like(us)
    small = np.abs(z) < 1e-8
    out[small] = (2.0 * a * a / B) * (c1 / 2.0 - c2 / 8.0)
    zb = z[~small]
    out[~small] = (2.0 * a * a / B) * (c1 * bessel_J(1, zb) / zb
                                       - c2 * bessel_J(2, zb) / zb ** 2)
    return out if np.ndim(u) else float(out[0])


def semicircle_kD2_2f2(a: float, t: float) -> float:
    """k_{D^2}(t) = 2F2(1/2, 3/2; 2, 3; -4 a^2 t) for a semicircle of radius a."""
    return hyp2f2(0.5, 1.5, 2.0, 3.0, -4.0 * a * a * t)


def semicircle_ds_2f2(a: float, t: float) -> float:
    """d_s(t) = t a^2 2F2(3/2, 5/2; 3, 4; z) / 2F2(1/2, 3/2; 2, 3; z), z = -4 a^2 t."""
    z = -4.0 * a * a * t
    f1 = hyp2f2(0.5, 1.5, 2.0, 3.0, z)
    f2 = hyp2f2(1.5, 2.5, 3.0, 4.0, z)
    return t * a * a * f2 / f1


def semicircle_vs_2f2(a: float, t: float) -> float:
    """v_s(t) = (t^2 a^4 / 4) (5 F3 F1 - 2 F2^2) / F1^2 with the 2F2 ladder
    F1 = 2F2(1/2,3/2;2,3;z), F2 = 2F2(3/2,5/2;3,4;z), F3 = 2F2(5/2,7/2;4,5;z)."""
    z = -4.0 * a * a * t
    f1 = hyp2f2(0.5, 1.5, 2.0, 3.0, z)
    f2 = hyp2f2(1.5, 2.5, 3.0, 4.0, z)
    f3 = hyp2f2(2.5, 3.5, 4.0, 5.0, z)
    return 0.25 * t * t * a ** 4 * (5.0 * f3 * f1 - 2.0 * f2 * f2) / (f1 * f1)
