"""Domain types, interaction potential, energy functional, and analytic kernels.

The ensemble is the eigenvalue model of a quartic Hermitian matrix coupled to
fermions: eigenvalue pairs interact through

    U(x, y) = 2 g4 (m^2 + r^2)^2 + 2 g2 (m^2 + r^2)
              - (beta2/4) log(m^2 + r^2) + (trace_reg/2) x y,   r = x - y,

with the mass-dependent parts summed over the fermion mass list, and the
Vandermonde repulsion (beta/4) log((x-y)^2).  The large-N spectral density is
the minimizer of the induced energy functional.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict, replace
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

__all__ = [
    "ParamError",
    "SingularInputError",
    "PhaseMismatchError",
    "SolverError",
    "ModelParams",
    "Support",
    "DensityGrid",
    "EquilibriumSolution",
    "potential_U",
    "energy_functional",
    "sqrt_s",
    "sqrt_s_plus",
    "kernel_K",
    "kernel_R",
    "kernel_Ktilde",
    "dirac_spectrum_from_H",
    "l1_distance",
]


class ParamError(ValueError):
    """Invalid model or configuration parameters."""


class SingularInputError(ValueError):
    """Evaluation at a point where a log or branch cut makes the value undefined."""


class PhaseMismatchError(RuntimeError):
    """A phase-specific solve signalled that the other phase is the admissible one."""


class SolverError(RuntimeError):
    """A nonlinear or linear solve failed to converge."""


@dataclass(frozen=True)
class ModelParams:
    """Full parameter point of the ensemble.

    g2_eff = g2 + 2 g4 sum_k m_k^2 is derived, never stored; it is the
    quadratic coupling that stays meaningful when comparing masses.
    """

    g4: float
    g2: float
    beta: float = 2.0
    beta2: float = 2.0
    masses: tuple = (0.0,)
    trace_reg: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "masses", tuple(float(m) for m in self.masses))
        self.validate()

    def validate(self) -> None:
        if self.g4 < 0:
            raise ParamError(f"g4 must be >= 0, got {self.g4}")
        if self.g4 == 0 and self.g2 <= 0:
            raise ParamError("Gaussian mode (g4 = 0) requires g2 > 0")
        if self.beta <= 0:
            raise ParamError(f"beta must be > 0, got {self.beta}")
        if self.beta + self.beta2 <= 0:
            raise ParamError("beta + beta2 must be > 0 (net repulsion)")
        if not self.masses:
            raise ParamError("masses must be a non-empty list")
        if any(m < 0 for m in self.masses):
            raise ParamError(f"masses must be >= 0, got {self.masses}")
        if self.trace_reg <= 0:
            raise ParamError(f"trace_reg must be > 0, got {self.trace_reg}")

    @property
    def g2_eff(self) -> float:
        return self.g2 + 2.0 * self.g4 * sum(m * m for m in self.masses)

    @property
    def beta_total(self) -> float:
        """beta + beta2, the repulsion exponent of the massless-reduced model."""
        return self.beta + self.beta2

    def is_massless(self) -> bool:
        return all(m == 0.0 for m in self.masses)

    @classmethod
    def from_g2_eff(cls, g4, g2_eff, beta=2.0, beta2=2.0, masses=(0.0,), trace_reg=1.0):
        g2 = g2_eff - 2.0 * g4 * sum(float(m) ** 2 for m in masses)
        return cls(g4=g4, g2=g2, beta=beta, beta2=beta2, masses=masses,
                   trace_reg=trace_reg)

    def to_json(self) -> dict:
        return {
            "g4": self.g4,
            "g2": self.g2,
            "g2_eff": self.g2_eff,
            "beta": self.beta,
            "beta2": self.beta2,
            "masses": list(self.masses),
            "trace_reg": self.trace_reg,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ModelParams":
        known = {"g4", "g2", "g2_eff", "beta", "beta2", "masses", "trace_reg"}
        unknown = set(obj) - known
        if unknown:
            raise ParamError(f"unknown parameter fields: {sorted(unknown)}")
        kwargs = {k: obj[k] for k in ("g4", "beta", "beta2", "masses", "trace_reg")
                  if k in obj}
        masses = tuple(kwargs.get("masses", (0.0,)))
        kwargs["masses"] = masses
        if "g2" in obj:
            p = cls(g2=obj["g2"], **kwargs)
            if "g2_eff" in obj and not math.isclose(p.g2_eff, obj["g2_eff"],
                                                    rel_tol=1e-9, abs_tol=1e-9):
                raise ParamError(
                    f"inconsistent g2={obj['g2']} and g2_eff={obj['g2_eff']} "
                    f"(derived g2_eff={p.g2_eff})")
            return p
        if "g2_eff" in obj:
            g4 = kwargs.get("g4", 0.0)
            return cls.from_g2_eff(g2_eff=obj["g2_eff"], **kwargs)
        raise ParamError("one of g2 or g2_eff is required")


ONE_CUT = "one-cut"
TWO_CUT = "two-cut"


@dataclass(frozen=True)
class Support:
    """Support of an even equilibrium measure: [-a, a] or [-a, -b] u [b, a]."""

    kind: str
    a: float
    b: float = 0.0

    def __post_init__(self):
        if self.kind not in (ONE_CUT, TWO_CUT):
            raise ParamError(f"unknown support kind {self.kind!r}")
        if self.a <= 0:
            raise ParamError(f"outer edge must be > 0, got a={self.a}")
        if self.kind == ONE_CUT and self.b != 0.0:
            raise ParamError("one-cut support must have b = 0")
        if self.kind == TWO_CUT and not 0.0 < self.b < self.a:
            raise ParamError(f"two-cut support needs 0 < b < a, got b={self.b}, a={self.a}")

    def intervals(self) -> list:
        if self.kind == ONE_CUT:
            return [(-self.a, self.a)]
        return [(-self.a, -self.b), (self.b, self.a)]

    def contains(self, x, strict: bool = False):
        x = np.asarray(x, dtype=float)
        ax = np.abs(x)
        if self.kind == ONE_CUT:
            inside = ax < self.a if strict else ax <= self.a
        else:
            if strict:
                inside = (ax > self.b) & (ax < self.a)
            else:
                inside = (ax >= self.b) & (ax <= self.a)
        return inside


@dataclass
class DensityGrid:
    """A compactly supported density as quadrature data: sum w_i v_i f(x_i) ~ int f rho.

    The weights absorb any endpoint weight function, so `values` are plain
    density values.  Producers attach an off-node evaluator where one exists
    (closed form or Nystrom interpolation); otherwise evaluation falls back to
    linear interpolation inside the support.
    """

    nodes: np.ndarray
    weights: np.ndarray
    values: np.ndarray
    support: Support
    evaluator: Optional[Callable] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=float)
        self.weights = np.asarray(self.weights, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if not (self.nodes.shape == self.weights.shape == self.values.shape):
            raise ParamError("nodes, weights, values must have identical shapes")

    def total_mass(self) -> float:
        return float(np.sum(self.weights * self.values))

    def moment(self, k: int) -> float:
        return float(np.sum(self.weights * self.values * self.nodes ** k))

    def density(self, x):
        """Density evaluated at arbitrary points, zero outside the support."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.zeros_like(x)
        inside = self.support.contains(x)
        if np.any(inside):
            if self.evaluator is not None:
                out[inside] = self.evaluator(x[inside])
            else:
                order = np.argsort(self.nodes)
                out[inside] = np.interp(x[inside], self.nodes[order], self.values[order])
        return out


@dataclass
class EquilibriumSolution:
    """Solved spectral density of H with its diagnostics."""

    params: ModelParams
    rho_H: DensityGrid
    mu2: float
    phase: str
    residuals: dict
    energy: float


def _mass_terms(params: ModelParams, r2):
    """Sum over masses of the pairwise mass-dependent terms at squared distance r2."""
    r2 = np.asarray(r2, dtype=float)
    total = np.zeros_like(r2)
    for m in params.masses:
        m2 = m * m
        arg = m2 + r2
        if np.any(arg <= 0.0):
            raise SingularInputError(
                "log(m^2 + r^2) undefined: zero mass at coincident points")
        total = total + (2.0 * params.g4 * m2 * m2 + 2.0 * params.g2 * m2
                         - 0.25 * params.beta2 * np.log(arg))
    return total


def potential_U(x, y, params: ModelParams):
    """Pairwise interaction potential U(x, y); symmetric, finite off the mass singularity.

    Equals 2 g4 (m^2+r^2)^2 + 2 g2 (m^2+r^2) - (beta2/4) log(m^2+r^2)
    + (trace_reg/2) x y for a single mass, with the mass-dependent parts summed
    over the mass list (the quartic and quadratic r-terms enter once, through
    g2_eff, so that equal masses aggregate like beta2).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    r2 = (x - y) ** 2
    out = (2.0 * params.g4 * r2 * r2 + 2.0 * params.g2_eff * r2
           + _mass_terms(params, r2) + 0.5 * params.trace_reg * (x * y))
    return out if out.ndim else float(out)


def energy_functional(mu: DensityGrid, params: ModelParams,
                      norm_tol: float = 1e-6) -> float:
    """Energy I(mu) = double integral of U - (beta/4) log((x-y)^2) against mu x mu.

    Smooth pair terms use the full tensor-product rule; only the singular log
    terms (the beta term, plus the beta2 term of each zero mass, which has the
    same log(r^2) form) drop the diagonal, whose neglected band vanishes with
    grid spacing.  Rejects non-normalized input.
    """
    mass = mu.total_mass()
    if abs(mass - 1.0) > norm_tol:
        raise ParamError(f"energy_functional needs a probability density, mass={mass}")
    x = mu.nodes
    w = mu.weights * mu.values
    dx = x[:, None] - x[None, :]
    r2 = dx ** 2
    smooth = (2.0 * params.g4 * r2 * r2 + 2.0 * params.g2_eff * r2
              + 0.5 * params.trace_reg * (x[:, None] * x[None, :]))
    log_coef = 0.25 * params.beta
    for m in params.masses:
        m2 = m * m
        smooth = smooth + 2.0 * params.g4 * m2 * m2 + 2.0 * params.g2 * m2
        if m2 > 0.0:
            smooth = smooth - 0.25 * params.beta2 * np.log(m2 + r2)
        else:
            log_coef += 0.25 * params.beta2
    ww = w[:, None] * w[None, :]
    total = float(np.sum(ww * smooth))
    off = ~np.eye(len(x), dtype=bool)
    total -= log_coef * float(np.sum(ww[off] * np.log(r2[off])))
    return total


def _upper_halfify(z):
    """Force +0 imaginary part on real inputs so principal roots continue from above."""
    z = np.asarray(z, dtype=complex)
    re = np.real(z)
    im = np.imag(z)
    return np.where(im == 0.0, re + 0.0j, z)


def sqrt_s(z, support: Support):
    """Branch of sqrt((z^2-a^2)) or sqrt((z^2-a^2)(z^2-b^2)) analytic off the support.

    Product of principal square roots of the linear factors; positive real for
    real z > a, cuts exactly on the support.  Real points strictly inside a cut
    are rejected (use sqrt_s_plus for boundary values).
    """
    z = _upper_halfify(z)
    on_cut = (np.imag(z) == 0.0) & support.contains(np.real(z), strict=True)
    if np.any(on_cut):
        raise SingularInputError("sqrt_s evaluated on the open cut; use sqrt_s_plus")
    a, b = support.a, support.b
    out = np.sqrt(z - a) * np.sqrt(z + a)
    if support.kind == TWO_CUT:
        out = out * np.sqrt(z - b) * np.sqrt(z + b)
    return out if out.ndim else complex(out)


def sqrt_s_plus(x, support: Support):
    """Boundary weight sqrt(a^2-x^2) or sqrt((a^2-x^2)(x^2-b^2)), nonnegative on the cut."""
    x = np.asarray(x, dtype=float)
    if not np.all(support.contains(x)):
        raise SingularInputError("sqrt_s_plus needs points inside the support")
    a2 = support.a ** 2
    s = a2 - x * x
    if support.kind == TWO_CUT:
        s = s * (x * x - support.b ** 2)
    out = np.sqrt(np.maximum(s, 0.0))
    return out if out.ndim else float(out)


def _require_positive_mass(m: float) -> None:
    if m <= 0.0:
        raise ParamError("kernels need m > 0; the massless limit folds beta2 into beta")


def kernel_K(x, y, support: Support, m: float):
    """K(x, y) = Re( 1/sqrt_s(y + i m) * 1/(y + i m - x) ), smooth for m > 0."""
    _require_positive_mass(m)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    zy = y + 1j * m
    out = np.real(1.0 / (sqrt_s(zy, support) * (zy - x)))
    return out if out.ndim else float(out)


def kernel_R(n: int, y, support: Support, m: float):
    """R^n(y) = Re( (y + i m)^n / sqrt_s(y + i m) ) for n in {0, 1, 2}."""
    if n not in (0, 1, 2):
        raise ParamError(f"kernel_R order must be 0, 1 or 2, got {n}")
    _require_positive_mass(m)
    y = np.asarray(y, dtype=float)
    zy = y + 1j * m
    out = np.real(zy ** n / sqrt_s(zy, support))
    return out if out.ndim else float(out)


def kernel_Ktilde(x, y, support: Support, m: float, beta: float, beta2: float):
    """Bounded kernel of the phi equation:

        Ktilde(x, y) = (beta2/(pi beta)) sgn(x) sqrt_s_plus(y) Re( 1/(sqrt_s(y+im) (y + i m - x)) )

    The sign factor sits on the collocation point x (and is 1 on a one-cut
    support).  It is the same sign resolved into |x| in the two-cut source
    term: the resolvent construction produces sgn(x) times the odd function
    Re(1/(sqrt_s(y+im)(y+im-x))), keeping the kernel even under
    (x, y) -> (-x, -y) with an m -> 0 nascent-delta coefficient of
    -beta2/beta on both cuts.  Putting the sign on y instead would flip the
    coupling between opposite cuts.
    """
    _require_positive_mass(m)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    zy = y + 1j * m
    sgn = np.sign(x) if support.kind == TWO_CUT else np.ones_like(x)
    out = (beta2 / (math.pi * beta)) * sgn * sqrt_s_plus(y, support) * np.real(
        1.0 / (sqrt_s(zy, support) * (zy - x)))
    return out if out.ndim else float(out)


def dirac_spectrum_from_H(eigs: Sequence[float], m: float):
    """Spectrum {+-sqrt(m^2 + (l_i - l_j)^2)} of the Dirac operator over ordered pairs.

    Returns 2 N^2 signed values for N input eigenvalues; the multiset is
    negation symmetric and bounded below in modulus by m.
    """
    if m < 0:
        raise ParamError(f"mass must be >= 0, got {m}")
    lam = np.asarray(eigs, dtype=float)
    d = lam[:, None] - lam[None, :]
    vals = np.sqrt(m * m + d * d).ravel()
    return np.concatenate([vals, -vals])


def l1_distance(f: Callable, g: Callable, lo: float, hi: float,
                breakpoints: Iterable[float] = (), n_panels: int = 200,
                order: int = 12) -> float:
    """L1 distance of two densities on [lo, hi] by composite Gauss-Legendre panels.

    Extra breakpoints (support edges of either density) are inserted so the
    integrand is smooth inside each panel.
    """
    pts = sorted({float(lo), float(hi), *[float(b) for b in breakpoints
                                          if lo < float(b) < hi]})
    edges = []
    for left, right in zip(pts[:-1], pts[1:]):
        k = max(2, int(round(n_panels * (right - left) / (hi - lo))))
        edges.append(np.linspace(left, right, k + 1))
    xi, wi = np.polynomial.legendre.leggauss(order)
    total = 0.0
    for es in edges:
        mid = 0.5 * (es[1:] + es[:-1])
        half = 0.5 * (es[1:] - es[:-1])
        xs = (mid[:, None] + half[:, None] * xi[None, :]).ravel()
        ws = (half[:, None] * wi[None, :]).ravel()
        total += float(np.sum(ws * np.abs(f(xs) - g(xs))))
    return total
