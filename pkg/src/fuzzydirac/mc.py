"""Finite-N Metropolis sampler of the eigenvalue ensemble.

The joint eigenvalue weight is e^{-S} with

    S = sum_{i,j} [ 2 g4 r^4 + 2 g2_eff r^2 + C0 - (beta2/4) sum_k log(m_k^2 + r^2) ]
        - (beta/4) sum_{i != j} log(r^2) + trace_reg (sum_i lambda_i)^2,

r = lambda_i - lambda_j and C0 = sum_k (2 g4 m_k^4 + 2 g2 m_k^2); the diagonal
beta2 log is kept for positive masses and dropped at zero mass.  Sampling uses
systematic-scan single-eigenvalue Gaussian moves with an O(N) action update.
The same sweep kernel runs compiled (numba) or as pure Python on identical
pre-generated random blocks, so both paths produce bit-identical chains.
"""

from __future__ import annotations

import math
import os
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .core import DensityGrid, ModelParams, ONE_CUT, ParamError, Support

__all__ = [
    "McConfig",
    "McChain",
    "Estimate",
    "action",
    "metropolis_sample",
    "histogram_density",
    "expectation_estimator",
]


@dataclass(frozen=True)
class McConfig:
    """Chain length and proposal settings; `seed` fixes the chain exactly."""

    n_eigen: int = 100
    n_sweeps: int = 20000
    burn_in: int = 2000
    step_scale: float = 0.15
    seed: int = 12345
    thin: int = 1

    def __post_init__(self):
        if self.n_eigen < 1:
            raise ParamError("n_eigen must be >= 1")
        if self.n_sweeps < 1 or self.burn_in < 0:
            raise ParamError("n_sweeps must be >= 1 and burn_in >= 0")
        if self.step_scale <= 0:
            raise ParamError("step_scale must be > 0")
        if self.thin < 1:
            raise ParamError("thin must be >= 1")


@dataclass
class McChain:
    """Retained eigenvalue configurations plus bookkeeping."""

    samples: np.ndarray
    acceptance_rate: float
    params: ModelParams
    config: McConfig
    step_size: float = 0.0


class Estimate(NamedTuple):
    value: float
    stderr: float
    tau: float


def action(lam, params: ModelParams) -> float:
    """Total action of an eigenvalue configuration (additive constants included)."""
    lam = np.asarray(lam, dtype=float)
    n = len(lam)
    g4, g2e = params.g4, params.g2_eff
    c0 = sum(2.0 * g4 * m ** 4 + 2.0 * params.g2 * m ** 2 for m in params.masses)
    d = lam[:, None] - lam[None, :]
    off = ~np.eye(n, dtype=bool)
    r2 = d[off] ** 2
    if np.any(r2 == 0.0):
        return math.inf
    total = float(np.sum(2.0 * g4 * r2 * r2 + 2.0 * g2e * r2
                         - 0.25 * params.beta * np.log(r2))) + (n * n - n) * c0
    # diagonal pairs: r = 0, so only the constants and the mass log survive;
    # at zero mass the divergent diagonal log is dropped by convention
    total += n * c0
    for m in params.masses:
        m2 = m * m
        total -= 0.25 * params.beta2 * float(np.sum(np.log(m2 + r2)))
        if m > 0.0:
            total -= n * 0.25 * params.beta2 * math.log(m2)
    s = float(np.sum(lam))
    return total + params.trace_reg * s * s


def _sweep_block_impl(lam, state, normals, uniforms, step,
                      g4, g2eff, beta, beta2, m2s, trace_reg, prod_buf):
    """One block of systematic-scan sweeps; mutates lam and state in place.

    state[0] tracks sum(lam).  Ratio products replace per-pair logs; collisions
    and overflow fall back to a per-pair log loop so the result stays finite.
    Returns the number of accepted proposals.
    """
    n_block = normals.shape[0]
    n = normals.shape[1]
    n_m = m2s.shape[0]
    accepts = 0
    s_lam = state[0]
    for s in range(n_block):
        for i in range(n):
            delta = step * normals[s, i]
            xo = lam[i]
            xn = xo + delta
            d_s_val = trace_reg * delta * (2.0 * s_lam + delta)
            prod_v = 1.0
            for k in range(n_m):
                prod_buf[k] = 1.0
            for j in range(n):
                if j == i:
                    continue
                do = xo - lam[j]
                dn = xn - lam[j]
                qo = do * do
                qn = dn * dn
                d_s_val += 2.0 * (2.0 * g4 * (qn * qn - qo * qo)
                                  + 2.0 * g2eff * (qn - qo))
                prod_v *= qn / qo
                for k in range(n_m):
                    prod_buf[k] *= (m2s[k] + qn) / (m2s[k] + qo)
            if prod_v > 0.0 and math.isfinite(prod_v):
                d_s_val -= 0.5 * beta * math.log(prod_v)
            else:
                lsum = 0.0
                for j in range(n):
                    if j == i:
                        continue
                    qo = (xo - lam[j]) ** 2
                    qn = (xn - lam[j]) ** 2
                    if qn == 0.0:
                        lsum = -math.inf
                        break
                    lsum += math.log(qn / qo)
                d_s_val -= 0.5 * beta * lsum
            for k in range(n_m):
                pv = prod_buf[k]
                if pv > 0.0 and math.isfinite(pv):
                    d_s_val -= 0.5 * beta2 * math.log(pv)
                else:
                    lsum = 0.0
                    for j in range(n):
                        if j == i:
                            continue
                        qo = (xo - lam[j]) ** 2
                        qn = (xn - lam[j]) ** 2
                        num = m2s[k] + qn
                        if num == 0.0:
                            lsum = -math.inf
                            break
                        lsum += math.log(num / (m2s[k] + qo))
                    d_s_val -= 0.5 * beta2 * lsum
            accept = False
            if d_s_val <= 0.0:
                accept = True
            elif d_s_val == d_s_val and uniforms[s, i] < math.exp(-d_s_val):
                accept = True
            if accept:
                lam[i] = xn
                s_lam += delta
                accepts += 1
    state[0] = s_lam
    return accepts


def _get_kernel():
    if os.environ.get("FUZZYDIRAC_NO_NUMBA"):
        return _sweep_block_impl
    try:
        import numba
        global _NUMBA_KERNEL
        if _NUMBA_KERNEL is None:
            _NUMBA_KERNEL = numba.njit(cache=True)(_sweep_block_impl)
        return _NUMBA_KERNEL
    except ImportError:
        return _sweep_block_impl


_NUMBA_KERNEL = None


def metropolis_sample(params: ModelParams, config: McConfig) -> McChain:
    """Run the chain: burn-in with step adaptation toward ~0.4 acceptance,
    then config.n_sweeps sweeps retaining every config.thin-th configuration.
    Deterministic in config.seed."""
    kernel = _get_kernel()
    n = config.n_eigen
    rng = np.random.Generator(np.random.PCG64(config.seed))
    lam = rng.normal(0.0, 0.5, n)
    state = np.array([lam.sum()])
    m2s = np.array([m * m for m in params.masses], dtype=float)
    prod_buf = np.empty_like(m2s)
    args = (params.g4, params.g2_eff, params.beta, params.beta2, m2s,
            params.trace_reg, prod_buf)
    step = config.step_scale

    adapt_every = 50
    done = 0
    while done < config.burn_in:
        block = min(adapt_every, config.burn_in - done)
        normals = rng.standard_normal((block, n))
        uniforms = rng.random((block, n))
        acc = kernel(lam, state, normals, uniforms, step, *args)
        rate = acc / (block * n)
        step = min(1e2, max(1e-4, step * math.exp(0.8 * (rate - 0.4))))
        done += block

    n_retained = config.n_sweeps // config.thin
    samples = np.empty((n_retained, n))
    accepted = 0
    chunk_groups = max(1, 512 // config.thin)
    idx = 0
    while idx < n_retained:
        groups = min(chunk_groups, n_retained - idx)
        block = groups * config.thin
        normals = rng.standard_normal((block, n))
        uniforms = rng.random((block, n))
        for g in range(groups):
            lo = g * config.thin
            hi = lo + config.thin
            accepted += kernel(lam, state, normals[lo:hi], uniforms[lo:hi],
                               step, *args)
            samples[idx] = lam
            idx += 1
    rate = accepted / (n_retained * config.thin * n)
    if not 0.2 <= rate <= 0.6:
        warnings.warn(f"acceptance rate {rate:.3f} outside [0.2, 0.6] "
                      f"after adaptation (step={step:.4f})")
    return McChain(samples=samples, acceptance_rate=rate, params=params,
                   config=config, step_size=step)


def histogram_density(chain: McChain, n_bins: int = 61) -> DensityGrid:
    """Normalized symmetric-range histogram of all retained eigenvalues."""
    pooled = chain.samples.ravel()
    lim = float(np.max(np.abs(pooled))) * (1.0 + 1e-9)
    edges = np.linspace(-lim, lim, n_bins + 1)
    counts, _ = np.histogram(pooled, bins=edges)
    width = edges[1] - edges[0]
    density = counts / (pooled.size * width)
    centers = 0.5 * (edges[1:] + edges[:-1])
    weights = np.full_like(centers, width)
    return DensityGrid(centers, weights, density, Support(ONE_CUT, lim))


def _autocorr_stderr(series: np.ndarray):
    """Standard error with the initial-positive-sequence autocorrelation sum."""
    x = np.asarray(series, dtype=float)
    n = len(x)
    if n < 4:
        return float(np.std(x) / math.sqrt(max(n, 1))), 1.0
    x = x - x.mean()
    nfft = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(x, nfft)
    acov = np.fft.irfft(f * np.conj(f))[:n] / n
    if acov[0] <= 0.0:
        return 0.0, 1.0
    pair = acov[:n - n % 2].reshape(-1, 2).sum(axis=1)
    sigma2 = -acov[0]
    for p in pair:
        if p <= 0.0:
            break
        sigma2 += 2.0 * p
    sigma2 = max(sigma2, acov[0])
    tau = sigma2 / acov[0]
    return float(math.sqrt(sigma2 / n)), float(tau)


def _pair_heat_sums(block: np.ndarray, t: float):
    """Per-sample sums over ordered eigenvalue pairs (diagonal included):
    A = sum e^{-t d^2}, B = sum d^2 e^{-t d^2}, C = sum d^4 e^{-t d^2}."""
    d2 = (block[:, :, None] - block[:, None, :]) ** 2
    e = np.exp(-t * d2)
    A = e.sum(axis=(1, 2))
    B = (d2 * e).sum(axis=(1, 2))
    C = (d2 * d2 * e).sum(axis=(1, 2))
    return A, B, C


def expectation_estimator(chain: McChain, t: float, kind: str = "d_s",
                          chunk: int = 64) -> Estimate:
    """Monte-Carlo estimate of k_{D^2}, d_s, or v_s at one t.

    Each retained configuration contributes the observable of its own Dirac
    spectrum {+-sqrt(m_k^2 + (l_i - l_j)^2)}; the error bar uses the
    autocorrelation-corrected standard error of that scalar series.
    """
    if kind not in ("k_D2", "d_s", "v_s"):
        raise ParamError(f"unknown estimator kind {kind!r}")
    masses = list(chain.params.masses)
    s = chain.samples
    n_s, n = s.shape
    series = np.empty(n_s)
    for lo in range(0, n_s, chunk):
        block = s[lo:lo + chunk]
        A, B, C = _pair_heat_sums(block, t)
        if kind == "k_D2":
            val = np.zeros_like(A)
            for m in masses:
                val += math.exp(-t * m * m) * A
            series[lo:lo + chunk] = val / (len(masses) * n * n)
        elif kind == "d_s":
            num = np.zeros_like(A)
            den = np.zeros_like(A)
            for m in masses:
                e = math.exp(-t * m * m)
                num += e * (m * m * A + B)
                den += e * A
            series[lo:lo + chunk] = 2.0 * t * num / den
        else:
            k = np.zeros_like(A)
            k1 = np.zeros_like(A)
            k2 = np.zeros_like(A)
            for m in masses:
                e = math.exp(-t * m * m)
                m2 = m * m
                k += e * A
                k1 += e * (m2 * A + B)
                k2 += e * (m2 * m2 * A + 2.0 * m2 * B + C)
            series[lo:lo + chunk] = 2.0 * t * t * (k2 / k - (k1 / k) ** 2)
    stderr, tau = _autocorr_stderr(series)
    return Estimate(value=float(series.mean()), stderr=stderr, tau=tau)
