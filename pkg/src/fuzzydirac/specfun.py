"""Bessel and 2F2 hypergeometric evaluations used by the heat-kernel closed forms.

The 2F2 series at large negative argument loses all double-precision digits to
cancellation (terms grow like e^|z| before the sum decays), so it is evaluated
in adaptive multiprecision and rounded once at the end.
"""

from __future__ import annotations

import math

import mpmath
import numpy as np
from scipy import special as _sp

from .core import ParamError

__all__ = ["bessel_I", "bessel_J", "hyp2f2", "hyp2f2_many", "HYP2F2_MAX_ABS_Z"]

HYP2F2_MAX_ABS_Z = 5000.0


def _check_order(order: int) -> None:
    if order not in (1, 2):
        raise ParamError(f"Bessel order must be 1 or 2, got {order}")


def bessel_I(order: int, x):
    """Modified Bessel function I_1 or I_2."""
    _check_order(order)
    return _sp.iv(order, x)


def bessel_J(order: int, x):
    """Bessel function J_1 or J_2."""
    _check_order(order)
    return _sp.jv(order, x)


def hyp2f2(a1: float, a2: float, b1: float, b2: float, z: float) -> float:
    """2F2(a1, a2; b1, b2; z) to ~1e-12 relative accuracy for |z| <= 5000.

    Working precision scales with |z| to absorb the alternating-series
    cancellation; arguments outside the supported range are rejected rather
    than silently degraded.
    """
    if not math.isfinite(z):
        raise ParamError(f"hyp2f2 argument must be finite, got {z}")
    if abs(z) > HYP2F2_MAX_ABS_Z:
        raise ParamError(f"hyp2f2 supports |z| <= {HYP2F2_MAX_ABS_Z}, got z={z}")
    dps = 20 + int(0.5 * abs(z))
    with mpmath.workdps(dps):
        val = mpmath.hyper([a1, a2], [b1, b2], z)
    return float(val)


def hyp2f2_many(a1: float, a2: float, b1: float, b2: float, zs) -> np.ndarray:
    """Vectorized convenience wrapper around hyp2f2."""
    zs = np.atleast_1d(np.asarray(zs, dtype=float))
    return np.array([hyp2f2(a1, a2, b1, b2, z) for z in zs])
