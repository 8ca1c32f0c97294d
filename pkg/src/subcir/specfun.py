"""Scalar special functions: log-gamma, Pochhammer symbol, generalized
Laguerre polynomials and the modified Bessel function of the first kind.

Functions accept floats or numpy arrays where noted. Gamma-function ratios
are formed in log space and exponentiated once.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaln

from .errors import DomainError

LAGUERRE_NMAX = 512
BESSEL_SWITCH = 20.0
_LOG_MAX = math.log(np.finfo(float).max)


def log_gamma(x: float) -> float:
    """Natural log of the gamma function for ``x > 0``."""
    if not x > 0:
        raise DomainError(f"log_gamma requires x > 0, got {x!r}")
    return math.lgamma(x)


def log_pochhammer(a: float, n: int) -> float:
    """``ln (a)_n`` for ``a > 0`` and integer ``n >= 0``."""
    if not a > 0:
        raise DomainError(f"pochhammer requires a > 0, got {a!r}")
    if n < 0:
        raise DomainError(f"pochhammer requires n >= 0, got {n!r}")
    if n == 0:
        return 0.0
    if n <= 64:
        # short products: summed logs beat a difference of two large lgammas
        return math.fsum(math.log(a + k) for k in range(n))
    return math.lgamma(a + n) - math.lgamma(a)


def pochhammer(a: float, n: int) -> float:
    """Rising factorial ``(a)_n = Gamma(a + n) / Gamma(a)``.

    Raises:
        OverflowError: if the result is not representable as a double.
    """
    lp = log_pochhammer(a, n)
    if lp > _LOG_MAX:
        raise OverflowError(f"(a)_n overflows for a={a}, n={n}")
    return math.exp(lp)


def laguerre_table(nmax: int, nu: float, x) -> np.ndarray:
    """All generalized Laguerre polynomials ``L_k^nu(x)`` for ``k < nmax``.

    Uses the forward three-term recurrence. Returns an array of shape
    ``(nmax,) + np.shape(x)``.
    """
    if nmax < 1:
        raise DomainError("nmax must be >= 1")
    if nmax > LAGUERRE_NMAX + 1:
        raise DomainError(f"degree cap is {LAGUERRE_NMAX}")
    if not nu > -1:
        raise DomainError(f"Laguerre order must exceed -1, got {nu!r}")
    x = np.asarray(x, dtype=float)
    out = np.empty((nmax,) + x.shape)
    out[0] = 1.0
    if nmax > 1:
        out[1] = 1.0 + nu - x
    for k in range(2, nmax):
        out[k] = ((2 * k - 1 + nu - x) * out[k - 1] - (k - 1 + nu) * out[k - 2]) / k
    return out


def laguerre(n: int, nu: float, x):
    """Generalized Laguerre polynomial ``L_n^nu(x)``."""
    if n < 0:
        raise DomainError("degree must be nonnegative")
    val = laguerre_table(n + 1, nu, x)[n]
    return float(val) if val.ndim == 0 else val


def _log_bessel_series(nu: float, x: np.ndarray) -> np.ndarray:
    """``ln I_nu(x)`` from the power series; intended for ``0 < x <= 20``."""
    q = 0.25 * x * x
    term = np.ones_like(x)
    total = np.ones_like(x)
    for k in range(1, 400):
        term = term * q / (k * (k + nu))
        total = total + term
        if np.all(term <= 1e-17 * total):
            break
    return nu * np.log(0.5 * x) - math.lgamma(nu + 1.0) + np.log(total)


def _log_bessel_logsum(nu: float, x: float) -> float:
    """``ln I_nu(x)`` by summing the positive series in log space (any x > 0)."""
    half = 0.5 * x
    kpeak = max(0.0, 0.5 * (math.sqrt(nu * nu + x * x) - nu))
    kmax = int(kpeak + 15.0 * math.sqrt(kpeak + 1.0) + 60)
    k = np.arange(kmax + 1, dtype=float)
    logs = (2 * k + nu) * math.log(half) - gammaln(k + 1) - gammaln(k + nu + 1)
    m = logs.max()
    return float(m + math.log(np.exp(logs - m).sum()))


def _log_bessel_scaled_hankel(nu: float, x: np.ndarray):
    """Large-argument expansion of ``ln(e^-x I_nu(x))``.

    Returns the value and a mask of entries where the expansion reached
    double precision before its terms started to grow.
    """
    mu = 4.0 * nu * nu
    term = np.ones_like(x)
    total = np.ones_like(x)
    done = np.zeros(x.shape, dtype=bool)
    stop = np.zeros(x.shape, dtype=bool)
    for k in range(1, 120):
        nxt = -term * (mu - (2 * k - 1) ** 2) / (8.0 * k * x)
        active = ~stop
        small = active & (np.abs(nxt) <= 1e-17 * np.abs(total))
        grows = active & (np.abs(nxt) > np.abs(term))
        take = active & ~grows
        total = np.where(take, total + nxt, total)
        term = np.where(take, nxt, term)
        done |= small
        stop |= small | grows
        if stop.all():
            break
    with np.errstate(invalid="ignore", divide="ignore"):
        val = np.log(total) - 0.5 * np.log(2.0 * np.pi * x)
    return val, done & (total > 0)


def log_bessel_ive(nu: float, x):
    """``ln(e^{-x} I_nu(x))`` for ``x >= 0``; ``-inf`` where ``I_nu(x) = 0``."""
    if not nu > -1:
        raise DomainError(f"Bessel order must exceed -1, got {nu!r}")
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise DomainError("Bessel argument must be nonnegative")
    out = np.empty(x.shape)
    zero = x == 0
    if np.any(zero):
        out[zero] = 0.0 if nu == 0 else (-np.inf if nu > 0 else np.inf)
    small = (~zero) & (x <= BESSEL_SWITCH)
    if np.any(small):
        out[small] = _log_bessel_series(nu, x[small]) - x[small]
    large = x > BESSEL_SWITCH
    if np.any(large):
        xl = x[large]
        val, ok = _log_bessel_scaled_hankel(nu, xl)
        for i in np.flatnonzero(~ok):
            val[i] = _log_bessel_logsum(nu, float(xl[i])) - xl[i]
        out[large] = val
    return float(out) if out.ndim == 0 else out


def bessel_ive(nu: float, x):
    """Exponentially scaled modified Bessel function ``e^{-x} I_nu(x)``."""
    lv = log_bessel_ive(nu, x)
    return np.exp(lv) if isinstance(lv, np.ndarray) else math.exp(lv)


def bessel_i(nu: float, x):
    """Modified Bessel function of the first kind ``I_nu(x)``.

    Raises:
        OverflowError: where the unscaled value is not representable; use
            :func:`bessel_ive` or :func:`log_bessel_ive` there.
    """
    lv = np.asarray(log_bessel_ive(nu, x)) + np.asarray(x, dtype=float)
    if np.any(lv > _LOG_MAX):
        raise OverflowError("I_nu(x) overflows; use the scaled entry point")
    val = np.exp(lv)
    return float(val) if val.ndim == 0 else val
