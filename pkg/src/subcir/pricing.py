"""Defaultable claims under the time-changed CIR model."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np
from scipy import integrate

from . import cir, model
from .errors import BelowResolutionError, ConvergenceError, DomainError
from .model import SubCirModel

Payoff = Union[float, Callable]


class RecoveryTiming(str, enum.Enum):
    AT_MATURITY = "at_maturity"
    AT_DEFAULT = "at_default"


@dataclass(frozen=True)
class Claim:
    maturity: float
    rate: float = 0.0
    promised: Payoff = 1.0
    recovery: Payoff = 0.0
    timing: RecoveryTiming = RecoveryTiming.AT_MATURITY
    recovery_at_default: Optional[Callable] = None

    def __post_init__(self):
        if not self.maturity > 0:
            raise DomainError("maturity must be positive")
        if not self.rate >= 0:
            raise DomainError("rate must be nonnegative")
        if not callable(self.recovery) and not 0.0 <= self.recovery <= 1.0:
            raise DomainError("constant recovery must lie in [0, 1]")
        if (self.timing is RecoveryTiming.AT_DEFAULT) != (self.recovery_at_default is not None):
            raise DomainError("recovery_at_default is required for, and only for, AT_DEFAULT timing")


def payoff_coefficients(m: SubCirModel, beta, f: Payoff, n: Optional[int] = None) -> np.ndarray:
    """``(f, phi_n)`` in ``L^2(pi)`` for ``n = 1..N``.

    Constants use the closed-form coefficients of ``e^{-0 x}``. Functions go
    through a generalized Gauss-Laguerre rule with ``2N + 16`` nodes whose
    weight ``x^(b-1) e^{-(kappa + rho) x / sigma^2}`` absorbs both the
    stationary density and the exponential factor of ``phi_n``.
    """
    b = model._check_beta(beta)
    sd = m.spectra[b]
    n = m.truncation.n_max if n is None else n
    if not 1 <= n <= sd.nmax:
        raise DomainError(f"N must lie in [1, {sd.nmax}]")
    if not callable(f):
        return float(f) * cir.coeff_exp_table(sd, n, 0.0)
    p = m.cir
    s2 = p.sigma**2
    try:
        x, w = cir.stationary_quadrature(p, 2 * n + 16, (p.kappa + sd.rho) / s2)
    except (ValueError, np.linalg.LinAlgError) as exc:
        raise ConvergenceError(f"quadrature node construction failed: {exc}") from exc
    if x.size == 0 or not np.all(np.isfinite(w)):
        raise ConvergenceError("degenerate quadrature rule")
    fx = np.asarray(f(x), dtype=float) * np.ones_like(x)
    if not np.all(np.isfinite(fx)) or not math.isfinite(float(np.sum(w * fx * fx * np.exp((sd.rho - p.kappa) * x / s2)))):
        raise DomainError("payoff is not square-integrable against the stationary law")
    lag = cir.specfun.laguerre_table(n, p.b - 1.0, 2.0 * sd.rho * x / s2)
    return np.exp(sd.log_norms[:n]) * (lag @ (w * fx))


def _difference(f0: Payoff, f1: Payoff) -> Payoff:
    if not callable(f0) and not callable(f1):
        return float(f0) - float(f1)
    g0 = f0 if callable(f0) else (lambda x, c=float(f0): np.full(np.shape(x), c))
    g1 = f1 if callable(f1) else (lambda x, c=float(f1): np.full(np.shape(x), c))
    return lambda x: np.asarray(g0(x)) - np.asarray(g1(x))


def _recovery_at_default(m: SubCirModel, c: Claim, tau: float, x: float) -> float:
    """``int_0^tau e^{-r u} P^{1,phi}_u (R k)(x) du``.

    On ``[t_min, tau]`` the integrand is the expansion with fixed
    coefficients of ``R k``; on ``[0, t_min]`` it is replaced by its value
    at ``u = 0``, ``R(x) k(x)``.
    """
    t_min = m.truncation.t_min
    rec = c.recovery_at_default

    def rk(z):
        return np.asarray(rec(z), dtype=float) * np.asarray(model.killing_rate(m, z))

    coeffs = payoff_coefficients(m, 1, rk)
    head = t_min * float(rk(np.asarray([x]))[0])
    if tau <= t_min:
        return head * tau / t_min

    def integrand(u):
        return math.exp(-c.rate * u) * model.apply_semigroup(m, 1, u, coeffs, x)

    q = m.quadrature
    val, err = integrate.quad(integrand, t_min, tau, epsabs=1e-12, epsrel=q.rel_tol,
                              limit=max(50, q.budget // 42))
    return head + val


def price_claim(m: SubCirModel, c: Claim, t: float, x: float, d: int) -> float:
    """Value at time ``t`` of claim ``c`` given intensity state ``x`` and default
    indicator ``d``."""
    if d not in (0, 1):
        raise DomainError("d must be 0 or 1")
    tau = c.maturity - t
    if tau < m.truncation.t_min:
        raise BelowResolutionError(f"time to maturity {tau} below t_min")
    disc = math.exp(-c.rate * tau)
    if callable(c.recovery):
        recovered = model.apply_semigroup(m, 0, tau, payoff_coefficients(m, 0, c.recovery), x)
    else:
        recovered = float(c.recovery)
    value = recovered
    if d == 0:
        diff = _difference(c.promised, c.recovery)
        value += model.apply_semigroup(m, 1, tau, payoff_coefficients(m, 1, diff), x)
    value *= disc
    if c.timing is RecoveryTiming.AT_DEFAULT and d == 0:
        value += _recovery_at_default(m, c, tau, x)
    return float(value)


def zcb_defaultable(m: SubCirModel, t: float, T: float, x: float, d: int, r: float, R: float) -> float:
    """Defaultable zero-coupon bond with recovery ``R`` of par paid at maturity."""
    return price_claim(m, Claim(maturity=T, rate=r, promised=1.0, recovery=R), t, x, d)


def riskfree_bond_subcir(m: SubCirModel, t: float, T: float, x: float) -> float:
    """Zero-coupon bond when the time-changed CIR process is the short rate."""
    if T == t:
        return 1.0
    if T - t < m.truncation.t_min:
        raise BelowResolutionError("time to maturity below t_min")
    return model.survival_probability(m, T - t, x, 0)
