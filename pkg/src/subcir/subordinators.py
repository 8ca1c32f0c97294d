"""Levy subordinators with drift ``gamma`` and tempered-stable Levy measure
``nu(ds) = C s^(-alpha-1) e^(-eta s) ds``.

Exact increment samplers exist for ``alpha = 1/2`` (inverse Gaussian),
``alpha = 0`` (gamma) and ``alpha = -1`` (compound Poisson with exponential
jumps). The inverse Gaussian parameters follow from matching Laplace
transforms::

    E exp(-s J) = exp(-dt * 2 C sqrt(pi) (sqrt(s + eta) - sqrt(eta)))

    IG(mean m, shape l):  E exp(-s J) = exp((l / m)(1 - sqrt(1 + 2 m^2 s / l)))

Equating ``2 m^2 / l = 1 / eta`` and ``l / m = 2 C sqrt(pi eta) dt`` gives
``m = C sqrt(pi / eta) dt`` and ``l = 2 pi C^2 dt^2``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from .errors import ConvergenceError, DomainError

SPLIT_POINT = 1.0
DEFAULT_BUDGET = 1_000_000
TRACE_NMAX = 100_000
TRACE_INCREMENT = 1e-15


class TraceClass(str, enum.Enum):
    ADMISSIBLE = "admissible"
    INADMISSIBLE = "inadmissible"


@dataclass(frozen=True)
class TemperedStable:
    C: float
    alpha: float
    eta: float

    def __post_init__(self):
        if not (self.C > 0 and math.isfinite(self.C)):
            raise DomainError(f"C must be positive, got {self.C!r}")
        if not (self.eta > 0 and math.isfinite(self.eta)):
            raise DomainError(f"eta must be positive, got {self.eta!r}")
        if not self.alpha < 1:
            raise DomainError(f"alpha must be < 1, got {self.alpha!r}")


@dataclass(frozen=True)
class SubordinatorSpec:
    """Drift ``gamma_drift >= 0`` plus an optional tempered-stable jump part."""

    gamma_drift: float = 0.0
    family: Optional[TemperedStable] = None

    def __post_init__(self):
        if not (self.gamma_drift >= 0 and math.isfinite(self.gamma_drift)):
            raise DomainError(f"gamma_drift must be >= 0, got {self.gamma_drift!r}")
        if self.family is None and self.gamma_drift <= 0:
            raise DomainError("a subordinator without jumps needs a positive drift")

    @classmethod
    def drift_only(cls, gamma: float = 1.0) -> "SubordinatorSpec":
        return cls(gamma, None)

    @classmethod
    def tempered_stable(cls, C: float, alpha: float, eta: float, gamma: float = 0.0):
        return cls(gamma, TemperedStable(C, alpha, eta))

    @property
    def is_trivial(self) -> bool:
        """Pure unit drift: the identity clock."""
        return self.family is None and self.gamma_drift == 1.0


def laplace_exponent(s: SubordinatorSpec, lam):
    """``phi(lam)`` with ``E exp(-lam T_t) = exp(-t phi(lam))``; vectorized."""
    lam = np.asarray(lam, dtype=float)
    if np.any(lam < 0):
        raise DomainError("the Laplace exponent is evaluated for lam >= 0")
    out = s.gamma_drift * lam
    f = s.family
    if f is not None:
        if f.alpha == 0:
            out = out + f.C * np.log1p(lam / f.eta)
        else:
            # (lam + eta)^alpha - eta^alpha without cancellation at small lam
            diff = f.eta**f.alpha * np.expm1(f.alpha * np.log1p(lam / f.eta))
            out = out - f.C * math.gamma(-f.alpha) * diff
    return float(out) if out.ndim == 0 else out


def mean_rate(s: SubordinatorSpec) -> float:
    """``phi'(0) = E T_1``."""
    f = s.family
    extra = 0.0 if f is None else f.C * math.gamma(1.0 - f.alpha) * f.eta ** (f.alpha - 1.0)
    return s.gamma_drift + extra


def levy_density(s: SubordinatorSpec, u):
    """Density of ``nu`` at ``u > 0``."""
    f = s.family
    if f is None:
        raise DomainError("a pure-drift subordinator has no Levy density")
    u = np.asarray(u, dtype=float)
    if np.any(u <= 0):
        raise DomainError("the Levy density is defined for u > 0")
    out = f.C * u ** (-f.alpha - 1.0) * np.exp(-f.eta * u)
    return float(out) if out.ndim == 0 else out


def _quad(fn, lo, hi, rel_tol, limit):
    res = integrate.quad(fn, lo, hi, epsabs=0.0, epsrel=rel_tol, limit=limit, full_output=1)
    val, err = res[0], res[1]
    if len(res) == 4 and not err <= 10 * rel_tol * abs(val):
        raise ConvergenceError(f"quadrature on [{lo}, {hi}] did not converge: {res[3]}")
    return val, res[2]["neval"]


def levy_integrate(s: SubordinatorSpec, g: Callable[[float], float], rel_tol: float = 1e-8,
                   budget: int = DEFAULT_BUDGET) -> float:
    """``int_0^inf g(u) nu(du)`` for ``g(u) = O(u)`` at 0 and bounded at infinity.

    On ``(0, 1]`` the substitution ``u = v^(1/(1-alpha))`` turns the
    integrand into ``C/(1-alpha) g(u)/u e^(-eta u)``, which is bounded.
    """
    if not 1e-12 <= rel_tol <= 1e-4:
        raise DomainError("rel_tol must lie in [1e-12, 1e-4]")
    f = s.family
    if f is None:
        return 0.0
    p = 1.0 / (1.0 - f.alpha)
    scale = f.C * p

    def head(v):
        if v <= 0.0:
            return 0.0
        u = v**p
        return scale * g(u) / u * math.exp(-f.eta * u)

    def tail(u):
        return g(u) * f.C * u ** (-f.alpha - 1.0) * math.exp(-f.eta * u)

    # each adaptive subinterval costs 21 evaluations
    limit = max(50, budget // 42)
    v1, n1 = _quad(head, 0.0, SPLIT_POINT, rel_tol, limit)
    v2, n2 = _quad(tail, SPLIT_POINT, np.inf, rel_tol, limit)
    if n1 + n2 > budget:
        raise ConvergenceError("Levy integral exceeded its evaluation budget")
    return v1 + v2


def sample_increment(s: SubordinatorSpec, dt: float, rng: np.random.Generator, size=None):
    """Exact draw(s) of ``T_{t+dt} - T_t``."""
    if not dt > 0:
        raise DomainError("dt must be positive")
    drift = s.gamma_drift * dt
    f = s.family
    if f is None:
        return drift if size is None else np.full(size, drift)
    if f.alpha == 0.5:
        mean = f.C * math.sqrt(math.pi / f.eta) * dt
        shape = 2.0 * math.pi * f.C**2 * dt**2
        jumps = rng.wald(mean, shape, size)
    elif f.alpha == 0.0:
        jumps = rng.gamma(f.C * dt, 1.0 / f.eta, size)
    elif f.alpha == -1.0:
        counts = rng.poisson(f.C / f.eta * dt, size)
        # a sum of k Exp(eta) jumps is Gamma(k, 1/eta); k = 0 gives 0
        safe = np.maximum(counts, 1)
        jumps = np.where(counts > 0, rng.gamma(safe, 1.0 / f.eta), 0.0)
        if size is None:
            jumps = float(jumps)
    else:
        raise DomainError(f"no exact sampler for alpha={f.alpha}; supported: 0.5, 0, -1")
    return drift + jumps


def trace_class_check(s: SubordinatorSpec, sd, t: float) -> TraceClass:
    """Does ``sum_n exp(-phi(lambda_n) t)`` converge?

    First the partial sums are run up to ``TRACE_NMAX`` terms; if a term
    drops below ``TRACE_INCREMENT`` the series is accepted. Otherwise the
    decision falls back to the growth class of ``phi`` along the linearly
    growing eigenvalues: linear or power growth always converges, the pure
    gamma case ``C ln(1 + lam/eta)`` converges iff ``C t > 1``, and a bounded
    exponent (driftless compound Poisson) never does.
    """
    if not t > 0:
        raise DomainError("t must be positive")
    n = np.arange(TRACE_NMAX, dtype=float)
    lam = n * sd.rho + 0.5 * sd.params.b * (sd.rho - sd.params.kappa)
    terms = np.exp(-laplace_exponent(s, lam) * t)
    if np.any(terms < TRACE_INCREMENT):
        return TraceClass.ADMISSIBLE
    f = s.family
    if s.gamma_drift > 0 or (f is not None and 0 < f.alpha < 1):
        return TraceClass.ADMISSIBLE
    if f is not None and f.alpha == 0:
        return TraceClass.ADMISSIBLE if f.C * t > 1 else TraceClass.INADMISSIBLE
    return TraceClass.INADMISSIBLE
