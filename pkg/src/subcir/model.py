"""Time-changed CIR default model.

The intensity ``X^phi`` is the CIR diffusion run on the clock of a Levy
subordinator. Everything here is built from the Laguerre eigen-system of the
background process, where subordination replaces each eigenvalue
``lambda_n`` by ``phi(lambda_n)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicSpline
from scipy.special import roots_legendre

from . import cir, subordinators
from .cir import CirParams
from .errors import BelowResolutionError, ConvergenceError, DomainError
from .subordinators import SubordinatorSpec, TraceClass

Y_MIN = 1e-6
DRIFT_TRUNCATION = 1.0
STOP_RUN = 3

_GL_X, _GL_W = roots_legendre(16)
# panel edges on [0, 1]: geometric towards both ends plus a uniform layer
_GEOM = np.logspace(-9, 0, 28)
_PANEL_EDGES = np.unique(np.concatenate(([0.0], _GEOM, 1.0 - _GEOM, np.linspace(0.0, 1.0, 17))))


@dataclass(frozen=True)
class Truncation:
    n_max: int = 200
    tol: float = 1e-10
    t_min: float = 1e-3

    def __post_init__(self):
        if self.n_max < 8 or self.n_max > cir.specfun.LAGUERRE_NMAX:
            raise DomainError(f"n_max must lie in [8, {cir.specfun.LAGUERRE_NMAX}]")
        if not (self.tol > 0 and self.t_min > 0):
            raise DomainError("tol and t_min must be positive")


@dataclass(frozen=True)
class QuadraturePolicy:
    rel_tol: float = 1e-8
    budget: int = subordinators.DEFAULT_BUDGET


def _check_beta(beta):
    if beta not in (0, 1):
        raise DomainError(f"beta must be 0 or 1, got {beta!r}")
    return int(beta)


@dataclass(frozen=True)
class SubCirModel:
    cir: CirParams
    sub: SubordinatorSpec
    truncation: Truncation = Truncation()
    quadrature: QuadraturePolicy = QuadraturePolicy()
    spectra: dict = field(init=False, repr=False, compare=False)
    sub_eigenvalues: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        n = self.truncation.n_max
        spectra = {b: cir.spectral_data(self.cir, float(b), n) for b in (0, 1)}
        phis = {b: np.asarray(subordinators.laplace_exponent(self.sub, sd.eigenvalues))
                for b, sd in spectra.items()}
        object.__setattr__(self, "spectra", spectra)
        object.__setattr__(self, "sub_eigenvalues", phis)
        verdict = subordinators.trace_class_check(self.sub, spectra[1], self.truncation.t_min)
        if verdict is not TraceClass.ADMISSIBLE:
            raise DomainError("subordinator fails the trace-class check at t_min")


def _expand(m: SubCirModel, beta: int, t: float, coeffs, x):
    """Truncated expansion; returns the sum and the number of terms used."""
    tr = m.truncation
    if t < tr.t_min:
        raise BelowResolutionError(f"expansion not evaluated for t < t_min = {tr.t_min}")
    c = np.zeros(tr.n_max, dtype=np.result_type(np.asarray(coeffs), float))
    k = min(len(coeffs), tr.n_max)
    c[:k] = np.asarray(coeffs)[:k]
    x = np.asarray(x, dtype=float)
    phi_n = cir.eigenfunction_table(m.spectra[beta], tr.n_max, x)
    decay = np.exp(-m.sub_eigenvalues[beta] * t) * c
    terms = decay.reshape((-1,) + (1,) * x.ndim) * phi_n
    partial = np.cumsum(terms, axis=0)
    small = np.abs(terms) < tr.tol * (1.0 + np.abs(partial))
    # the rule fires at the last index of the first run of STOP_RUN small terms
    span = tr.n_max - STOP_RUN + 1
    run = np.logical_and.reduce([small[j:j + span] for j in range(STOP_RUN)])
    if not np.all(run.any(axis=0)):
        raise ConvergenceError(f"expansion did not meet the stopping rule within {tr.n_max} terms")
    stop = np.argmax(run, axis=0) + STOP_RUN - 1
    val = np.take_along_axis(partial, np.expand_dims(stop, 0), axis=0)[0]
    return val, int(np.max(stop)) + 1


def _scalar(v):
    if np.ndim(v) == 0:
        return complex(v) if np.iscomplexobj(v) else float(v)
    return v


def apply_semigroup(m: SubCirModel, beta, t: float, coeffs, x):
    """``sum_n exp(-phi(lambda_n) t) f_n phi_n(x)``.

    Terms are added until three in a row fall below ``tol (1 + |partial sum|)``;
    coefficient sequences shorter than ``n_max`` are zero-padded.
    """
    return _scalar(_expand(m, _check_beta(beta), t, coeffs, x)[0])


def charfun_sub(m: SubCirModel, t: float, beta, z, x):
    """``E_x[exp(-beta int X^phi du - z X^phi_t)]`` for ``Re z >= 0``."""
    b = _check_beta(beta)
    coeffs = cir.coeff_exp_table(m.spectra[b], m.truncation.n_max, z)
    return apply_semigroup(m, b, t, coeffs, x)


def survival_probability(m: SubCirModel, horizon: float, x, d: int = 0):
    """Probability of no default by ``horizon`` given intensity state ``x``."""
    if horizon < 0:
        raise DomainError("horizon must be nonnegative")
    if d not in (0, 1):
        raise DomainError("d must be 0 or 1")
    if d == 1:
        return 0.0 if np.ndim(x) == 0 else np.zeros(np.shape(x))
    if horizon == 0:
        return 1.0 if np.ndim(x) == 0 else np.ones(np.shape(x))
    val = np.clip(np.real(charfun_sub(m, horizon, 1, 0.0, x)), 0.0, 1.0)
    return _scalar(val)


def credit_spread(m: SubCirModel, horizon: float, x):
    """``-ln Q(horizon, x) / horizon``; ``inf`` when survival underflows."""
    if horizon < m.truncation.t_min:
        raise BelowResolutionError("spread horizon below t_min")
    q = np.asarray(survival_probability(m, horizon, x))
    with np.errstate(divide="ignore"):
        out = -np.log(q) / horizon
    return _scalar(out)


def asymptotic_spread(m: SubCirModel) -> float:
    """Long-horizon spread limit ``phi(lambda_1)`` of the killed semigroup."""
    return float(m.sub_eigenvalues[1][0])


def killing_rate(m: SubCirModel, x):
    """Default intensity of the time-changed model at state ``x``.

    ``k(x) = gamma x + int (1 - E_x[exp(-int_0^s X du)]) nu(ds)``.
    """
    xs = np.asarray(x, dtype=float)
    if np.any(xs < 0):
        raise DomainError("x must be nonnegative")
    p, q = m.cir, m.quadrature
    out = np.empty(xs.shape)
    for idx, xv in np.ndenumerate(xs):
        def g(s, xv=xv):
            logA = cir.log_affine_a(p, s, 1.0)
            B = cir.affine_coefficients(p, s, 1.0)[1]
            return -math.expm1(float(logA) - float(B) * xv)

        out[idx] = m.sub.gamma_drift * xv + subordinators.levy_integrate(m.sub, g, q.rel_tol, q.budget)
    return _scalar(out)


def killing_rate_interpolator(m: SubCirModel, x_max: float, n: int = 129) -> Callable:
    """Cubic spline of ``killing_rate`` on ``[0, x_max]``, linear beyond."""
    grid = np.linspace(0.0, x_max, n)
    vals = np.asarray(killing_rate(m, grid))
    spline = CubicSpline(grid, vals)
    slope = float(spline(x_max, 1))

    def k(xq):
        xq = np.asarray(xq, dtype=float)
        return np.where(xq <= x_max, spline(np.minimum(xq, x_max)), vals[-1] + slope * (xq - x_max))

    return k


def _density_log_window(p: CirParams, x: float, x2: float, eta: float, alpha: float):
    gap = (math.sqrt(x2) - math.sqrt(x)) ** 2
    lo = math.log(2.0 * gap / (800.0 * p.sigma**2))
    hi = math.log(60.0 / eta)
    peak = math.log(2.0 * gap / (p.sigma**2 * (alpha + 1.5)))
    return lo, max(hi, lo + 1.0), peak


def levy_density_state(m: SubCirModel, beta, x: float, y: float) -> float:
    """Density of jumps of size ``y`` from state ``x``.

    ``pi(x + y) int p_m(s, x, x + y) nu(ds)`` with ``p_m`` the kernel
    symmetric with respect to the stationary law ``pi``.
    """
    b = _check_beta(beta)
    if not x > 0:
        raise DomainError("x must be positive")
    if abs(y) < Y_MIN:
        raise DomainError(f"|y| must be at least {Y_MIN}")
    x2 = x + y
    if x2 <= 0:
        return 0.0
    f = m.sub.family
    if f is None:
        return 0.0
    p, q = m.cir, m.quadrature
    lo, hi, peak = _density_log_window(p, x, x2, f.eta, f.alpha)
    log_c = math.log(f.C)

    def integrand(w):
        s = math.exp(w)
        lk = float(cir.log_transition_density_m(p, float(b), s, x, x2))
        return math.exp(lk + log_c - f.alpha * w - f.eta * s)

    pts = [v for v in (peak, peak + 2.0) if lo < v < hi]
    res = integrate.quad(integrand, lo, hi, points=pts or None, epsabs=0.0, epsrel=q.rel_tol,
                         limit=max(50, q.budget // 42), full_output=1)
    if len(res) == 4 and not res[1] <= 10 * q.rel_tol * abs(res[0]):
        raise ConvergenceError(f"Levy density integral did not converge: {res[3]}")
    return float(cir.stationary_density(p, x2)) * res[0]


def _tail_nodes(lo: float, hi: float):
    """Composite Gauss-Legendre nodes on ``[lo, hi]``, panels graded at both ends."""
    edges = lo + (hi - lo) * _PANEL_EDGES
    a, b = edges[:-1, None], edges[1:, None]
    nodes = 0.5 * (b - a) * _GL_X + 0.5 * (a + b)
    weights = 0.5 * (b - a) * _GL_W
    return nodes.ravel(), weights.ravel()


def _moment_bounds(p: CirParams, s: float, x: float):
    e = math.exp(-p.kappa * s)
    mean = p.theta + (x - p.theta) * e
    var = x * p.sigma**2 / p.kappa * (e - e * e) + p.theta * p.sigma**2 / (2 * p.kappa) * (1 - e) ** 2
    return mean, var


def _weighted_tail(p: CirParams, beta: float, s: float, x: float, lo: float, hi: float):
    """``int_lo^hi (z - x) p^beta(s, x, z) dz`` on a fixed composite rule."""
    if hi <= lo:
        return 0.0
    z, w = _tail_nodes(lo, hi)
    z = np.maximum(z, 1e-300)
    logp = cir.log_transition_density_m(p, beta, s, x, z) + np.log(cir.stationary_density(p, z))
    return float(np.sum(w * (z - x) * np.exp(logp)))


def inner_truncated_moment(p: CirParams, beta: float, s: float, x: float, level: float) -> float:
    """``E_x[exp(-beta int_0^s X du) (X_s - x) 1{|X_s - x| <= level}]``."""
    full = float(cir.discounted_first_moment(p, s, beta, x))
    mean, var = _moment_bounds(p, s, x)
    upper_lo = x + level
    upper_hi = max(upper_lo, mean) + 40.0 * math.sqrt(var) + 40.0 / p.a
    up = _weighted_tail(p, beta, s, x, upper_lo, upper_hi)
    down = _weighted_tail(p, beta, s, x, 0.0, x - level) if x > level else 0.0
    return full - up - down


def truncated_jump_moment(m: SubCirModel, beta, x: float, level: float) -> float:
    """``int_{|y| <= level} y pi^{beta,phi}(x, y) dy``, evaluated by swapping the order
    of integration: ``int nu(ds) E_x[e^{-beta int X} (X_s - x) 1{|X_s - x| <= level}]``.
    """
    b = _check_beta(beta)
    if not x > 0:
        raise DomainError("x must be positive")
    if not level > 0:
        raise DomainError("level must be positive")
    q = m.quadrature
    return subordinators.levy_integrate(
        m.sub, lambda s: inner_truncated_moment(m.cir, float(b), s, x, level), q.rel_tol, q.budget)


def drift_sub(m: SubCirModel, beta, x: float) -> float:
    """Drift with respect to the truncation ``y 1{|y| <= 1}``."""
    p = m.cir
    local = m.sub.gamma_drift * p.kappa * (p.theta - x)
    if m.sub.family is None:
        return local
    return local + truncated_jump_moment(m, beta, x, DRIFT_TRUNCATION)


@dataclass(frozen=True)
class LocalCharacteristics:
    x: float
    killing_rate: float
    drift: float
    levy_density: Callable[[float], float]


def local_characteristics(m: SubCirModel, x: float, beta=0) -> LocalCharacteristics:
    b = _check_beta(beta)
    return LocalCharacteristics(
        x=x,
        killing_rate=float(killing_rate(m, x)),
        drift=drift_sub(m, b, x),
        levy_density=lambda y: levy_density_state(m, b, x, y),
    )
