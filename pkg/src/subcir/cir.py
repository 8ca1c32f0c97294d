"""The background CIR diffusion ``dX = kappa (theta - X) dt + sigma sqrt(X) dB``.

Holds the parameter object, Feller boundary classification, the gamma
stationary law, the symmetric transition kernel with respect to that law,
the affine (Riccati) closed form of the discounted Laplace transform and the
Laguerre eigen-system of the Feynman-Kac semigroup killed at rate ``beta x``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal

from . import specfun
from .errors import BelowResolutionError, DomainError

DENSITY_T_MIN = 1e-4


class Boundary(str, enum.Enum):
    ENTRANCE = "entrance"
    REFLECTING = "reflecting"


@dataclass(frozen=True)
class CirParams:
    """Mean-reversion rate ``kappa``, long-run mean ``theta``, volatility ``sigma``."""

    kappa: float
    theta: float
    sigma: float

    def __post_init__(self):
        for name in ("kappa", "theta", "sigma"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise DomainError(f"CirParams.{name} must be a positive finite number, got {v!r}")

    @property
    def a(self) -> float:
        """Rate of the gamma stationary law, ``2 kappa / sigma^2``."""
        return 2.0 * self.kappa / self.sigma**2

    @property
    def b(self) -> float:
        """Shape of the gamma stationary law, ``2 kappa theta / sigma^2``."""
        return 2.0 * self.kappa * self.theta / self.sigma**2


def classify_boundary(p: CirParams) -> Boundary:
    """Entrance when the Feller condition ``2 kappa theta >= sigma^2`` holds."""
    return Boundary.ENTRANCE if 2.0 * p.kappa * p.theta >= p.sigma**2 else Boundary.REFLECTING


def stationary_density(p: CirParams, x):
    """Gamma density ``a^b x^(b-1) e^(-a x) / Gamma(b)``.

    At ``x = 0`` the limit is returned: 0 for ``b > 1``, ``a`` for ``b = 1``
    and ``inf`` for ``b < 1``.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise DomainError("stationary density is defined for x >= 0")
    a, b = p.a, p.b
    with np.errstate(divide="ignore", invalid="ignore"):
        logpdf = b * math.log(a) + (b - 1.0) * np.log(x) - a * x - math.lgamma(b)
    out = np.where(np.isinf(x), 0.0, np.exp(np.where(np.isinf(x), 0.0, logpdf)))
    if b == 1.0:
        out = np.where(x == 0, a, out)
    return float(out) if out.ndim == 0 else out


def rho(p, beta: float) -> float:
    """``sqrt(kappa^2 + 2 beta sigma^2)``."""
    if beta < 0:
        raise DomainError("beta must be nonnegative")
    return math.sqrt(p.kappa**2 + 2.0 * beta * p.sigma**2)


@dataclass(frozen=True)
class SpectralData:
    """Eigen-system of the CIR semigroup killed at rate ``beta x``.

    Eigenvalues and log normalization constants are tabulated for
    ``n = 1..nmax`` at construction.
    """

    params: CirParams
    beta: float
    nmax: int = specfun.LAGUERRE_NMAX
    rho: float = field(init=False)
    eigenvalues: np.ndarray = field(init=False, repr=False)
    log_norms: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.beta < 0:
            raise DomainError("beta must be nonnegative")
        r = rho(self.params, self.beta)
        n = np.arange(1, self.nmax + 1)
        b = self.params.b
        lam = (n - 1) * r + 0.5 * b * (r - self.params.kappa)
        logn = np.array([
            0.5 * (math.lgamma(k) - specfun.log_pochhammer(b, k - 1)) for k in n
        ]) + 0.5 * b * math.log(r / self.params.kappa)
        object.__setattr__(self, "rho", r)
        object.__setattr__(self, "eigenvalues", lam)
        object.__setattr__(self, "log_norms", logn)

    @property
    def principal(self) -> float:
        return float(self.eigenvalues[0])

    def norm(self, n: int) -> float:
        return math.exp(self.log_norms[n - 1])


def spectral_data(p: CirParams, beta: float, nmax: int = specfun.LAGUERRE_NMAX) -> SpectralData:
    return SpectralData(p, beta, nmax)


def eigenvalue(sd: SpectralData, n: int) -> float:
    """``lambda_n = (n - 1) rho + (b / 2)(rho - kappa)``."""
    if n < 1:
        raise DomainError("eigen-index starts at 1")
    return (n - 1) * sd.rho + 0.5 * sd.params.b * (sd.rho - sd.params.kappa)


def eigenfunction_table(sd: SpectralData, nmax: int, x) -> np.ndarray:
    """Values ``phi_n(x)`` for ``n = 1..nmax``; shape ``(nmax,) + shape(x)``."""
    if nmax > sd.nmax:
        raise DomainError(f"requested {nmax} eigenfunctions, table holds {sd.nmax}")
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise DomainError("eigenfunctions are defined for x >= 0")
    p = sd.params
    s2 = p.sigma**2
    lag = specfun.laguerre_table(nmax, p.b - 1.0, 2.0 * sd.rho * x / s2)
    scale = np.exp((p.kappa - sd.rho) * x / s2)
    with np.errstate(over="raise"):
        try:
            out = np.exp(sd.log_norms[:nmax]).reshape((-1,) + (1,) * x.ndim) * scale * lag
        except FloatingPointError as exc:
            raise OverflowError("eigenfunction values exceed double range") from exc
    return out


def eigenfunction(sd: SpectralData, n: int, x):
    """``phi_n(x) = N_n exp((kappa - rho) x / sigma^2) L_{n-1}^{b-1}(2 rho x / sigma^2)``."""
    if n < 1:
        raise DomainError("eigen-index starts at 1")
    val = eigenfunction_table(sd, n, x)[n - 1]
    return float(val) if val.ndim == 0 else val


def coeff_exp_table(sd: SpectralData, nmax: int, z=0.0) -> np.ndarray:
    """Coefficients of ``e^{-z x}`` in the eigenbasis, ``n = 1..nmax``.

    The general-``n`` closed form is used for every ``n`` including 1.
    """
    if nmax > sd.nmax:
        raise DomainError(f"requested {nmax} coefficients, table holds {sd.nmax}")
    if np.real(z) < 0:
        raise DomainError("Re z must be nonnegative")
    p = sd.params
    s2z = p.sigma**2 * z
    denom = p.kappa + sd.rho + s2z
    ratio = (p.kappa - sd.rho + s2z) / denom
    n = np.arange(nmax)
    lead = (2.0 * sd.rho / denom) ** p.b
    with np.errstate(divide="ignore", invalid="ignore"):
        powers = np.where(n == 0, 1.0, ratio ** np.maximum(n, 1))
    return np.exp(-sd.log_norms[:nmax]) * powers * lead


def coeff_exp(sd: SpectralData, n: int, z=0.0):
    """``f_n(z) = (e^{-z .}, phi_n)`` in closed form."""
    if n < 1:
        raise DomainError("eigen-index starts at 1")
    val = coeff_exp_table(sd, n, z)[n - 1]
    return complex(val) if np.iscomplexobj(val) else float(val)


def _q(r, t):
    """``1 - e^{-r t}`` without cancellation."""
    return -np.expm1(-r * t)


def log_affine_a(p: CirParams, t, beta: float, z=0.0):
    """``ln A(t, beta, z)`` of the affine closed form (complex if ``z`` is)."""
    r = rho(p, beta)
    q = _q(r, np.asarray(t, dtype=float))
    # denominator / (2 rho) = 1 + q (kappa - rho + sigma^2 z) / (2 rho)
    logden = np.log1p(q * (p.kappa - r + p.sigma**2 * z) / (2.0 * r))
    return p.b * (0.5 * (p.kappa - r) * np.asarray(t, dtype=float) - logden)


def affine_coefficients(p: CirParams, t, beta: float, z=0.0):
    """``(A, B)`` with ``E_x[exp(-beta int X du - z X_t)] = A exp(-B x)``.

    Written in terms of ``e^{-rho t}`` so that large ``t`` does not overflow.
    Vectorized over ``t`` and ``z``.
    """
    if beta < 0:
        raise DomainError("beta must be nonnegative")
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise DomainError("t must be nonnegative")
    if np.any(np.real(z) < 0):
        raise DomainError("Re z must be nonnegative")
    r = rho(p, beta)
    e = np.exp(-r * t)
    q = _q(r, t)
    den = 2.0 * r * e + (r + p.kappa + z * p.sigma**2) * q
    num_b = 2.0 * beta * q + z * (r - p.kappa) + z * (r + p.kappa) * e
    A = np.exp(log_affine_a(p, t, beta, z))
    return A, num_b / den


def charfun_affine(p: CirParams, t, beta: float, z, x):
    """``Psi_t(x, beta, z) = A(t, beta, z) exp(-B(t, beta, z) x)``."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise DomainError("x must be nonnegative")
    A, B = affine_coefficients(p, t, beta, z)
    out = A * np.exp(-B * x)
    if np.ndim(out) == 0:
        return complex(out) if np.iscomplexobj(out) else float(out)
    return out


def discounted_first_moment(p: CirParams, t, beta: float, x):
    """``E_x[exp(-beta int_0^t X du) (X_t - x)]``, free of cancellation at small t."""
    t = np.asarray(t, dtype=float)
    r = rho(p, beta)
    q = _q(r, t)
    den = 2.0 * r - (r - p.kappa) * q
    surv = np.exp(log_affine_a(p, t, beta) - 2.0 * beta * q / den * x)
    dB_minus_1 = -2.0 * q * (p.kappa * den + beta * p.sigma**2 * q) / den**2
    return surv * (p.b * p.sigma**2 * q / den + x * dB_minus_1)


def _log_sinh(u):
    u = np.asarray(u, dtype=float)
    big = u > 20.0
    safe = np.where(big, 1.0, u)
    return np.where(big, u - math.log(2.0) + np.log1p(-np.exp(-2.0 * np.where(big, u, 20.0))),
                    np.log(np.sinh(safe)))


def log_transition_density_m(p: CirParams, beta: float, t, x, y):
    """Log of the symmetric kernel ``p_m^beta(t, x, y)`` w.r.t. ``pi(y) dy``.

    No lower floor on ``t``: the Gaussian-in-``1/t`` factor is assembled
    without cancellation, so callers integrating over ``t`` may go close to 0.
    Broadcasts over ``t``, ``x`` and ``y`` (all positive).
    """
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    r = rho(p, beta)
    s2 = p.sigma**2
    a, b = p.a, p.b
    lam1 = 0.5 * b * (r - p.kappa)
    u = 0.5 * r * t
    lsh = _log_sinh(u)
    sxy = np.sqrt(x * y)
    inv_sinh = np.exp(-lsh)
    bessel_arg = 2.0 * r * sxy * inv_sinh / s2
    log_ive = specfun.log_bessel_ive(b - 1.0, bessel_arg)
    gauss = -r * ((np.sqrt(x) - np.sqrt(y)) ** 2 * inv_sinh + (x + y) * np.tanh(0.5 * u)) / s2
    return (math.log(r) + math.lgamma(b) + np.log(sxy) - math.log(s2) - lsh
            + b * (u - math.log(a) - np.log(sxy))
            + log_ive + gauss + (x + y) * p.kappa / s2 - lam1 * t)


def transition_density_m(p: CirParams, beta: float, t, x, y):
    """Symmetric transition kernel ``p_m^beta(t, x, y)`` with respect to ``pi(y) dy``.

    Raises:
        BelowResolutionError: for ``t`` below ``DENSITY_T_MIN``.
    """
    if np.any(np.asarray(t) < DENSITY_T_MIN):
        raise BelowResolutionError(f"density not evaluated for t < {DENSITY_T_MIN}")
    if np.any(np.asarray(x) <= 0) or np.any(np.asarray(y) <= 0):
        raise DomainError("x and y must be positive")
    out = np.exp(log_transition_density_m(p, beta, t, x, y))
    return float(out) if np.ndim(out) == 0 else out


def _gamma_rule(shape: float, m: int):
    """Nodes and log probability weights of the ``m``-point Gauss rule for Gamma(shape, 1).

    Nodes are eigenvalues of the Jacobi matrix. Each weight is
    ``1 / sum_k p_k(x)^2`` over the orthonormal polynomials, accumulated with
    running rescaling so that large nodes neither overflow nor lose their
    relative accuracy.
    """
    if m < 1:
        raise DomainError("node count must be positive")
    k = np.arange(m, dtype=float)
    diag = 2.0 * k + shape
    off = np.sqrt(k[1:] * (k[1:] + shape - 1.0))
    x = eigh_tridiagonal(diag, off, eigvals_only=True)
    prev = np.zeros_like(x)
    cur = np.ones_like(x)
    log_scale = np.zeros_like(x)
    acc = np.ones_like(x)
    for j in range(1, m):
        nxt = ((x - diag[j - 1]) * cur - (off[j - 2] if j > 1 else 0.0) * prev) / off[j - 1]
        prev, cur = cur, nxt
        acc = acc + cur * cur
        big = acc > 1e100
        if np.any(big):
            f = np.where(big, 1e-50, 1.0)
            prev, cur, acc = prev * f, cur * f, acc * f * f
            log_scale = log_scale + np.where(big, 100.0 * math.log(10.0), 0.0)
    return x, -np.log(acc) - log_scale


def gamma_quadrature(shape: float, rate: float, m: int):
    """Gauss rule for ``int_0^inf g(x) x^(shape-1) e^(-rate x) dx``.

    Returns nodes and weights; weights that underflow are dropped.
    """
    x, logw = _gamma_rule(shape, m)
    logw = logw + math.lgamma(shape) - shape * math.log(rate)
    keep = logw > -690.0
    return x[keep] / rate, np.exp(logw[keep])


def stationary_quadrature(p: CirParams, m: int, rate: float | None = None):
    """Nodes/weights for ``int g(x) pi(x) dx`` where ``g`` carries ``e^{(rate - a) x}``.

    With ``rate=None`` the weight is exactly ``pi``; otherwise the rule has
    weight ``x^(b-1) e^(-rate x)`` and the returned weights already include
    the ``a^b / Gamma(b)`` normalization, so ``sum w g(x) e^{(rate-a)x}``
    approximates ``int g pi``.
    """
    rate = p.a if rate is None else rate
    x, logw = _gamma_rule(p.b, m)
    # a^b / Gamma(b) times Gamma(b) / rate^b
    logw = logw + p.b * math.log(p.a / rate)
    keep = logw > -690.0
    return x[keep] / rate, np.exp(logw[keep])
