"""Self-checks of the model against independent routes.

Each check returns a :class:`CheckResult`; ``run_all`` is what the
``validate`` subcommand reports.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import cir, mc, model, specfun, subordinators
from .cir import CirParams
from .model import SubCirModel
from .subordinators import SubordinatorSpec

REFERENCE_SPREAD = 0.084


def reference_params() -> CirParams:
    return CirParams(kappa=1.0, theta=0.1, sigma=0.25)


def reference_subordinator() -> SubordinatorSpec:
    return SubordinatorSpec.tempered_stable(C=0.5, alpha=0.5, eta=1.0)


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        body = ", ".join(f"{k}={_fmt(v)}" for k, v in sorted(self.detail.items()))
        return f"[{tag}] {self.name}: {body} ({self.seconds:.1f}s)"

    def as_dict(self) -> dict:
        return {"name": self.name, "passed": bool(self.passed), "detail": self.detail,
                "seconds": round(self.seconds, 3)}


def _fmt(v):
    return f"{v:.6g}" if isinstance(v, float) else str(v)


def _timed(fn):
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        res = fn(*args, **kwargs)
        res.seconds = time.perf_counter() - t0
        return res

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def _default_model(m):
    return m if m is not None else SubCirModel(reference_params(), reference_subordinator())


@_timed
def check_asymptotic_spread(m: SubCirModel | None = None, tol: float = 5e-4) -> CheckResult:
    m = _default_model(m)
    s = model.asymptotic_spread(m)
    err = abs(s - REFERENCE_SPREAD)
    return CheckResult("asymptotic_spread", err <= tol, {"S_inf": s, "abs_err": err, "tol": tol})


@_timed
def check_affine_parity(p: CirParams | None = None, tol: float = 1e-8) -> CheckResult:
    p = p or reference_params()
    m = SubCirModel(p, SubordinatorSpec.drift_only(1.0))
    worst = 0.0
    for t, x, z, beta in itertools.product((0.25, 1.0, 5.0), (0.02, 0.1, 0.3), (0.0, 1.0, 5.0), (0, 1)):
        a = model.charfun_sub(m, t, beta, z, x)
        b = cir.charfun_affine(p, t, float(beta), z, x)
        worst = max(worst, abs(a - b))
    return CheckResult("affine_parity", worst <= tol, {"max_abs_err": worst, "tol": tol})


def bilinear_density(sd: cir.SpectralData, t: float, x: float, y: float, nmax: int = 200) -> float:
    """``sum_n exp(-lambda_n t) phi_n(x) phi_n(y)``."""
    phi = cir.eigenfunction_table(sd, nmax, np.array([x, y]))
    return float(np.sum(np.exp(-sd.eigenvalues[:nmax] * t) * phi[:, 0] * phi[:, 1]))


@_timed
def check_hille_hardy(p: CirParams | None = None, tol: float = 1e-6) -> CheckResult:
    p = p or reference_params()
    worst = 0.0
    for beta in (0.0, 1.0):
        sd = cir.spectral_data(p, beta, 200)
        for t, x, y in itertools.product((0.5, 1.0), (0.05, 0.1, 0.2), (0.05, 0.1, 0.2)):
            closed = cir.transition_density_m(p, beta, t, x, y)
            series = bilinear_density(sd, t, x, y)
            worst = max(worst, abs(series - closed) / abs(closed))
    return CheckResult("hille_hardy", worst <= tol, {"max_rel_err": worst, "tol": tol})


@dataclass
class SharedPaths:
    cfg: mc.PathConfig
    paths: mc.PathSet
    seconds: float


def mc_paths(m: SubCirModel, n_paths: int = 100_000, seed: int = 20240611, h: float = 1 / 500,
             x0: float = 0.1, threads: int = 1) -> SharedPaths:
    """One shared simulation on a 1/50-year grid to 3 years plus years 4 and 5."""
    grid = [round(i / 50, 12) for i in range(151)] + [4.0, 5.0]
    cfg = mc.PathConfig(grid, n_paths, seed=seed, h=h, x0=x0)
    t0 = time.perf_counter()
    ps = mc.simulate_subcir(m, cfg, threads)
    return SharedPaths(cfg, ps, time.perf_counter() - t0)


@_timed
def check_mc_survival(m: SubCirModel | None = None, paths: SharedPaths | None = None, n_sigma: float = 3.0,
                      budget_s: float = 120.0, **kw) -> CheckResult:
    m = _default_model(m)
    sp = paths if paths is not None else mc_paths(m, **kw)
    t0 = time.perf_counter()
    detail, ok = {"n_paths": sp.paths.n_paths}, True
    for T in (1.0, 3.0, 5.0):
        est, se = mc.estimate_survival(m, T, 0.1, sp.cfg, paths=sp.paths)
        q = model.survival_probability(m, T, 0.1)
        z = abs(est - q) / se
        ok &= z <= n_sigma
        detail[f"T{int(T)}_mc"] = est
        detail[f"T{int(T)}_spectral"] = q
        detail[f"T{int(T)}_z"] = z
    total = sp.seconds + time.perf_counter() - t0
    detail["runtime_s"] = total
    return CheckResult("mc_vs_spectral_survival", bool(ok) and total <= budget_s, detail)


@_timed
def check_compensator(m: SubCirModel | None = None, paths: SharedPaths | None = None, n_sigma: float = 3.0,
                      budget_s: float = 180.0, **kw) -> CheckResult:
    m = _default_model(m)
    sp = paths if paths is not None else mc_paths(m, **kw)
    t0 = time.perf_counter()
    r = mc.compensator_check(m, 3.0, 0.1, sp.cfg, paths=sp.paths)
    total = sp.seconds + time.perf_counter() - t0
    z = abs(r.diff) / r.se
    return CheckResult("compensator_identity", z < n_sigma and total <= budget_s,
                       {"lhs": r.lhs, "rhs": r.rhs, "diff": r.diff, "se": r.se, "z": z, "runtime_s": total})


@_timed
def check_levy_symmetry(m: SubCirModel | None = None, tol: float = 1e-6) -> CheckResult:
    m = _default_model(m)
    p = m.cir
    worst = 0.0
    for x, x2 in ((0.05, 0.2), (0.02, 0.1)):
        left = cir.stationary_density(p, x) * model.levy_density_state(m, 0, x, x2 - x)
        right = cir.stationary_density(p, x2) * model.levy_density_state(m, 0, x2, x - x2)
        worst = max(worst, abs(left - right) / abs(left))
    return CheckResult("levy_symmetry", worst <= tol, {"max_rel_err": worst, "tol": tol})


@_timed
def check_skew(m: SubCirModel | None = None, level: float = 0.2) -> CheckResult:
    m = _default_model(m)
    mom = {x: model.truncated_jump_moment(m, 0, x, level) for x in (0.01, 0.1, 0.2)}
    ok = mom[0.01] > 0 and mom[0.2] < 0 and abs(mom[0.1]) < min(abs(mom[0.01]), abs(mom[0.2]))
    return CheckResult("levy_skew", ok, {f"m_{x}": v for x, v in mom.items()})


@_timed
def check_sampler(n: int = 1_000_000, seed: int = 314159, n_sigma: float = 4.0) -> CheckResult:
    specs = {
        "alpha=0.5": SubordinatorSpec.tempered_stable(0.5, 0.5, 1.0),
        "alpha=0": SubordinatorSpec.tempered_stable(1.0, 0.0, 1.0),
        "alpha=-1": SubordinatorSpec.tempered_stable(1.0, -1.0, 1.0),
    }
    rng = np.random.Generator(np.random.PCG64(seed))
    worst, ok = 0.0, True
    for spec in specs.values():
        draws = subordinators.sample_increment(spec, 1.0, rng, n)
        for s in (0.5, 1.0, 2.0):
            v = np.exp(-s * draws)
            z = abs(v.mean() - math.exp(-subordinators.laplace_exponent(spec, s))) / (v.std(ddof=1) / math.sqrt(n))
            worst = max(worst, z)
            ok &= z <= n_sigma
    return CheckResult("sampler_laplace", bool(ok), {"max_z": worst, "n_sigma": n_sigma, "draws": n})


@_timed
def check_trivial_killing(p: CirParams | None = None, tol: float = 1e-12) -> CheckResult:
    m = SubCirModel(p or reference_params(), SubordinatorSpec.drift_only(1.0))
    xs = (0.0, 0.1, 0.5)
    worst = max(abs(float(model.killing_rate(m, x)) - x) for x in xs)
    return CheckResult("trivial_killing_rate", worst <= tol, {"max_abs_err": worst, "tol": tol})


def gram_matrix(sd: cir.SpectralData, n: int = 20, nodes: int = 60) -> np.ndarray:
    """``(phi_i, phi_j)`` in ``L^2(pi)`` by a Gauss rule with weight ``x^(b-1) e^{-2 rho x / sigma^2}``."""
    p = sd.params
    s2 = p.sigma**2
    x, w = cir.stationary_quadrature(p, nodes, 2.0 * sd.rho / s2)
    poly = np.exp(sd.log_norms[:n])[:, None] * specfun.laguerre_table(n, p.b - 1.0, 2.0 * sd.rho * x / s2)
    return (poly * w) @ poly.T


@_timed
def check_orthonormality(p: CirParams | None = None, tol: float = 1e-8) -> CheckResult:
    p = p or reference_params()
    worst = 0.0
    for beta in (0.0, 1.0):
        g = gram_matrix(cir.spectral_data(p, beta, 20))
        worst = max(worst, float(np.max(np.abs(g - np.eye(20)))))
    return CheckResult("orthonormality", worst <= tol, {"max_abs_err": worst, "tol": tol})


def run_all(n_paths: int = 100_000, seed: int = 20240611, h: float = 1 / 500, threads: int = 1,
            sampler_draws: int = 1_000_000) -> list[CheckResult]:
    m = _default_model(None)
    shared = mc_paths(m, n_paths=n_paths, seed=seed, h=h, threads=threads)
    return [
        check_asymptotic_spread(m),
        check_affine_parity(),
        check_hille_hardy(),
        check_mc_survival(m, paths=shared),
        check_compensator(m, paths=shared),
        check_levy_symmetry(m),
        check_skew(m),
        check_sampler(n=sampler_draws),
        check_trivial_killing(),
        check_orthonormality(),
    ]
