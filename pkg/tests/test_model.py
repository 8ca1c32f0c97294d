import math

import numpy as np
import pytest
from scipy import integrate, stats

from subcir import cir, model, subordinators as subs
from subcir.errors import BelowResolutionError, ConvergenceError, DomainError
from subcir.model import SubCirModel, Truncation
from subcir.subordinators import SubordinatorSpec


def ig_law(T):
    mean = 0.5 * math.sqrt(math.pi) * T
    shape = 2 * math.pi * 0.25 * T * T
    return stats.invgauss(mean / shape, scale=shape)


def survival_by_clock_law(p, T, x):
    """E[Psi_{T_T}(x, 1, 0)] integrated against the inverse Gaussian law."""
    law = ig_law(T)
    return integrate.quad(lambda s: cir.charfun_affine(p, s, 1.0, 0.0, x) * law.pdf(s), 0, np.inf,
                          epsabs=1e-13, limit=200)[0]


def test_model_invariants(params, ig_spec):
    with pytest.raises(DomainError):
        Truncation(n_max=4)
    with pytest.raises(DomainError):
        SubCirModel(params, SubordinatorSpec.tempered_stable(0.5, 0.0, 1.0))


def test_constant_coefficients_give_one(ig_model):
    for t in (1e-3, 1.0, 30.0):
        assert model.apply_semigroup(ig_model, 0, t, [1.0], np.array([0.0, 0.1, 2.0])) == pytest.approx(1.0, abs=1e-14)


def test_apply_semigroup_errors(ig_model):
    with pytest.raises(BelowResolutionError):
        model.apply_semigroup(ig_model, 1, 5e-4, [1.0], 0.1)
    with pytest.raises(DomainError):
        model.apply_semigroup(ig_model, 2, 1.0, [1.0], 0.1)
    slow = [1.0] * 200
    with pytest.raises(ConvergenceError):
        model.apply_semigroup(ig_model, 0, 1e-3, slow, 5.0)


@pytest.mark.parametrize("T", [0.5, 1.0, 3.0, 5.0])
@pytest.mark.parametrize("x", [0.02, 0.1, 0.3])
def test_survival_matches_clock_law_integral(params, ig_model, T, x):
    assert model.survival_probability(ig_model, T, x) == pytest.approx(survival_by_clock_law(params, T, x), abs=1e-9)


def test_survival_edge_cases(ig_model):
    assert model.survival_probability(ig_model, 0.0, 0.1) == 1.0
    assert model.survival_probability(ig_model, 5.0, 0.1, d=1) == 0.0
    with pytest.raises(BelowResolutionError):
        model.survival_probability(ig_model, 1e-4, 0.1)
    with pytest.raises(DomainError):
        model.survival_probability(ig_model, -1.0, 0.1)


def test_survival_monotone_and_in_range(ig_model):
    hs = np.linspace(0.01, 20, 40)
    xs = np.linspace(0.0, 0.6, 25)
    grid = np.array([model.survival_probability(ig_model, h, xs) for h in hs])
    assert np.all((grid >= 0) & (grid <= 1))
    assert np.all(np.diff(grid, axis=0) <= 1e-13)
    assert np.all(np.diff(grid, axis=1) <= 1e-13)


def test_spreads(params, ig_model, trivial_model):
    s_inf = model.asymptotic_spread(ig_model)
    assert s_inf == pytest.approx(math.sqrt(math.pi) * (math.sqrt(1 + cir.eigenvalue(cir.spectral_data(params, 1.0), 1)) - 1), rel=1e-13)
    assert abs(model.credit_spread(ig_model, 30.0, 0.1) - s_inf) < 1e-3
    for T in (1.0, 3.0, 5.0):
        assert 0 < model.credit_spread(ig_model, T, 0.1) < 0.15
        A, B = cir.affine_coefficients(params, T, 1.0)
        assert model.credit_spread(trivial_model, T, 0.1) == pytest.approx(-(math.log(A) - B * 0.1) / T, rel=1e-9)
    assert model.asymptotic_spread(trivial_model) == pytest.approx(0.0970563, abs=1e-7)
    two = SubCirModel(params, SubordinatorSpec.drift_only(2.0))
    assert model.asymptotic_spread(two) == pytest.approx(2 * model.asymptotic_spread(trivial_model), rel=1e-15)


def test_charfun_sub_properties(params, ig_model, trivial_model):
    assert model.charfun_sub(ig_model, 2.0, 1, 0.0, 0.1) == pytest.approx(model.survival_probability(ig_model, 2.0, 0.1), rel=1e-15)
    assert model.charfun_sub(ig_model, 200.0, 0, 3.0, 0.2) == pytest.approx((1 + 3.0 / params.a) ** -params.b, rel=1e-10)
    v = model.charfun_sub(ig_model, 1.0, 0, 2.0 + 7.0j, 0.1)
    assert isinstance(v, complex) and abs(v) <= 1.0
    # subordinated transform by integrating over the clock law
    law = ig_law(1.0)
    ref = integrate.quad(lambda s: cir.charfun_affine(params, s, 0.0, 2.0, 0.1) * law.pdf(s), 0, np.inf, epsabs=1e-13)[0]
    assert model.charfun_sub(ig_model, 1.0, 0, 2.0, 0.1) == pytest.approx(ref, abs=1e-9)


def test_affine_parity(params, trivial_model):
    for t in (0.25, 1.0, 5.0):
        for x in (0.02, 0.1, 0.3):
            for z in (0.0, 1.0, 5.0):
                for b in (0, 1):
                    assert abs(model.charfun_sub(trivial_model, t, b, z, x) - cir.charfun_affine(params, t, b, z, x)) < 1e-8


def test_killing_rate_trivial_and_properties(trivial_model, ig_model):
    xs = np.array([0.0, 0.1, 0.5])
    assert np.max(np.abs(model.killing_rate(trivial_model, xs) - xs)) <= 1e-12
    k = model.killing_rate(ig_model, np.linspace(0, 0.4, 41))
    assert k[0] > 0
    assert np.all(np.diff(k) > 0)
    assert np.all(np.diff(k, 2) <= 1e-12)
    with pytest.raises(DomainError):
        model.killing_rate(ig_model, -0.1)


@pytest.mark.filterwarnings("ignore::scipy.integrate.IntegrationWarning")
@pytest.mark.parametrize("x", [0.0, 0.1, 0.4])
def test_killing_rate_against_direct_quadrature(params, ig_model, x):
    def g(s):
        return (1 - cir.charfun_affine(params, s, 1.0, 0.0, x)) * 0.5 * s**-1.5 * math.exp(-s)

    ref = sum(integrate.quad(g, a, b, epsabs=0, epsrel=1e-10, limit=400)[0]
              for a, b in ((0, 1e-4), (1e-4, 1e-2), (1e-2, 1), (1, np.inf)))
    assert model.killing_rate(ig_model, x) == pytest.approx(ref, rel=1e-8)


def test_killing_rate_interpolator(ig_model):
    k = model.killing_rate_interpolator(ig_model, 1.0)
    xs = np.array([0.013, 0.27, 0.9])
    assert np.allclose(k(xs), model.killing_rate(ig_model, xs), rtol=1e-6)
    assert k(1.5) > k(1.0)


def test_levy_density_support_and_guards(ig_model):
    assert model.levy_density_state(ig_model, 0, 0.1, -0.1) == 0.0
    assert model.levy_density_state(ig_model, 0, 0.1, -0.3) == 0.0
    with pytest.raises(DomainError):
        model.levy_density_state(ig_model, 0, 0.1, 1e-7)
    with pytest.raises(DomainError):
        model.levy_density_state(ig_model, 0, 0.0, 0.1)
    assert model.levy_density_state(ig_model, 0, 0.1, 0.05) > 0


@pytest.mark.parametrize("beta", [0, 1])
@pytest.mark.parametrize("x,x2", [(0.05, 0.2), (0.02, 0.1), (0.1, 0.3)])
def test_levy_density_detailed_balance(params, ig_model, beta, x, x2):
    left = cir.stationary_density(params, x) * model.levy_density_state(ig_model, beta, x, x2 - x)
    right = cir.stationary_density(params, x2) * model.levy_density_state(ig_model, beta, x2, x - x2)
    assert left == pytest.approx(right, rel=1e-6)


def test_levy_density_against_plain_quadrature(params, ig_model):
    x, y = 0.1, 0.05

    def f(s):
        return cir.transition_density_m(params, 0.0, s, x, x + y) * 0.5 * s**-1.5 * math.exp(-s)

    ref = integrate.quad(f, 1e-4, 1, epsrel=1e-11, limit=400)[0] + integrate.quad(f, 1, np.inf, epsrel=1e-11)[0]
    ref *= cir.stationary_density(params, x + y)
    assert model.levy_density_state(ig_model, 0, x, y) == pytest.approx(ref, rel=1e-7)


def test_levy_density_killed_is_smaller(ig_model):
    assert model.levy_density_state(ig_model, 1, 0.1, 0.05) < model.levy_density_state(ig_model, 0, 0.1, 0.05)


def test_levy_density_integrability(ig_model):
    for x in (0.01, 0.1, 0.2):
        f = lambda y: min(y * y, 1.0) * model.levy_density_state(ig_model, 0, x, y)
        lo = integrate.quad(f, -x, -1e-6, limit=200, points=[-x / 2])[0]
        hi = integrate.quad(f, 1e-6, 2.0, limit=200, points=[0.05, 0.3])[0]
        assert math.isfinite(lo + hi) and lo + hi > 0


def _ncx2_restricted_moment(p, s, x, level):
    q = -math.expm1(-p.kappa * s)
    c = p.sigma**2 * q / (4 * p.kappa)
    df = 4 * p.kappa * p.theta / p.sigma**2
    nc = x * math.exp(-p.kappa * s) / c
    lo, hi = max(x - level, 0.0) / c, (x + level) / c

    def tail_mean(u):
        return df * stats.ncx2.sf(u, df + 2, nc) + nc * stats.ncx2.sf(u, df + 4, nc)

    prob = stats.ncx2.cdf(hi, df, nc) - stats.ncx2.cdf(lo, df, nc)
    return c * (tail_mean(lo) - tail_mean(hi)) - x * prob


@pytest.mark.parametrize("s", [1e-3, 0.05, 0.5, 3.0])
@pytest.mark.parametrize("x,level", [(0.01, 0.2), (0.1, 0.2), (0.3, 0.2), (0.2, 0.05)])
def test_inner_truncated_moment_against_ncx2(params, s, x, level):
    got = model.inner_truncated_moment(params, 0.0, s, x, level)
    assert got == pytest.approx(_ncx2_restricted_moment(params, s, x, level), rel=1e-7, abs=1e-15)


@pytest.mark.parametrize("s", [0.05, 1.0])
def test_inner_truncated_moment_killed_against_quad(params, s):
    x, level = 0.3, 0.2

    def f(z):
        return (z - x) * cir.transition_density_m(params, 1.0, s, x, z) * cir.stationary_density(params, z)

    ref = integrate.quad(f, x - level, x + level, epsabs=1e-15, epsrel=1e-11, limit=200, points=[x])[0]
    assert model.inner_truncated_moment(params, 1.0, s, x, level) == pytest.approx(ref, rel=1e-7)


def test_drift_matches_mean_reversion_identity(params, ig_model, trivial_model):
    phi_k = subs.laplace_exponent(ig_model.sub, params.kappa)
    for x in (0.01, 0.1, 0.3):
        # the truncation at 1 is immaterial at these intensity levels
        assert model.drift_sub(ig_model, 0, x) == pytest.approx((params.theta - x) * phi_k, abs=1e-10)
        assert model.drift_sub(trivial_model, 0, x) == pytest.approx(params.kappa * (params.theta - x), rel=1e-15)
    assert model.drift_sub(ig_model, 0, 0.01) > 0 > model.drift_sub(ig_model, 0, 0.3)
    assert abs(model.drift_sub(ig_model, 0, 0.1)) < 1e-3 * abs(model.drift_sub(ig_model, 0, 0.01))


def test_truncated_moment_skew(ig_model):
    m = {x: model.truncated_jump_moment(ig_model, 0, x, 0.2) for x in (0.01, 0.1, 0.2)}
    assert m[0.01] > 0 > m[0.2]
    assert abs(m[0.1]) < min(abs(m[0.01]), abs(m[0.2]))


def test_truncated_moment_against_density_integral(ig_model):
    x, level = 0.1, 0.05
    f = lambda y: y * model.levy_density_state(ig_model, 0, x, y)
    # the principal part near 0 is integrable for y pi(x, y)
    lo = integrate.quad(f, -level, -1e-6, limit=200, epsrel=1e-7)[0]
    hi = integrate.quad(f, 1e-6, level, limit=200, epsrel=1e-7)[0]
    assert model.truncated_jump_moment(ig_model, 0, x, level) == pytest.approx(lo + hi, abs=2e-5)


def test_local_characteristics(ig_model):
    lc = model.local_characteristics(ig_model, 0.1)
    assert lc.killing_rate == pytest.approx(float(model.killing_rate(ig_model, 0.1)))
    assert lc.levy_density(0.05) == pytest.approx(model.levy_density_state(ig_model, 0, 0.1, 0.05))
