"""Acceptance criteria, one test each; every test prints a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines.
"""

import pytest

from subcir import validation


@pytest.fixture(scope="module")
def reference_model():
    return validation.SubCirModel(validation.reference_params(), validation.reference_subordinator())


@pytest.fixture(scope="module")
def shared_paths(reference_model):
    # 1e5 paths, h = 1/500, started at x = 0.1; reused by the survival and compensator criteria
    return validation.mc_paths(reference_model, n_paths=100_000, h=1 / 500, x0=0.1)


def report(result):
    print(result.line())
    assert result.passed, result.line()


def test_01_asymptotic_spread(reference_model):
    report(validation.check_asymptotic_spread(reference_model, tol=5e-4))


def test_02_affine_parity():
    report(validation.check_affine_parity(tol=1e-8))


def test_03_hille_hardy_density():
    report(validation.check_hille_hardy(tol=1e-6))


def test_04_mc_vs_spectral_survival(reference_model, shared_paths):
    report(validation.check_mc_survival(reference_model, paths=shared_paths, n_sigma=3.0))


def test_05_compensator_identity(reference_model, shared_paths):
    report(validation.check_compensator(reference_model, paths=shared_paths, n_sigma=3.0))


def test_06_levy_density_symmetry(reference_model):
    report(validation.check_levy_symmetry(reference_model, tol=1e-6))


def test_07_levy_skew(reference_model):
    report(validation.check_skew(reference_model, level=0.2))


def test_08_sampler_laplace_transform():
    report(validation.check_sampler(n=1_000_000, n_sigma=4.0))


def test_09_trivial_killing_rate():
    report(validation.check_trivial_killing(tol=1e-12))


def test_10_orthonormality():
    report(validation.check_orthonormality(tol=1e-8))
