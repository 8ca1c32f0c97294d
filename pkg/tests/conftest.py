import pytest

from subcir import CirParams, SubCirModel, SubordinatorSpec


@pytest.fixture(scope="session")
def params():
    return CirParams(kappa=1.0, theta=0.1, sigma=0.25)


@pytest.fixture(scope="session")
def ig_spec():
    return SubordinatorSpec.tempered_stable(C=0.5, alpha=0.5, eta=1.0)


@pytest.fixture(scope="session")
def ig_model(params, ig_spec):
    return SubCirModel(params, ig_spec)


@pytest.fixture(scope="session")
def trivial_model(params):
    return SubCirModel(params, SubordinatorSpec.drift_only(1.0))
