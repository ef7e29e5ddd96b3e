import warnings

import pytest

from optexec import ModelParams, PenaltyParams


@pytest.fixture
def base():
    return ModelParams()


@pytest.fixture
def pen():
    return PenaltyParams()


@pytest.fixture
def constant_model():
    return ModelParams().with_fractions(p0=0.1)


@pytest.fixture
def affine_model():
    return ModelParams().with_fractions(p0=0.05, p1=0.05)


@pytest.fixture
def quiet():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        yield
