import numpy as np
import pytest

from corrsets.disturbance import ConstantGenerator, FilteredNoiseGenerator

from oracles import A_EX, F_EX1, GT_EX2, H_EX1, U_EX1


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def filtered_gen():
    return FilteredNoiseGenerator(H_EX1, F_EX1, U_EX1, seed=7)


@pytest.fixture(scope="session")
def constant_gen():
    return ConstantGenerator(GT_EX2, seed=7)


@pytest.fixture(scope="session")
def model1(filtered_gen):
    return filtered_gen.correlation_model(A_EX)


@pytest.fixture(scope="session")
def model2(constant_gen):
    return constant_gen.correlation_model(A_EX)
