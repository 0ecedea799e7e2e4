import numpy as np
import pytest

import qmselect as q

# the three reference data-generating processes used across the suite
DGP1 = (q.arma(2, 0), (0.4, 0.4, 1.0))
DGP2 = (q.arma(1, 1), (0.5, 0.6, 1.0))
DGP3 = (q.garch(1, 1), (1.0, 0.35, 0.4))


@pytest.fixture(scope="session")
def dgp1():
    return DGP1


@pytest.fixture(scope="session")
def dgp2():
    return DGP2


@pytest.fixture(scope="session")
def dgp3():
    return DGP3


@pytest.fixture(scope="session")
def dgp2_series_2000():
    spec, theta = DGP2
    return q.simulate(spec, np.array(theta), 2000, seed=909)


@pytest.fixture(scope="session")
def dgp3_series_2000():
    spec, theta = DGP3
    return q.simulate(spec, np.array(theta), 2000, seed=910)


@pytest.fixture(scope="session")
def dgp2_fit_2000(dgp2_series_2000):
    return q.fit(q.arma(1, 1), dgp2_series_2000)


@pytest.fixture(scope="session")
def dgp3_fit_2000(dgp3_series_2000):
    return q.fit(q.garch(1, 1), dgp3_series_2000)
