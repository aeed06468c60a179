import numpy as np
import pytest

import bilevelbench as bb


@pytest.fixture
def q2():
    return bb.make_q2()


@pytest.fixture
def q2_gauss():
    return bb.make_q2(bb.NoiseModel.gaussian(0.1, 0.1, 0.1))


@pytest.fixture
def practical_pinned():
    """The pinned hand-tuned schedule used by the benchmark runs."""
    return bb.schedule_practical(
        {"alpha": 0.1, "beta": 0.9, "gamma": 0.1, "eta": 0.01,
         "T": 2000, "T0": 50})


@pytest.fixture
def zeros2():
    return np.zeros(2)


@pytest.fixture
def ones2():
    return np.ones(2)
