import numpy as np
import pytest

from mobqc.graphs import ProtocolGraph
from mobqc.protocol import InputBlock
from mobqc.qsim import StateVector


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def chain():
    return ProtocolGraph.chain(3, 1)


@pytest.fixture
def input_one():
    return InputBlock(StateVector.from_label("1"))


@pytest.fixture
def input_zero():
    return InputBlock(StateVector.from_label("0"))
