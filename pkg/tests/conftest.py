import numpy as np
import pytest

from permcodec.core import DistortionMeasure, SourceModel


@pytest.fixture
def fair():
    return SourceModel.bernoulli(0.5)


@pytest.fixture
def hamming2():
    return DistortionMeasure.hamming(2)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
