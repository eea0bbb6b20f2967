from fractions import Fraction

import pytest
from fastapi.testclient import TestClient

from kuranishi_atlas.app import app
from kuranishi_atlas.config import RunConfig
from kuranishi_atlas.demos import load_atlas


@pytest.fixture
def client():
    with TestClient(app) as c:
        yield c


@pytest.fixture
def config():
    return RunConfig(resolution=Fraction(1, 32), seeds=[0, 1], out="")


@pytest.fixture
def circle_basic():
    return load_atlas("circle-basic").atlas


@pytest.fixture
def circle_additive():
    return load_atlas("circle-additive").atlas


@pytest.fixture
def zero_linear():
    return load_atlas("zero-linear")
