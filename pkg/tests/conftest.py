"""
Shared fixtures: reference functions and the HTTP test client
"""

import json
from pathlib import Path

import numpy as np
import pytest

from app.models import expr as E
from app.models.funcrep import constant, from_expr, identity_on, make_func, unit_step
from app.services.document_loader import document_loader

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"
TWO_PI = 2.0 * np.pi


def fixture_path(name: str) -> str:
    return str(FIXTURES / name)


def load_doc(name: str) -> dict:
    return json.loads((FIXTURES / name).read_text())


@pytest.fixture(autouse=True)
def _fresh_cache():
    document_loader.clear()
    yield
    document_loader.clear()


@pytest.fixture
def h05():
    """The unit function at 0.5 on [0, 1]."""
    return unit_step("0.5", 0.0, 1.0)


@pytest.fixture
def ident():
    return identity_on(0.0, 1.0)


@pytest.fixture
def t_squared():
    return from_expr(E.Poly((0.0, 0.0, 1.0)), 0.0, 1.0)


@pytest.fixture
def one():
    return constant(1.0, 0.0, 1.0)


@pytest.fixture
def t_plus_h05():
    return make_func(load_doc("t_plus_h05.json"))


@pytest.fixture
def sine():
    return from_expr(E.Sin(), 0.0, TWO_PI)


@pytest.fixture
def cosine():
    return from_expr(E.Cos(), 0.0, TWO_PI)


@pytest.fixture
def client():
    from fastapi.testclient import TestClient

    from app.main import app

    with TestClient(app) as c:
        yield c
