"""
Pytest fixtures: the fixture specifications parsed from ``specs/``.
"""

import pytest

from msgsynth.tests.helpers import load_fixture


@pytest.fixture
def ex_cross():
    return load_fixture("ex_cross")


@pytest.fixture
def ex_empty():
    return load_fixture("ex_empty")


@pytest.fixture
def ex_local():
    return load_fixture("ex_local")


@pytest.fixture
def ex_uncontrollable():
    return load_fixture("ex_uncontrollable")
