import pytest

from crystal_certificates.default_settings import reset


@pytest.fixture(autouse=True)
def _reset_runtime_overrides():
    yield
    reset()


@pytest.fixture
def q4():
    """m = (1, 2, 4, 8), the smallest doubling sequence with a level-1 family."""
    return (1, 2, 4, 8)


@pytest.fixture
def q5():
    return (1, 2, 4, 8, 16)
