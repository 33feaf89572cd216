import pytest

from softland import Params


@pytest.fixture(scope="session")
def canonical() -> Params:
    """Mass ratio 5, stroke 20: the reference configuration used throughout."""
    return Params(r_m=5.0, s=20.0)


@pytest.fixture(scope="session")
def canonical_u82() -> Params:
    return Params(r_m=5.0, s=20.0, u_max=8.2)
