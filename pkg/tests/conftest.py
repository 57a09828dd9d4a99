import pytest

from qcausal.switch import fine_grained_switch


@pytest.fixture(scope="session")
def bundle2():
    """The d=2 fine-grained switch, shared because construction is not free."""
    return fine_grained_switch(2)
