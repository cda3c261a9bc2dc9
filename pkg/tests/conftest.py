import mpmath as mp
import pytest

mp.mp.dps = 40


@pytest.fixture
def mpctx():
    with mp.workdps(50):
        yield mp
