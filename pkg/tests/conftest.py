import numpy as np
import pytest

from permkiss.kissing import generate_spherical_code, rank_for

_codes: dict[tuple[int, int, int], object] = {}


@pytest.fixture(scope="session")
def get_code():
    """Session-cached spherical code generator (construction is the slow part)."""

    def _get(n, m=None, seed=0):
        if m is None:
            m = rank_for(n)
        key = (n, m, seed)
        if key not in _codes:
            _codes[key] = generate_spherical_code(n, m, seed=seed)
        return _codes[key]

    return _get


@pytest.fixture()
def rng():
    return np.random.default_rng(0)
