import math
from functools import lru_cache

import pytest

from modules.scenarios.builtins import get_builtin

PHI = (1.0 + math.sqrt(5.0)) / 2.0
HEMI_SLANT_BUILTINS = (
    "example1", "example1-golden", "example1-jbar", "example2", "example2-jbar",
    "slant-cylinder", "semi-invariant-cylinder",
)


@lru_cache(maxsize=None)
def _cached(name, p, q, consts):
    return get_builtin(name, p=p, q=q, consts=dict(consts) if consts else None)


def builtin(name, p=None, q=None, **consts):
    """Builtin scenario, cached per (name, p, q, consts)."""
    return _cached(name, p, q, tuple(sorted(consts.items())))


@pytest.fixture(scope="session")
def example1():
    return builtin("example1")


@pytest.fixture(scope="session")
def example2():
    return builtin("example2")


@pytest.fixture(scope="session")
def paraboloid():
    return builtin("paraboloid")
