from pathlib import Path

import numpy as np
import pytest

from ubli.synthetic import planted_contextual, planted_pair, write_fixture

DATA = Path(__file__).parent / "data"
PLANTED = DATA / "planted"


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def planted_dir():
    """Shipped noise-free planted fixture: n=300, d=20, contextual d0=32."""
    return PLANTED


@pytest.fixture(scope="session")
def small_fixture(tmp_path_factory):
    """Smaller planted fixture with contextual files, for quick pipeline tests."""
    d = tmp_path_factory.mktemp("small")
    p = planted_pair(120, 10, noise=0.0, seed=3)
    write_fixture(d, p, contextual=planted_contextual(p, 12, seed=3))
    return d
