import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

SEED = int(os.environ.get("STATBUNDLE_SEED", 20240611))

_ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def rng():
    return np.random.default_rng(SEED)


@pytest.fixture(scope="session")
def acceptance_report():
    return _ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_ACCEPTANCE):
        terminalreporter.write_line(_ACCEPTANCE[k])


@st.composite
def densities(draw, n=None, spread=2.0):
    """Positive densities normalized to mass n (mean 1)."""
    if n is None:
        n = draw(st.integers(2, 8))
    logits = draw(st.lists(st.floats(-spread, spread), min_size=n, max_size=n))
    e = np.exp(np.array(logits))
    return e * (n / e.sum())


@st.composite
def fibers(draw, q, scale=1.0):
    raw = np.array(draw(st.lists(st.floats(-scale, scale), min_size=q.size, max_size=q.size)))
    return raw - np.mean(q * raw)


@st.composite
def density_and_fibers(draw, k=1, scale=1.0, n=None):
    q = draw(densities(n=n))
    return (q, *(draw(fibers(q, scale)) for _ in range(k)))
