import numpy as np
import pytest
from hypothesis import strategies as st

from strategic_signaling.model import ModelParams, validate


@st.composite
def no_test_params(draw):
    p = draw(st.floats(0.01, 0.49))
    q = draw(st.floats(1 - p, 1.0))
    return ModelParams(p, q)


@st.composite
def with_test_params(draw):
    """Parameters satisfying assumptions 1-3."""
    p = draw(st.floats(0.01, 0.49))
    q = draw(st.floats(1 - p, 1.0))
    d = draw(st.floats(1 - p, 1.0))
    return ModelParams(p, q, d)


def random_params(rng, n, kind):
    """Seeded draws: kind is 'notest', 'test' (assumption 3) or 'relaxed' (relaxed only)."""
    out = []
    while len(out) < n:
        p = rng.uniform(0.02, 0.48)
        q = rng.uniform(1 - p, 1.0)
        if kind == "notest":
            out.append(ModelParams(p, q))
            continue
        if kind == "test":
            out.append(ModelParams(p, q, rng.uniform(1 - p, 1.0)))
            continue
        params = ModelParams(p, q, rng.uniform(0.5, 1 - p))
        rep = validate(params)
        if rep.a_relaxed and not rep.a3:
            out.append(params)
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


def record(n, passed, detail):
    ACCEPTANCE[n] = (bool(passed), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if passed else 'FAIL'} - {detail}")
