import pytest
from hypothesis import settings, strategies as st

from pktsched import Instance

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


def mlp_trap(w1=1.0, w2=100.0) -> Instance:
    """The hard instance for MLP: (1,1,w1), (1,2,w2), (2,2,w2)."""
    return Instance.from_triples([(1, 1, w1), (1, 2, w2), (2, 2, w2)])


@pytest.fixture
def hard_instance():
    return mlp_trap()


@st.composite
def small_instances(draw, max_packets=8, horizon=6, max_tau=4, max_w=12):
    n = draw(st.integers(0, max_packets))
    triples = []
    for _ in range(n):
        r = draw(st.integers(1, horizon))
        tau = draw(st.integers(0, max_tau))
        triples.append((r, r + tau, draw(st.integers(1, max_w))))
    return Instance.from_triples(triples, horizon=horizon)


# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE: dict[int, str] = {}


def record(n: int, ok: bool, detail: str) -> bool:
    ACCEPTANCE[n] = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(ACCEPTANCE[n])
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
