import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from contactlab.topology import build_topology

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_graph(n: int, seed: int, extra: float = 0.3):
    """Connected graph on ``n`` vertices: a random tree plus extra random edges."""
    rng = np.random.default_rng(seed)
    edges = set()
    for v in range(1, n):
        u = int(rng.integers(v))
        edges.add((u, v))
    for _ in range(int(extra * n)):
        u, v = sorted(rng.choice(n, size=2, replace=False).tolist()) if n > 1 else (0, 0)
        if u != v:
            edges.add((u, v))
    return build_topology("explicit", {"n": n, "edges": sorted(edges), "origin": 0})


@pytest.fixture(scope="session")
def z1_small():
    return build_topology("lattice", {"d": 1, "R": 5})


@pytest.fixture(scope="session")
def path3():
    return build_topology("half-line", {"n": 3})


# one line per acceptance criterion, printed after the run
ACCEPTANCE: dict[int, str] = {}


def record(number: int, ok: bool, detail: str, seconds: float) -> None:
    ACCEPTANCE[number] = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  ({seconds:.1f}s)  {detail}"


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
