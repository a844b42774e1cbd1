import numpy as np
import pytest

from gpit_sim.world import LocationId, World, WorldConfig, build_world


def L(text: str) -> LocationId:
    return LocationId.parse(text)


def line_world(*specs):
    """World from ('ID', x, y) triples joined in order by straight edges."""
    locs = tuple(L(s) for s, _, _ in specs)
    coords = np.array([(x, y) for _, x, y in specs], dtype=float)
    edges = tuple(
        (i, i + 1, float(np.hypot(*(coords[i + 1] - coords[i])))) for i in range(len(specs) - 1)
    )
    return World(locs, coords, edges)


@pytest.fixture(scope="session")
def small_world():
    cfg = WorldConfig(n_work=3, n_shopping=3, n_residential=8, n_stations=5, width=6.0, height=6.0)
    return build_world(cfg, 11)


@pytest.fixture(scope="session")
def default_world():
    return build_world(WorldConfig(), 42)


# acceptance verdicts, one line per criterion, echoed at the end of the run
ACCEPTANCE: dict[int, str] = {}


def record(n: int, ok: bool, detail: str) -> bool:
    ACCEPTANCE[n] = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
    print(ACCEPTANCE[n])
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
