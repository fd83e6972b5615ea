import numpy as np
import pytest

from ersg.game_model import Game


def random_game(rng, X, U, W, *, terminal=True, sparse_rows=False):
    """Random game with payoffs in [-1, 1] and Dirichlet transition rows."""
    if sparse_rows:
        P = np.zeros((X, U, W, X))
        nxt = rng.integers(0, X, size=(X, U, W))
        np.put_along_axis(P, nxt[..., None], 1.0, axis=3)
    else:
        P = rng.dirichlet(np.ones(X), size=(X, U, W))
    R = rng.uniform(-1, 1, size=(X, U, W))
    term = rng.uniform(-1, 1, size=X) if terminal else None
    return Game.from_arrays(P, R, term)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


# -- acceptance reporting: one pass/fail line per criterion ----------------------

_CRITERIA: dict[int, list[bool]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion the test belongs to")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or (rep.when != "call" and not rep.failed):
        return
    _CRITERIA.setdefault(marker.args[0], []).append(rep.passed)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        results = _CRITERIA[n]
        status = "PASS" if all(results) else "FAIL"
        terminalreporter.write_line(f"criterion {n}: {status} ({sum(results)}/{len(results)} checks passed)")
