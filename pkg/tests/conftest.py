import numpy as np
import pytest

from evstl.formula import Declarations, pair_distance_min, parse, sphere_inner
from evstl.sim import compile_scenario, load


@pytest.fixture(scope="session")
def near55_decls():
    return Declarations({"near55": sphere_inner([0, 1], [5, 5], 1.0)}, frozenset({"alarm"}))


@pytest.fixture(scope="session")
def alarm_formula(near55_decls):
    return parse("G(alarm -> F[0,10](near55))", near55_decls)


@pytest.fixture(scope="session")
def geometry_decls():
    preds = {
        "g1": sphere_inner([0, 1], [0, 0], 1.0),
        "g2": sphere_inner([0, 1], [3, 0], 1.0),
        "near55": sphere_inner([0, 1], [5, 5], 1.0),
        "sep": pair_distance_min([0, 1], [2, 3], 0.3, (0, 1)),
    }
    return Declarations(preds, frozenset({"alarm", "A", "B", "e"}))


class Compiled:
    """Session cache of bundled scenarios and their compiled specs."""

    def __init__(self):
        self._cache = {}

    def __call__(self, name):
        if name not in self._cache:
            sc = load(name)
            self._cache[name] = (sc, compile_scenario(sc))
        return self._cache[name]


@pytest.fixture(scope="session")
def compiled():
    return Compiled()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# -- acceptance report ---------------------------------------------------------------

_verdicts: dict[str, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(name): a release criterion, reported as one PASS/FAIL line")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None or (rep.when != "call" and rep.passed):
        return
    detail = "; ".join(v for k, v in item.user_properties if k == "detail")
    if rep.failed:
        msg = str(rep.longrepr.reprcrash.message) if hasattr(rep.longrepr, "reprcrash") else str(rep.longrepr)
        detail = (detail + "; " if detail else "") + msg.splitlines()[0][:160]
    _verdicts[mark.args[0]] = ("PASS" if rep.passed else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not _verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for name, (verdict, detail) in _verdicts.items():
        terminalreporter.write_line(f"{verdict} {name}: {detail}")
