import itertools
import json
from importlib import resources

import pytest

from fastslow.debugging import DebugInstance
from fastslow.graph import parse_dimacs

FIXTURES = resources.files("fastslow.fixtures")

WALKTHROUGH_ATTEMPT_1 = "(a 1)  (b 2)  (c 2)  (d 1)  (e 1)\n(f 3)  (g 2)  (h 3)  (i 3)  (j 3)"
WALKTHROUGH_ATTEMPT_2_BAD = "(a 2)  (b 1)  (c 2)  (d 3)  (e 4)\n(f 1)  (g 2)  (h 1)  (i 2)  (j 3)"
WALKTHROUGH_ATTEMPT_2_OK = "(a 1)  (b 2)  (c 3)  (d 1)  (e 3)\n(f 1)  (g 2)  (h 2)  (i 4)  (j 1)"


def fixture_path(name):
    return str(FIXTURES.joinpath(name))


def brute_force_colorable(g):
    """Exhaustive search over all k**n assignments."""
    order = list(g.vertices)
    for colors in itertools.product(range(1, g.k + 1), repeat=len(order)):
        f = dict(zip(order, colors))
        if all(f[u] != f[v] for u, v in g.edges):
            return True
    return False


@pytest.fixture
def walkthrough_graph():
    return parse_dimacs(FIXTURES.joinpath("walkthrough_graph.col").read_text(), k=4)


@pytest.fixture
def kth_instance():
    return DebugInstance.from_json(json.loads(FIXTURES.joinpath("kth_factor.json").read_text()))


# -- acceptance reporting ----------------------------------------------------

_criteria = []


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(name): acceptance criterion checked by this test")


def pytest_runtest_logreport(report):
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        for mark in report.user_properties:
            if mark[0] == "criterion":
                _criteria.append((mark[1], report.outcome))


def pytest_collection_modifyitems(items):
    for item in items:
        m = item.get_closest_marker("criterion")
        if m is not None:
            item.user_properties.append(("criterion", m.args[0]))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in _criteria:
        terminalreporter.write_line(f"{'PASS' if outcome == 'passed' else 'FAIL'}  {name}")
