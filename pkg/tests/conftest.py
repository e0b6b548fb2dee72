import numpy as np
import pytest

from ergodec.core import DirichletForm, EdgeFormSpec, StateSpace, build_form

ACCEPTANCE_KEY = "_ergodec_acceptance"


def unit_space(ids, weights=None):
    weights = np.ones(len(ids)) if weights is None else weights
    return StateSpace(tuple(ids), weights)


@pytest.fixture
def edge():
    """Two points, one unit edge, unit weights."""
    return DirichletForm(unit_space("ab"), np.array([[1.0, -1.0], [-1.0, 1.0]]))


@pytest.fixture
def two_blocks():
    """Edges a-b (w=1) and c-d (w=2), no killing."""
    spec = EdgeFormSpec(unit_space("abcd"), (("a", "b", 1.0), ("c", "d", 2.0)), {})
    return build_form(spec)


@pytest.fixture
def record(request):
    """Store one acceptance verdict for the terminal summary."""
    store = getattr(request.config, ACCEPTANCE_KEY, None)
    if store is None:
        store = []
        setattr(request.config, ACCEPTANCE_KEY, store)

    def _record(number, title, passed, detail=""):
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {number:2d}: {title}"
        if detail:
            line += f" ({detail})"
        print(line)
        store.append((number, line))
        return passed

    return _record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    store = getattr(config, ACCEPTANCE_KEY, None)
    if not store:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(store):
        terminalreporter.write_line(line)
