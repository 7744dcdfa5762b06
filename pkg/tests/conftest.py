import pytest

from inls.ground_state import solve_ground_state
from inls.model import ModelParams


@pytest.fixture(scope="session")
def ref_params():
    return ModelParams(3, 2.5, 0.5)


@pytest.fixture(scope="session")
def ref_profile(ref_params):
    return solve_ground_state(ref_params)


@pytest.fixture(scope="session")
def soliton_profile():
    return solve_ground_state(ModelParams(1, 3.0, 0.0, validation=True))


ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE_KEY] = []


@pytest.fixture
def acceptance(request):
    """``acceptance(n, title, passed, detail)`` logs one criterion line for the summary."""
    lines = request.config.stash[ACCEPTANCE_KEY]

    def record(n, title, passed, detail=""):
        lines.append((n, title, bool(passed), detail))
        return passed
    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for n, title, ok, detail in sorted(lines, key=lambda x: x[0]):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  [{n:>2}] {title}: {detail}")
