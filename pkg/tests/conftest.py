import pytest

from dcot.config import DCoTConfig
from dcot.scripted import parse_trace
from dcot.tasks import load_suite, scripted_suite_path

# Segment 1 is weak but introduces "k", which two later segments use, so it
# survives pruning as a coherence exception.
COHERENCE_TRACE = "\n".join(
    [
        "segment\ttext=set up the matrix\timportance=0.9\treward=0.8\tflags=\tintroduces=m\treferences=",
        "segment\ttext=let k = 3\timportance=0.1\treward=0.1\tflags=\tintroduces=k\treferences=",
        "segment\ttext=restate the problem once more\timportance=0.1\treward=0.1\tflags=redundant",
        "segment\ttext=scale row one by k\timportance=0.9\treward=0.8\tflags=\tintroduces=\treferences=k,m",
        "segment\ttext=scale row two by k\timportance=0.9\treward=0.8\tflags=\tintroduces=\treferences=k",
        "answer\ttext=det = 9\timportance=0.95\treward=1.0",
    ]
)


@pytest.fixture
def config():
    return DCoTConfig()


@pytest.fixture
def coherence_trace():
    return parse_trace(COHERENCE_TRACE, name="coherence")


@pytest.fixture(scope="session")
def scripted_tasks():
    return load_suite(scripted_suite_path())


_ACCEPTANCE = []


@pytest.fixture
def acceptance(request):
    """Callable recording one PASS/FAIL status line for the acceptance summary."""
    reporter = request.config.pluginmanager.get_plugin("terminalreporter")

    def record(line):
        _ACCEPTANCE.append(line)
        if reporter is not None:
            reporter.write_line("")
            reporter.write_line(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE):
            terminalreporter.write_line(line)
